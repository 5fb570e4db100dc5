"""Frequency (monobit) randomness test on quantized channel responses.

The test is used exactly as a gate in front of the authentication flow:
quantize the measured channel phases into bits, compute the monobit
p-value, and treat the channel as random only when the p-value exceeds the
threshold alpha. Other tests can be slotted in by replacing
`frequency_test`; only the monobit test ships here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelModelConfig, ChannelSnapshot, estimate_transition_probability, sample_snapshots
from .core import KeyPhaseMapping, snap_to_grid_index


@dataclass(frozen=True)
class RandomnessTestConfig:
    alpha: float
    min_sequence_length: int = 100
    concat_snapshots: int = 1  # snapshots concatenated per test instance

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.concat_snapshots < 1:
            raise ValueError("concat_snapshots must be >= 1")


@dataclass(frozen=True)
class TestResult:
    p_value: float
    accepted: bool
    sequence_length: int
    ones_count: int


def channel_to_bits(snapshot: ChannelSnapshot, mapping: KeyPhaseMapping) -> np.ndarray:
    """Quantize the phase response into bits under the key-phase grid.

    With the binary mapping each phase contributes one bit (0 for the region
    around phase 0, 1 for the region around pi); wider mappings contribute
    the m bits of the nearest grid index, MSB first.
    """
    idx = snap_to_grid_index(snapshot.phases, mapping)
    m = mapping.bits_per_subkey
    if m == 1:
        return idx.astype(np.uint8)
    shifts = np.arange(m - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def frequency_test(bits, cfg: RandomnessTestConfig) -> TestResult:
    """NIST-style monobit test: p = erfc(|S_n| / sqrt(2 n))."""
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.size
    if n == 0:
        raise ValueError("empty bit sequence")
    if n < cfg.min_sequence_length:
        warnings.warn(
            f"sequence length {n} below recommended minimum {cfg.min_sequence_length}",
            stacklevel=2,
        )
    ones = int(bits.sum())
    signed_sum = 2 * ones - n
    s_obs = abs(signed_sum) / math.sqrt(n)
    p_value = math.erfc(s_obs / math.sqrt(2.0))
    return TestResult(
        p_value=p_value,
        accepted=p_value > cfg.alpha,
        sequence_length=n,
        ones_count=ones,
    )


@dataclass(frozen=True)
class AcceptanceEstimate:
    p_accept: float
    stderr: float
    rho_eff_all: float
    rho_eff_accepted: float | None  # None when nothing was accepted
    accepted_count: int
    trials: int


def p_accept_estimate(
    cfg_channel: ChannelModelConfig,
    cfg_test: RandomnessTestConfig,
    trials: int,
    seed: int | None = None,
) -> AcceptanceEstimate:
    """Fraction of sampled channels whose quantized bits pass the test.

    Also reports the effective correlation (from the differential flip rate)
    over the accepted snapshots next to the whole-ensemble value, since the
    gate visibly shifts the surviving ensemble.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cfg = cfg_channel if seed is None else replace(cfg_channel, seed=seed)
    mapping = KeyPhaseMapping(1)
    snapshots = sample_snapshots(cfg, trials * cfg_test.concat_snapshots)
    groups = [
        snapshots[i * cfg_test.concat_snapshots : (i + 1) * cfg_test.concat_snapshots]
        for i in range(trials)
    ]
    accepted_groups = []
    accepted = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for group in groups:
            bits = np.concatenate([channel_to_bits(s, mapping) for s in group])
            result = frequency_test(bits, cfg_test)
            if result.accepted:
                accepted += 1
                accepted_groups.extend(group)
    p_accept = accepted / trials
    stderr = math.sqrt(p_accept * (1.0 - p_accept) / trials)
    rho_all = estimate_transition_probability(snapshots).rho_eff
    rho_acc = (
        estimate_transition_probability(accepted_groups).rho_eff if accepted_groups else None
    )
    return AcceptanceEstimate(
        p_accept=p_accept,
        stderr=stderr,
        rho_eff_all=rho_all,
        rho_eff_accepted=rho_acc,
        accepted_count=accepted,
        trials=trials,
    )
