"""When-to-use-PLA guideline: pick the loosest test threshold that stays safe.

The adversary only wins a round when (a) the channel passes the randomness
gate, so physical-layer authentication actually runs, and (b) the
key-recovery attack succeeds. The guideline searches the threshold grid for
the smallest alpha (maximum acceptance, by monotonicity) whose product

    P(test accepts) * P(attack succeeds)

stays at or below the configured benchmark.

Two evaluation modes are provided because they answer subtly different
questions. Analytic mode multiplies the empirical acceptance probability by
the unconditional closed-form attack success (the attack calculation itself
does not look at the test outcome). Empirical mode measures attack success
only on the channels that actually pass the gate, which is what the gate
really leaves an adversary; filtering demonstrably shifts the surviving
ensemble toward lower correlation, so the two can differ and reports carry
both.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .analytics import binary_query, mary_query, p_m_mdlg, p_mdlg
from .attack import AttackBudget, EqualityOracle, run_m_mdlg, run_mdlg
from .channel import ChannelModelConfig, ChannelSnapshot, estimate_transition_probability
from .core import KeyPhaseMapping, SecretKey
from .protocol import run_authentication_round
from .randomness import RandomnessTestConfig, channel_to_bits, frequency_test
from .rng import make_rng

MODES = ("analytic", "empirical")


def eve_success_probability(p_accept: float, p_attack: float) -> float:
    """Probability the gate passes and the attack then recovers the key."""
    if not 0.0 <= p_accept <= 1.0:
        raise ValueError("p_accept must be in [0, 1]")
    if not 0.0 <= p_attack <= 1.0:
        raise ValueError("p_attack must be in [0, 1]")
    return p_accept * p_attack


@dataclass(frozen=True)
class GuidelineConfig:
    p_benchmark: float  # maximum acceptable attack success probability
    budget: int  # adversary capability N
    alpha_step: float = 0.01
    mode: str = "analytic"
    min_acceptance: float = 0.0  # strictly positive floor enables the reject-PLA outcome

    def __post_init__(self):
        if not 0.0 < self.p_benchmark <= 1.0:
            raise ValueError("p_benchmark must be in (0, 1]")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not 0.0 < self.alpha_step <= 0.5:
            raise ValueError("alpha_step must be in (0, 0.5]")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 <= self.min_acceptance <= 1.0:
            raise ValueError("min_acceptance must be in [0, 1]")


@dataclass(frozen=True)
class GuidelinePoint:
    alpha: float
    p_accept: float
    p_attack: float  # constant in analytic mode; conditional in empirical mode
    p_eve: float
    feasible: bool


@dataclass(frozen=True)
class GuidelineResult:
    alpha_star: float | None  # None means "reject PLA entirely"
    p_accept: float
    eve_success: float
    reject_pla: bool
    mode: str
    p_attack_unconditional: float
    points: tuple[GuidelinePoint, ...]


def _alpha_grid(step: float) -> list[float]:
    count = int(round(1.0 / step))
    grid = [min(i * step, 1.0) for i in range(count + 1)]
    if grid[-1] != 1.0:
        grid.append(1.0)
    return grid


def _ensemble_p_values(
    snapshots: list[ChannelSnapshot],
    mapping: KeyPhaseMapping,
    test_cfg: RandomnessTestConfig,
) -> np.ndarray:
    values = np.empty(len(snapshots))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, snap in enumerate(snapshots):
            values[i] = frequency_test(channel_to_bits(snap, mapping), test_cfg).p_value
    return values


def _ensemble_attack_outcomes(
    snapshots: list[ChannelSnapshot],
    cfg_channel: ChannelModelConfig,
    mapping: KeyPhaseMapping,
    budget: AttackBudget,
    seed: int,
) -> np.ndarray:
    outcomes = np.zeros(len(snapshots), dtype=bool)
    key_bits = mapping.bits_per_subkey * snapshots[0].num_subcarriers
    for i, snap in enumerate(snapshots):
        rng = make_rng(seed, i)
        key = SecretKey.random(key_bits, rng)
        _, observation = run_authentication_round(cfg_channel, key, mapping, rng, channel=snap)
        oracle = EqualityOracle(key)
        if mapping.bits_per_subkey == 1:
            report = run_mdlg(observation, oracle, budget)
        else:
            report = run_m_mdlg(observation, mapping, oracle, budget)
        outcomes[i] = report.success
    return outcomes


def optimize_alpha(
    cfg: GuidelineConfig,
    snapshots: list[ChannelSnapshot],
    mapping: KeyPhaseMapping,
    *,
    cfg_channel: ChannelModelConfig | None = None,
    rho: float | None = None,
    attack_seed: int = 0,
    test_min_length: int = 100,
) -> GuidelineResult:
    """Grid-search the smallest alpha keeping the adversary under the benchmark.

    The snapshot ensemble drives the acceptance-probability estimate in both
    modes. Analytic mode takes the attack factor from the closed form at the
    supplied rho (or, when omitted, the effective correlation measured on the
    ensemble); empirical mode simulates the attack per snapshot and
    conditions success on acceptance. Empirical mode needs `cfg_channel` to
    run protocol rounds over the given snapshots.
    """
    if not snapshots:
        raise ValueError("need a non-empty snapshot ensemble")
    L = snapshots[0].num_subcarriers
    if rho is None:
        rho = max(0.0, min(1.0, estimate_transition_probability(snapshots).rho_eff))
    m = mapping.bits_per_subkey
    if m == 1:
        p_attack_unconditional = p_mdlg(binary_query(L, rho, cfg.budget))
    else:
        p_attack_unconditional = p_m_mdlg(mary_query(m * L, m, rho, cfg.budget))

    probe_cfg = RandomnessTestConfig(alpha=0.0, min_sequence_length=test_min_length)
    p_values = _ensemble_p_values(snapshots, KeyPhaseMapping(1), probe_cfg)

    if cfg.mode == "empirical":
        if cfg_channel is None:
            raise ValueError("empirical mode requires cfg_channel to simulate rounds")
        outcomes = _ensemble_attack_outcomes(
            snapshots, cfg_channel, mapping, AttackBudget(cfg.budget), attack_seed
        )
    else:
        outcomes = None

    total = len(snapshots)
    points: list[GuidelinePoint] = []
    best: GuidelinePoint | None = None
    for alpha in _alpha_grid(cfg.alpha_step):
        mask = p_values > alpha
        p_accept = float(mask.mean())
        if cfg.mode == "analytic":
            p_attack = p_attack_unconditional
            p_eve = eve_success_probability(p_accept, p_attack)
        else:
            hits = int(np.count_nonzero(outcomes & mask))
            accepted = int(np.count_nonzero(mask))
            p_attack = hits / accepted if accepted else 0.0
            p_eve = hits / total
        feasible = p_eve <= cfg.p_benchmark
        point = GuidelinePoint(alpha, p_accept, p_attack, p_eve, feasible)
        points.append(point)
        if feasible and best is None:
            best = point

    if best is None or best.p_accept < cfg.min_acceptance:
        return GuidelineResult(
            alpha_star=None,
            p_accept=0.0 if best is None else best.p_accept,
            eve_success=0.0 if best is None else best.p_eve,
            reject_pla=True,
            mode=cfg.mode,
            p_attack_unconditional=p_attack_unconditional,
            points=tuple(points),
        )
    return GuidelineResult(
        alpha_star=best.alpha,
        p_accept=best.p_accept,
        eve_success=best.p_eve,
        reject_pla=False,
        mode=cfg.mode,
        p_attack_unconditional=p_attack_unconditional,
        points=tuple(points),
    )
