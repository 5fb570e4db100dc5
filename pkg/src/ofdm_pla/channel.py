"""OFDM subchannel response models, trace replay, and correlation estimators.

Two synthetic models are provided. `bernoulli_differential` is the
analysis-faithful model: the quantized differential of the phase response
flips with probability exactly (1 - rho)/2 per adjacent pair (and, under an
m-bit grid, leaves the center grid cell with probability 1 - (1 + rho)/2^m),
so the closed-form attack statistics hold exactly on it.
`ar1_complex_gaussian` is the physically-motivated model: a first-order
autoregression over complex subcarrier gains whose lag-1 correlation equals
the configured rho; its effective differential statistics are measured, not
assumed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .core import quantize_binary, differential_sequence, wrap_phase
from .rng import make_rng

MODEL_KINDS = (
    "bernoulli_differential",
    "ar1_complex_gaussian",
    "flat_fading",
    "trace_replay",
)

TRACE_HEADER = ["snapshot_id", "subcarrier_index", "amplitude", "phase_radians"]


class TraceFormatError(ValueError):
    """Malformed trace file; message carries the 1-based line number."""


@dataclass(frozen=True)
class ChannelSnapshot:
    """Per-subcarrier channel response: amplitudes a_l and phase shifts theta_l."""

    amplitudes: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        phs = np.asarray(self.phases, dtype=float)
        if amps.shape != phs.shape or amps.ndim != 1:
            raise ValueError("amplitudes and phases must be 1-D arrays of equal length")
        if not np.all(amps > 0):
            raise ValueError("amplitudes must be strictly positive")
        if np.any(phs <= -np.pi) or np.any(phs > np.pi):
            raise ValueError("phases must be wrapped to (-pi, pi]")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases", phs)

    @property
    def num_subcarriers(self) -> int:
        return self.amplitudes.size

    def gains(self) -> np.ndarray:
        """Complex per-subcarrier gains a_l * exp(j*theta_l)."""
        return self.amplitudes * np.exp(1j * self.phases)


@dataclass
class TraceStore:
    """Replay container for externally collected channel snapshots."""

    snapshots: list[ChannelSnapshot]
    source: str = ""
    bandwidth_label: str = ""
    _cursor: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.snapshots:
            L = self.snapshots[0].num_subcarriers
            if any(s.num_subcarriers != L for s in self.snapshots):
                raise ValueError("all trace snapshots must share the same subcarrier count")

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def num_subcarriers(self) -> int:
        if not self.snapshots:
            raise ValueError("empty trace store")
        return self.snapshots[0].num_subcarriers

    def next_snapshot(self) -> ChannelSnapshot:
        """Round-robin replay. Single-consumer; synchronize externally if shared."""
        if not self.snapshots:
            raise ValueError("empty trace store")
        snap = self.snapshots[self._cursor % len(self.snapshots)]
        self._cursor += 1
        return snap


@dataclass(frozen=True)
class ChannelModelConfig:
    model_kind: str
    rho: float = 0.0
    num_subcarriers: int = 56
    seed: int = 0
    mapping_bits: int = 1  # grid resolution of the bernoulli model; 1 = binary
    trace: TraceStore | None = None

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"unknown channel model {self.model_kind!r}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must be in [0, 1]")
        if self.num_subcarriers < 2:
            raise ValueError("need at least 2 subcarriers")
        if self.mapping_bits < 1:
            raise ValueError("mapping_bits must be >= 1")
        if self.model_kind == "trace_replay":
            if self.trace is None or len(self.trace) == 0:
                raise ValueError("trace_replay requires a non-empty trace store")


def _sample_bernoulli_differential(cfg: ChannelModelConfig, rng: np.random.Generator) -> ChannelSnapshot:
    # theta_0 uniform on (-pi, pi]; each differential stays in the center grid
    # cell with probability (1 + rho)/2^m, else lands uniformly in the rest of
    # the circle. At m = 1 the quantized differential bit therefore flips with
    # probability exactly (1 - rho)/2.
    L = cfg.num_subcarriers
    half_cell = np.pi / (1 << cfg.mapping_bits)
    p_center = (1.0 + cfg.rho) / (1 << cfg.mapping_bits)
    theta0 = np.pi - rng.uniform(0.0, 2.0 * np.pi)  # (-pi, pi]
    stay = rng.random(L - 1) < p_center
    center = half_cell - rng.uniform(0.0, 2.0 * half_cell, size=L - 1)  # (-h, h]
    # Uniform over the complement (h, 2*pi - h] of the center cell on the circle.
    outside = wrap_phase(-half_cell - rng.uniform(0.0, 2.0 * np.pi - 2.0 * half_cell, size=L - 1))
    delta = np.where(stay, center, outside)
    phases = wrap_phase(theta0 + np.concatenate(([0.0], np.cumsum(delta))))
    return ChannelSnapshot(np.ones(L), phases)


def _sample_ar1(cfg: ChannelModelConfig, rng: np.random.Generator) -> ChannelSnapshot:
    # g_0 ~ CN(0,1); g_{l+1} = rho*g_l + sqrt(1-rho^2)*w_l, w_l ~ CN(0,1).
    L = cfg.num_subcarriers
    noise = (rng.normal(size=L) + 1j * rng.normal(size=L)) / np.sqrt(2.0)
    drive = np.concatenate(([noise[0]], np.sqrt(1.0 - cfg.rho**2) * noise[1:]))
    gains = lfilter([1.0], [1.0, -cfg.rho], drive)
    amps = np.abs(gains)
    if np.any(amps == 0):
        raise ValueError("degenerate zero-amplitude gain")
    return ChannelSnapshot(amps, wrap_phase(np.angle(gains)))


def _sample_flat(cfg: ChannelModelConfig, rng: np.random.Generator) -> ChannelSnapshot:
    L = cfg.num_subcarriers
    theta = np.pi - rng.uniform(0.0, 2.0 * np.pi)
    amp = rng.rayleigh(scale=1.0 / np.sqrt(2.0))
    while amp == 0.0:  # measure-zero guard; amplitudes must stay positive
        amp = rng.rayleigh(scale=1.0 / np.sqrt(2.0))
    return ChannelSnapshot(np.full(L, amp), np.full(L, theta))


def sample_channel(cfg: ChannelModelConfig, rng: np.random.Generator) -> ChannelSnapshot:
    """Draw one channel snapshot from the configured model."""
    if cfg.model_kind == "bernoulli_differential":
        return _sample_bernoulli_differential(cfg, rng)
    if cfg.model_kind == "ar1_complex_gaussian":
        return _sample_ar1(cfg, rng)
    if cfg.model_kind == "flat_fading":
        return _sample_flat(cfg, rng)
    if cfg.model_kind == "trace_replay":
        return cfg.trace.next_snapshot()
    raise ValueError(f"unknown channel model {cfg.model_kind!r}")


def sample_snapshots(cfg: ChannelModelConfig, count: int, start_index: int = 0) -> list[ChannelSnapshot]:
    """Draw `count` snapshots, one independent RNG substream per snapshot index.

    Substreams are keyed by (cfg.seed, snapshot index), so generation is
    reproducible and order-independent.
    """
    if cfg.model_kind == "trace_replay":
        n = len(cfg.trace)
        return [cfg.trace.snapshots[(start_index + i) % n] for i in range(count)]
    return [sample_channel(cfg, make_rng(cfg.seed, start_index + i)) for i in range(count)]


def estimate_correlation(snapshots: list[ChannelSnapshot]) -> float:
    """Pooled Pearson correlation between adjacent-subcarrier complex gains.

    Computed as the real part of the normalized conjugate cross-moment over
    all adjacent pairs of all snapshots.
    """
    if len(snapshots) < 2:
        raise ValueError("need at least 2 snapshots")
    if snapshots[0].num_subcarriers < 2:
        raise ValueError("need at least 2 subcarriers")
    gains = np.stack([s.gains() for s in snapshots])
    x = gains[:, :-1].ravel()
    y = gains[:, 1:].ravel()
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt(np.sum(np.abs(xc) ** 2) * np.sum(np.abs(yc) ** 2))
    if denom == 0:
        raise ValueError("degenerate ensemble: zero variance")
    return float(np.real(np.sum(yc * np.conj(xc))) / denom)


@dataclass(frozen=True)
class TransitionEstimate:
    flip_rate: float  # fraction of differential bits equal to 1
    rho_eff: float  # 1 - 2 * flip_rate


def estimate_transition_probability(snapshots: list[ChannelSnapshot]) -> TransitionEstimate:
    """Empirical differential-bit flip rate and the correlation it implies."""
    if not snapshots:
        raise ValueError("need at least 1 snapshot")
    total = 0
    ones = 0
    for s in snapshots:
        bits = quantize_binary(differential_sequence(s.phases))
        total += bits.size
        ones += int(bits.sum())
    flip_rate = ones / total
    return TransitionEstimate(flip_rate=flip_rate, rho_eff=1.0 - 2.0 * flip_rate)


def save_trace_csv(path, snapshots: list[ChannelSnapshot]) -> None:
    """Write snapshots in the trace CSV format (one row per subcarrier)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for sid, snap in enumerate(snapshots):
            for l in range(snap.num_subcarriers):
                writer.writerow([sid, l, repr(float(snap.amplitudes[l])), repr(float(snap.phases[l]))])


def load_trace_csv(path) -> TraceStore:
    """Parse a trace CSV into a TraceStore; malformed rows abort with a line number."""
    snapshots: list[ChannelSnapshot] = []
    cur_id = None
    cur_amps: list[float] = []
    cur_phases: list[float] = []
    expected_l = None

    def flush(line_no):
        nonlocal cur_amps, cur_phases
        if cur_id is None:
            return
        if expected_l is not None and len(cur_amps) != expected_l:
            raise TraceFormatError(
                f"line {line_no}: snapshot {cur_id} has {len(cur_amps)} subcarriers, expected {expected_l}"
            )
        snapshots.append(ChannelSnapshot(np.asarray(cur_amps), np.asarray(cur_phases)))
        cur_amps, cur_phases = [], []

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TraceFormatError("line 1: empty trace file")
        if [h.strip() for h in header] != TRACE_HEADER:
            raise TraceFormatError(f"line 1: bad header {header!r}, expected {TRACE_HEADER}")
        line_no = 1
        for row in reader:
            line_no += 1
            if len(row) != 4:
                raise TraceFormatError(f"line {line_no}: expected 4 fields, got {len(row)}")
            try:
                sid = int(row[0])
                sub = int(row[1])
                amp = float(row[2])
                phase = float(row[3])
            except ValueError as exc:
                raise TraceFormatError(f"line {line_no}: {exc}") from exc
            if sid < 0:
                raise TraceFormatError(f"line {line_no}: negative snapshot_id {sid}")
            if cur_id is not None and sid < cur_id:
                raise TraceFormatError(f"line {line_no}: snapshot_id not monotone ({sid} after {cur_id})")
            if sid != cur_id:
                flush(line_no)
                if snapshots and expected_l is None:
                    expected_l = snapshots[0].num_subcarriers
                cur_id = sid
            if sub != len(cur_amps):
                raise TraceFormatError(f"line {line_no}: subcarrier_index {sub}, expected {len(cur_amps)}")
            if not amp > 0:
                raise TraceFormatError(f"line {line_no}: amplitude must be positive, got {amp}")
            if not (-np.pi < phase <= np.pi):
                raise TraceFormatError(f"line {line_no}: phase {phase} outside (-pi, pi]")
            cur_amps.append(amp)
            cur_phases.append(phase)
        flush(line_no + 1)
    if not snapshots:
        raise TraceFormatError("line 1: trace file contains no snapshots")
    L = snapshots[0].num_subcarriers
    for i, s in enumerate(snapshots):
        if s.num_subcarriers != L:
            raise TraceFormatError(f"snapshot {i} has {s.num_subcarriers} subcarriers, expected {L}")
    return TraceStore(snapshots=snapshots, source=str(path))
