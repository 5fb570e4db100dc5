"""Shared domain types: keys, key-phase mappings, phase arithmetic, quantization.

Phase convention used throughout the toolkit: all phases live in the
half-open interval (-pi, pi], closed at the upper end. Every public
operation returns wrapped phases; callers are expected to pass wrapped
phases where a contract says so.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_phase(x):
    """Wrap angles into (-pi, pi]. Accepts scalars or arrays."""
    x = np.asarray(x, dtype=float)
    w = np.remainder(x, TWO_PI)  # [0, 2*pi)
    w = np.where(w > np.pi, w - TWO_PI, w)
    if w.ndim == 0:
        return float(w)
    return w


def angular_distance(a, b):
    """Shortest angular distance |a - b| on the circle, in [0, pi]."""
    return np.abs(wrap_phase(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


@dataclass(frozen=True)
class SecretKey:
    """A pre-shared binary secret key of S bits.

    Bits are stored most-significant-sub-key-first; sub-key index equals
    subcarrier index under an m-bit mapping.
    """

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) < 2:
            raise ValueError("secret key needs at least 2 bits")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("secret key bits must be 0 or 1")
        # normalize numpy integers etc. to plain ints
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))

    @classmethod
    def random(cls, n_bits: int, rng: np.random.Generator) -> "SecretKey":
        return cls(tuple(int(b) for b in rng.integers(0, 2, size=n_bits)))

    @classmethod
    def from_subkey_values(cls, values, bits_per_subkey: int) -> "SecretKey":
        """Build a key from per-subcarrier sub-key values (MSB-first within each sub-key)."""
        m = bits_per_subkey
        bits = []
        for v in values:
            v = int(v)
            if not 0 <= v < (1 << m):
                raise ValueError(f"sub-key value {v} out of range for {m}-bit sub-keys")
            bits.extend((v >> (m - 1 - j)) & 1 for j in range(m))
        return cls(tuple(bits))

    def subkey_values(self, bits_per_subkey: int) -> np.ndarray:
        """Per-subcarrier sub-key values under an m-bit grouping."""
        m = bits_per_subkey
        if len(self.bits) % m != 0:
            raise ValueError(f"key length {len(self.bits)} not divisible by {m}")
        groups = np.asarray(self.bits, dtype=np.int64).reshape(-1, m)
        weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
        return groups @ weights

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.uint8)

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class KeyPhaseMapping:
    """Bijection between m-bit sub-key values and the 2^m-point phase grid.

    Sub-key value v maps to wrap(v * 2*pi / 2^m) (natural binary order).
    For m = 1 this is the binary mapping 0 -> 0, 1 -> pi.
    """

    bits_per_subkey: int = 1

    def __post_init__(self):
        if not 1 <= self.bits_per_subkey <= 16:
            raise ValueError("bits_per_subkey must be in [1, 16]")

    @property
    def alphabet_size(self) -> int:
        return 1 << self.bits_per_subkey

    @property
    def grid_step(self) -> float:
        return TWO_PI / self.alphabet_size

    @property
    def phase_alphabet(self) -> np.ndarray:
        """The 2^m grid phases in sub-key value order, wrapped to (-pi, pi]."""
        return wrap_phase(np.arange(self.alphabet_size) * self.grid_step)

    def subkey_to_phase(self, values):
        values = np.asarray(values, dtype=np.int64)
        if np.any((values < 0) | (values >= self.alphabet_size)):
            raise ValueError("sub-key value out of range")
        return wrap_phase(values * self.grid_step)

    def phase_to_subkey(self, phases) -> np.ndarray:
        """Invert the mapping by snapping each phase to the nearest grid point."""
        return snap_to_grid_index(phases, self)


def snap_to_grid_index(phases, mapping: KeyPhaseMapping) -> np.ndarray:
    """Nearest-grid sub-key index for each phase.

    Each grid point g owns the circular region (g - h, g + h] with
    h = pi / 2^m, so boundary inputs resolve exactly as the binary
    quantization regions do.
    """
    phases = np.asarray(phases, dtype=float)
    if np.any(~np.isfinite(phases)):
        raise ValueError("non-finite phase")
    t = phases / mapping.grid_step
    idx = np.ceil(t - 0.5).astype(np.int64)
    return np.remainder(idx, mapping.alphabet_size)


def snap_to_grid(delta, mapping: KeyPhaseMapping):
    """Replace each element with its nearest multiple of 2*pi/2^m, wrapped."""
    idx = snap_to_grid_index(delta, mapping)
    return wrap_phase(idx * mapping.grid_step)


def map_key_to_phases(key: SecretKey, mapping: KeyPhaseMapping) -> np.ndarray:
    """Map a key to its per-subcarrier phase sequence."""
    m = mapping.bits_per_subkey
    if len(key) % m != 0:
        raise ValueError(f"key length {len(key)} not divisible by bits_per_subkey {m}")
    return mapping.subkey_to_phase(key.subkey_values(m))


def inverse_map(phases, mapping: KeyPhaseMapping) -> SecretKey:
    """Recover the key whose mapped phases are nearest to the given phases."""
    values = snap_to_grid_index(phases, mapping)
    return SecretKey.from_subkey_values(values, mapping.bits_per_subkey)


def differential_sequence(x) -> np.ndarray:
    """Adjacent differences wrap(x[l+1] - x[l]); output length len(x) - 1."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 phases to form a differential sequence")
    return wrap_phase(np.diff(x))


def quantize_binary(delta) -> np.ndarray:
    """Quantize wrapped phases to bits: 0 on (-pi/2, pi/2], 1 elsewhere."""
    delta = np.asarray(delta, dtype=float)
    zero_region = (delta > -np.pi / 2) & (delta <= np.pi / 2)
    return np.where(zero_region, 0, 1).astype(np.uint8)
