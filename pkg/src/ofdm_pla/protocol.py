"""The four-step challenge-response authentication flow and the eavesdropper's view.

Alice sends a random-phase challenge; Bob receives it through the channel,
negates the received phases and adds his key-mapped phases; Alice receives
the response through the reciprocal channel and checks each subcarrier
against the expected phase. The eavesdropper sees both transmissions through
her own (known) channels and can extract z_l = wrap(phi_l - theta_l) but
nothing more.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelModelConfig, ChannelSnapshot, sample_channel
from .core import KeyPhaseMapping, SecretKey, angular_distance, map_key_to_phases, wrap_phase

DEFAULT_VERIFY_TOL = 1e-9


@dataclass(frozen=True)
class FrequencySignal:
    """Per-subcarrier complex signal (amplitude and phase)."""

    amplitudes: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        phs = np.asarray(self.phases, dtype=float)
        if amps.shape != phs.shape or amps.ndim != 1:
            raise ValueError("amplitudes and phases must be 1-D arrays of equal length")
        if np.any(amps < 0):
            raise ValueError("amplitudes must be nonnegative")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases", phs)

    @property
    def num_subcarriers(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True)
class Challenge:
    """Alice's random transmit phases beta_l."""

    beta: np.ndarray

    def as_signal(self) -> FrequencySignal:
        return FrequencySignal(np.ones_like(self.beta), self.beta)


@dataclass(frozen=True)
class EveObservation:
    """The phase vector z with z_l = wrap(phi_l - theta_l)."""

    phases: np.ndarray

    @property
    def num_subcarriers(self) -> int:
        return np.asarray(self.phases).size


def make_challenge(num_subcarriers: int, rng: np.random.Generator) -> Challenge:
    """Independent uniform transmit phases on (-pi, pi]."""
    if num_subcarriers < 2:
        raise ValueError("need at least 2 subcarriers")
    beta = np.pi - rng.uniform(0.0, 2.0 * np.pi, size=num_subcarriers)
    return Challenge(beta)


def propagate(signal: FrequencySignal, channel: ChannelSnapshot) -> FrequencySignal:
    """Noise-free channel pass: amplitudes multiply, phases add (wrapped)."""
    if signal.num_subcarriers != channel.num_subcarriers:
        raise ValueError("signal/channel length mismatch")
    return FrequencySignal(
        signal.amplitudes * channel.amplitudes,
        wrap_phase(signal.phases + channel.phases),
    )


def bob_response(received: FrequencySignal, key: SecretKey, mapping: KeyPhaseMapping) -> FrequencySignal:
    """Negate the received phases and add the key-mapped phase sequence."""
    phi = map_key_to_phases(key, mapping)
    if phi.size != received.num_subcarriers:
        raise ValueError(
            f"key maps to {phi.size} phases but signal has {received.num_subcarriers} subcarriers"
        )
    return FrequencySignal(received.amplitudes, wrap_phase(phi - received.phases))


def alice_verify(
    received: FrequencySignal,
    challenge: Challenge,
    key: SecretKey,
    mapping: KeyPhaseMapping,
    tol: float = DEFAULT_VERIFY_TOL,
) -> bool:
    """True iff every received phase matches wrap(phi_l - beta_l) within tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if tol >= np.pi:
        warnings.warn("verification tolerance >= pi accepts any phase", stacklevel=2)
    phi = map_key_to_phases(key, mapping)
    if phi.size != received.num_subcarriers or challenge.beta.size != received.num_subcarriers:
        raise ValueError("length mismatch")
    expected = wrap_phase(phi - challenge.beta)
    return bool(np.all(angular_distance(received.phases, expected) <= tol))


def eve_observe(
    challenge_at_eve: FrequencySignal,
    response_at_eve: FrequencySignal,
    h_prime: ChannelSnapshot,
    h_double_prime: ChannelSnapshot,
) -> EveObservation:
    """Extract z from the two overheard signals, given Eve's own channels.

    Eve removes her Alice-side channel phases to recover the challenge
    phases, then strips both from the overheard response.
    """
    if not (
        challenge_at_eve.num_subcarriers
        == response_at_eve.num_subcarriers
        == h_prime.num_subcarriers
        == h_double_prime.num_subcarriers
    ):
        raise ValueError("length mismatch")
    beta_hat = wrap_phase(challenge_at_eve.phases - h_prime.phases)
    z = wrap_phase(response_at_eve.phases - h_double_prime.phases + beta_hat)
    return EveObservation(z)


@dataclass(frozen=True)
class RoundTranscript:
    """Everything observable in one authentication round, for audit."""

    round_index: int
    seed: int
    theta: np.ndarray
    beta: np.ndarray
    phi: np.ndarray
    z: np.ndarray
    verified: bool


def run_authentication_round(
    cfg: ChannelModelConfig,
    key: SecretKey,
    mapping: KeyPhaseMapping,
    rng: np.random.Generator,
    *,
    channel: ChannelSnapshot | None = None,
    phase_noise_kappa: float | None = None,
    round_index: int = 0,
    seed: int = 0,
    tol: float = DEFAULT_VERIFY_TOL,
) -> tuple[RoundTranscript, EveObservation]:
    """One full round: challenge, response, verification, and Eve's extraction.

    Samples the Alice-Bob channel (unless one is supplied) plus Eve's two
    channels from the configured model. The optional von Mises phase noise
    perturbs what Alice and Eve receive; it is off by default and all
    closed-form statistics assume it stays off.
    """
    h = channel if channel is not None else sample_channel(cfg, rng)
    h_prime = sample_channel(cfg, rng)
    h_double_prime = sample_channel(cfg, rng)
    challenge = make_challenge(h.num_subcarriers, rng)

    received_bob = propagate(challenge.as_signal(), h)
    response = bob_response(received_bob, key, mapping)
    received_alice = propagate(response, h)
    challenge_at_eve = propagate(challenge.as_signal(), h_prime)
    response_at_eve = propagate(response, h_double_prime)

    if phase_noise_kappa is not None:
        def jitter(sig):
            noise = rng.vonmises(0.0, phase_noise_kappa, size=sig.num_subcarriers)
            return FrequencySignal(sig.amplitudes, wrap_phase(sig.phases + noise))

        received_alice = jitter(received_alice)
        challenge_at_eve = jitter(challenge_at_eve)
        response_at_eve = jitter(response_at_eve)

    verified = alice_verify(received_alice, challenge, key, mapping, tol=tol)
    observation = eve_observe(challenge_at_eve, response_at_eve, h_prime, h_double_prime)
    transcript = RoundTranscript(
        round_index=round_index,
        seed=seed,
        theta=h.phases,
        beta=challenge.beta,
        phi=map_key_to_phases(key, mapping),
        z=observation.phases,
        verified=verified,
    )
    return transcript, observation


def transcripts_to_jsonl(transcripts, path) -> None:
    """Write transcripts as line-delimited JSON records."""
    with open(path, "w") as fh:
        for t in transcripts:
            record = {
                "round": t.round_index,
                "seed": t.seed,
                "theta": [float(v) for v in t.theta],
                "beta": [float(v) for v in t.beta],
                "phi": [float(v) for v in t.phi],
                "z": [float(v) for v in t.z],
                "verified": t.verified,
            }
            fh.write(json.dumps(record) + "\n")
