"""Closed-form attack-success probabilities and the Monte Carlo harness.

The authoritative computation is the explicit binomial lower-tail sum,
evaluated in log space so it stays accurate for 56-subcarrier keys and
probabilities far below double-precision comfort. The regularized
incomplete beta function is exposed purely as an independent cross-check
via the binomial-CDF identity

    P(X <= k) = I_{1-p}(n - k, k + 1),  X ~ Binomial(n, p).

Note the subscript: it is the complement 1-p that satisfies the identity
against the explicit sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, gammaln, logsumexp

from .attack import AttackBudget, EqualityOracle, run_m_mdlg, run_mdlg
from .channel import ChannelModelConfig
from .core import KeyPhaseMapping, SecretKey
from .protocol import run_authentication_round
from .rng import make_rng


@dataclass(frozen=True)
class AnalyticQuery:
    """Parameter set for the success-probability formulas.

    Sub-key index equals subcarrier index, so the number of sub-keys S/m
    always equals L; for the binary mapping S = L.
    """

    L: int
    S: int
    m: int
    rho: float
    N: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.S % self.m != 0:
            raise ValueError(f"key length S={self.S} not divisible by m={self.m}")
        if self.S // self.m != self.L:
            raise ValueError(f"S/m = {self.S // self.m} sub-keys but L = {self.L} subcarriers")
        if self.L < 2:
            raise ValueError("need at least 2 subcarriers")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must be in [0, 1]")
        if self.N < 1:
            raise ValueError("N must be >= 1")


def binary_query(L: int, rho: float, N: int) -> AnalyticQuery:
    return AnalyticQuery(L=L, S=L, m=1, rho=rho, N=N)


def mary_query(S: int, m: int, rho: float, N: int) -> AnalyticQuery:
    if S % m != 0:
        raise ValueError(f"key length S={S} not divisible by m={m}")
    return AnalyticQuery(L=S // m, S=S, m=m, rho=rho, N=N)


def complete_level_budget(L: int, level: int) -> int:
    """Key candidates needed to exhaust change-weight levels 0..level (binary)."""
    return 2 * sum(math.comb(L - 1, n) for n in range(level + 1))


def mary_complete_level_budget(S: int, m: int, level: int) -> int:
    """Key candidates needed to exhaust change-weight levels 0..level (m-ary)."""
    k = S // m - 1
    q = 1 << m
    return q * sum(math.comb(k, n) * (q - 1) ** n for n in range(level + 1))


def n_max_binary(L: int, N: int) -> int:
    """Largest complete change-weight level affordable under budget N; -1 if none."""
    if L < 2:
        raise ValueError("need at least 2 subcarriers")
    level = -1
    while level + 1 <= L - 1 and complete_level_budget(L, level + 1) <= N:
        level += 1
    return level


def n_max_mary(S: int, m: int, N: int) -> int:
    if S % m != 0:
        raise ValueError(f"key length S={S} not divisible by m={m}")
    k = S // m - 1
    level = -1
    while level + 1 <= k and mary_complete_level_budget(S, m, level + 1) <= N:
        level += 1
    return level


def floor_to_complete_level(L: int, N: int) -> int:
    """Largest complete-level budget <= N (binary mapping); requires N >= 2."""
    level = n_max_binary(L, N)
    if level < 0:
        raise ValueError(f"budget {N} cannot afford any complete level")
    return complete_level_budget(L, level)


def _log_binomial_tail(trials: int, p: float, k_max: int) -> float:
    """ln P(X <= k_max) for X ~ Binomial(trials, p), in log space."""
    if k_max < 0:
        return -math.inf
    if k_max >= trials:
        return 0.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return -math.inf
    n = np.arange(k_max + 1)
    log_terms = (
        gammaln(trials + 1)
        - gammaln(n + 1)
        - gammaln(trials - n + 1)
        + n * np.log(p)
        + (trials - n) * np.log1p(-p)
    )
    return float(logsumexp(log_terms))


def _binomial_tail_via_beta(trials: int, p: float, k_max: int) -> float:
    """Cross-check path: binomial lower tail through the incomplete beta identity."""
    if k_max < 0:
        return 0.0
    if k_max >= trials:
        return 1.0
    return regularized_incomplete_beta(1.0 - p, trials - k_max, k_max + 1)


def log_p_mdlg(query: AnalyticQuery) -> float:
    """Natural log of the binary-mapping attack success probability."""
    if query.m != 1:
        raise ValueError("log_p_mdlg is the binary-mapping formula; use log_p_m_mdlg")
    p_b = (1.0 - query.rho) / 2.0
    return _log_binomial_tail(query.L - 1, p_b, n_max_binary(query.L, query.N))


def p_mdlg(query: AnalyticQuery) -> float:
    """Success probability of the binary-mapping attack under budget N."""
    return math.exp(log_p_mdlg(query))


def log_p_m_mdlg(query: AnalyticQuery) -> float:
    """Natural log of the m-ary-mapping attack success probability."""
    p_bm = 1.0 - (1.0 + query.rho) / (1 << query.m)
    k = query.S // query.m - 1
    return _log_binomial_tail(k, p_bm, n_max_mary(query.S, query.m, query.N))


def p_m_mdlg(query: AnalyticQuery) -> float:
    """Success probability of the m-ary-mapping attack; equals p_mdlg at m = 1."""
    return math.exp(log_p_m_mdlg(query))


def p_mdlg_beta_form(query: AnalyticQuery) -> float:
    """Beta-function evaluation of the same tail, for cross-checking the sum."""
    if query.m != 1:
        raise ValueError("binary-mapping form only")
    p_b = (1.0 - query.rho) / 2.0
    return _binomial_tail_via_beta(query.L - 1, p_b, n_max_binary(query.L, query.N))


def p_m_mdlg_beta_form(query: AnalyticQuery) -> float:
    p_bm = 1.0 - (1.0 + query.rho) / (1 << query.m)
    k = query.S // query.m - 1
    return _binomial_tail_via_beta(k, p_bm, n_max_mary(query.S, query.m, query.N))


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b), validated; backed by SciPy's continued-fraction evaluation."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must be in [0, 1]")
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    return float(betainc(a, b, x))


def random_guess_baseline(S: int, N: int) -> float:
    """Success probability of guessing N distinct keys uniformly at random."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    if N > (1 << S):
        raise ValueError(f"cannot make {N} distinct guesses over a {S}-bit key space")
    return N / float(1 << S)


@dataclass(frozen=True)
class MonteCarloResult:
    rate: float
    stderr: float
    successes: int
    trials: int


def monte_carlo_success(
    cfg: ChannelModelConfig,
    mapping: KeyPhaseMapping,
    budget: AttackBudget,
    trials: int,
    seed: int,
) -> MonteCarloResult:
    """Empirical attack success rate over fully simulated rounds.

    Every trial draws a fresh key and fresh channels, runs the whole
    challenge-response protocol, and attacks the resulting observation.
    Per-trial RNG substreams keyed by (seed, trial) make the estimate
    reproducible and order-independent.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    key_bits = mapping.bits_per_subkey * cfg.num_subcarriers
    successes = 0
    for trial in range(trials):
        rng = make_rng(seed, trial)
        key = SecretKey.random(key_bits, rng)
        _, observation = run_authentication_round(cfg, key, mapping, rng)
        oracle = EqualityOracle(key)
        if mapping.bits_per_subkey == 1:
            report = run_mdlg(observation, oracle, budget)
        else:
            report = run_m_mdlg(observation, mapping, oracle, budget)
        successes += int(report.success)
    rate = successes / trials
    stderr = math.sqrt(rate * (1.0 - rate) / trials)
    return MonteCarloResult(rate=rate, stderr=stderr, successes=successes, trials=trials)
