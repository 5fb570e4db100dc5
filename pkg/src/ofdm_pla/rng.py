"""Deterministic RNG substream derivation.

All randomness in the toolkit flows from one 64-bit master seed. Substreams
are keyed by small integer domain tags plus an index (e.g. trial number), so
independent units of work draw from independent, order-independent streams.
"""

from __future__ import annotations

import numpy as np

# Domain tags for named substreams derived from the master seed.
DOMAIN_CHANNEL = 0
DOMAIN_PROTOCOL = 1
DOMAIN_ATTACK = 2
DOMAIN_TEST = 3
DOMAIN_GUIDELINE = 4


def make_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream identified by (master_seed, *key)."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, key)]))
