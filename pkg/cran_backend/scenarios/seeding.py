"""
Per-purpose random streams derived from one user-facing seed.

Every draw is keyed by (seed, purpose, drop), so switching the caching
strategy or the swept parameter never moves the channel or request draws of
a drop.
"""

import numpy as np

from .models import check_seed

TOPOLOGY = 0
SHADOWING = 1
FADING = 2
REQUESTS = 3
CACHING = 4


def stream(seed, purpose, drop=0):
    return np.random.default_rng(np.random.SeedSequence([check_seed(seed), purpose, int(drop)]))
