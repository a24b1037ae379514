"""Instance data the dual solver reuses at every dual point."""

from functools import cached_property
from itertools import combinations

import numpy as np

from core_model.models import check_instance

from .models import DualIndex

LN2 = np.log(2.0)


def rrh_subsets(num_rrhs):
    """All nonempty RRH selections as an (S, M) 0/1 array, in lexicographic order of their index tuples."""
    subsets = sorted(
        subset for size in range(1, num_rrhs + 1) for subset in combinations(range(num_rrhs), size))
    matrix = np.zeros((len(subsets), num_rrhs), dtype=np.int8)
    for row, subset in enumerate(subsets):
        matrix[row, list(subset)] = 1
    return matrix


class DualProblem:
    """
    Channel gains normalised by noise (|h|^2 / sigma^2), cache indicators and
    bounds of one instance, plus the lambda index.
    """

    def __init__(self, chan, content, cfg):
        check_instance(chan, content, cfg)
        self.chan = chan
        self.content = content
        self.cfg = cfg
        self.index = DualIndex.build(content, cfg)
        self.gains = chan.power_gains / cfg.noise_power
        self.subchannel_bandwidth = cfg.subchannel_bandwidth
        self.uncached = content.uncached_for_user.astype(float)
        self.inv_min_rate = 1.0 / cfg.min_rate_array
        self.inv_fronthaul = 1.0 / cfg.fronthaul_array

    @cached_property
    def selections(self):
        return rrh_subsets(self.cfg.num_rrhs)

    def fronthaul_weights(self, dual):
        """(M, K) price of one bit/s of user k on RRH m: (1 - c[m, f_k]) lambda[m, k] / R_fh[m]."""
        return dual.lambda_matrix * self.uncached * self.inv_fronthaul[:, None]

    def rate_weights(self, dual):
        """(K,) reward of one bit/s for user k: mu_k / R_min_k."""
        return dual.mu * self.inv_min_rate

    def price(self, dual, user, selection):
        """Net reward F of one bit/s for `user` on a selection."""
        weights = self.fronthaul_weights(dual)
        return float(self.rate_weights(dual)[user] - np.asarray(selection, dtype=float) @ weights[:, user])
