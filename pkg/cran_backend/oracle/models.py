"""
Result types of the brute-force oracle and the size guard in front of it.
"""

from dataclasses import dataclass

from django.core.exceptions import ValidationError

from core_model.rate_program import Skeleton

DEFAULT_LIMIT = 10_000_000

STATUS_OPTIMAL = 'optimal'
STATUS_INFEASIBLE = 'infeasible'


def skeleton_count(cfg):
    """(1 + K 2^M)^N: per subchannel either nobody, or one user with any RRH subset (the empty one included)."""
    return (1 + cfg.num_users * 2 ** cfg.num_rrhs) ** cfg.num_subchannels


class GuardRefused(ValidationError):
    def __init__(self, count, limit):
        self.count = count
        self.limit = limit
        super().__init__(f"brute force would enumerate {count} skeletons, above the limit of {limit}",
                         code='guard_refused')


@dataclass(frozen=True)
class TinyInstanceGuard:
    limit: int = DEFAULT_LIMIT

    def __post_init__(self):
        if self.limit < 1:
            raise ValidationError({'limit': "must be at least 1"})

    def check(self, cfg):
        """Return the enumeration count, or raise GuardRefused when it is above the limit."""
        count = skeleton_count(cfg)
        if count > self.limit:
            raise GuardRefused(count, self.limit)
        return count


@dataclass(frozen=True, eq=False)
class OracleResult:
    status: str
    skeletons_total: int
    evaluated: int = 0
    pruned: int = 0
    skeleton: Skeleton = None
    allocation: object = None
    report: object = None
    total_power: float = None
    kkt_residual: float = None
    cause: str = None

    @property
    def is_feasible(self):
        return self.status == STATUS_OPTIMAL


@dataclass(frozen=True, eq=False)
class OracleCheck:
    """Dual solver run next to the oracle optimum on the same instance."""
    oracle: OracleResult
    solve: object

    @property
    def primal_gap(self):
        """(recovered - optimum) / optimum; None unless both are feasible."""
        if not self.oracle.is_feasible or self.solve.primal_power is None or self.oracle.total_power <= 0:
            return None
        return (self.solve.primal_power - self.oracle.total_power) / self.oracle.total_power

    @property
    def dual_gap(self):
        """(optimum - dual bound) / optimum; negative means weak duality failed."""
        if not self.oracle.is_feasible or self.oracle.total_power <= 0:
            return None
        return (self.oracle.total_power - self.solve.dual_bound) / self.oracle.total_power

    def weak_duality_holds(self, tol=1e-6):
        gap = self.dual_gap
        return gap is None or gap >= -tol
