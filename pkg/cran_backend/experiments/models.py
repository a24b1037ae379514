"""
Monte-Carlo sweep types.

A sweep varies one scenario parameter over a grid and, at every grid value,
solves `num_drops` random drops per caching strategy. Drop d of every
(strategy, value) pair is drawn from the same base seed, so the channel and
requests are shared and only the cache (and the swept parameter) differ.
Powers are stored in Watts, unnormalized.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from django.core.exceptions import ValidationError

from dual_solver.models import STATUS_FEASIBLE, STATUS_INFEASIBLE, STATUS_UNCONVERGED, SolverOptions
from scenarios.models import CACHE_STRATEGIES, ScenarioConfig, check_seed

SWEEP_FRONTHAUL = 'fronthaul_capacity'
SWEEP_CACHE_SIZE = 'cache_size'
SWEEP_PARAMS = (SWEEP_FRONTHAUL, SWEEP_CACHE_SIZE)

DEFAULT_NUM_DROPS = 20

# a drop whose scenario or solver raised instead of returning a status
STATUS_ERROR = 'error'
DROP_STATUSES = (STATUS_FEASIBLE, STATUS_UNCONVERGED, STATUS_INFEASIBLE, STATUS_ERROR)


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple
    template: ScenarioConfig = field(default_factory=ScenarioConfig)
    strategies: tuple = CACHE_STRATEGIES
    num_drops: int = DEFAULT_NUM_DROPS
    seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        cast = int if self.param == SWEEP_CACHE_SIZE else float
        try:
            values = tuple(cast(v) for v in self.values)
        except (TypeError, ValueError):
            raise ValidationError({'values': f"grid values must be numbers, got {self.values!r}"})
        object.__setattr__(self, 'values', values)
        # repeated strategies collapse, first occurrence wins
        object.__setattr__(self, 'strategies', tuple(dict.fromkeys(self.strategies)))
        self.clean()

    def clean(self):
        errors = {}
        if self.param not in SWEEP_PARAMS:
            errors['param'] = f"expected one of {', '.join(SWEEP_PARAMS)}, got {self.param!r}"
        if not self.values:
            errors['values'] = "the grid needs at least one value"
        elif any(b <= a for a, b in zip(self.values, self.values[1:])):
            errors['values'] = "grid values must be strictly increasing"
        if not self.strategies:
            errors['strategies'] = "at least one caching strategy is required"
        elif any(s not in CACHE_STRATEGIES for s in self.strategies):
            unknown = [s for s in self.strategies if s not in CACHE_STRATEGIES]
            errors['strategies'] = f"unknown caching strategies: {', '.join(map(str, unknown))}"
        if int(self.num_drops) != self.num_drops or self.num_drops < 1:
            errors['num_drops'] = "must be a positive integer"
        if errors:
            raise ValidationError(errors)
        check_seed(self.seed)
        # every grid point has to build a valid scenario (S <= F, positive R_fh, ...)
        for value in self.values:
            self.config_for(self.strategies[0], value)

    @property
    def num_rrhs(self):
        return self.template.num_rrhs

    def config_for(self, strategy, value):
        return self.template.with_changes(cache_strategy=strategy, **{self.param: value})

    def tasks(self):
        """(strategy, value, drop) triples in emission order."""
        return [(strategy, value, drop)
                for strategy in self.strategies
                for value in self.values
                for drop in range(self.num_drops)]


@dataclass(frozen=True)
class DropRecord:
    strategy: str
    value: float
    drop: int
    status: str
    total_power: float = None
    dual_bound: float = None
    gap: float = None
    iterations: int = 0
    cache_hit_ratio: float = None
    error: str = None

    @property
    def succeeded(self):
        """A feasible allocation was recovered, whether or not the dual search converged."""
        return self.total_power is not None


@dataclass(frozen=True)
class SweepPoint:
    """All drops of one (strategy, grid value) pair."""
    strategy: str
    value: float
    records: tuple = ()

    @property
    def n_drops(self):
        return len(self.records)

    @property
    def powers(self):
        # sorted so the sums below do not depend on completion order
        return sorted(r.total_power for r in self.records if r.succeeded)

    @property
    def n_feasible(self):
        return len(self.powers)

    @property
    def n_infeasible(self):
        return sum(1 for r in self.records if r.status == STATUS_INFEASIBLE)

    @property
    def n_unconverged(self):
        return sum(1 for r in self.records if r.status == STATUS_UNCONVERGED)

    @property
    def mean_power(self):
        powers = self.powers
        return math.fsum(powers) / len(powers) if powers else None

    @property
    def stderr(self):
        """Standard error of the mean power; zero for a single drop."""
        powers = self.powers
        if not powers:
            return None
        if len(powers) == 1:
            return 0.0
        mean = math.fsum(powers) / len(powers)
        variance = math.fsum((p - mean) ** 2 for p in powers) / (len(powers) - 1)
        return math.sqrt(variance / len(powers))

    @property
    def mean_gap(self):
        gaps = sorted(r.gap for r in self.records if r.succeeded and r.gap is not None)
        return math.fsum(gaps) / len(gaps) if gaps else None


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    points: tuple = ()

    @property
    def records(self):
        return [record for point in self.points for record in point.records]

    @property
    def success_ratio(self):
        records = self.records
        if not records:
            return 1.0
        return sum(1 for r in records if r.succeeded) / len(records)

    def point(self, strategy, value):
        for point in self.points:
            if point.strategy == strategy and point.value == value:
                return point
        raise KeyError((strategy, value))

    def mean_curve(self, strategy):
        """Mean total power per grid value (NaN where no drop succeeded)."""
        return np.array([
            np.nan if self.point(strategy, v).mean_power is None else self.point(strategy, v).mean_power
            for v in self.spec.values
        ])

    @classmethod
    def from_records(cls, spec, records):
        """Group drop records into points in the spec's strategy-major order."""
        grouped = {}
        for record in records:
            grouped.setdefault((record.strategy, record.value), []).append(record)
        points = []
        for strategy in spec.strategies:
            for value in spec.values:
                found = sorted(grouped.get((strategy, value), ()), key=lambda r: r.drop)
                points.append(SweepPoint(strategy=strategy, value=value, records=tuple(found)))
        return cls(spec=spec, points=tuple(points))
