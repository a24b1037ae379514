"""
State carried by the Lagrange dual solver.

lambda has one entry per (m, k) with c[m, f_k] = 0: the fronthaul constraint
of RRH m only prices the content user k asks for, and only when m has to
fetch it. mu has one entry per user. The flat dual vector is [lambda, mu]
with lambda ordered by m, then k.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from django.core.exceptions import ValidationError

from core_model.rate_program import Skeleton

MODE_EXHAUSTIVE = 'exhaustive'
MODE_GREEDY = 'greedy'
MODES = (MODE_EXHAUSTIVE, MODE_GREEDY)

STATUS_CONVERGED = 'converged'
STATUS_UNCONVERGED = 'unconverged'
STATUS_BREAKDOWN = 'breakdown'

STATUS_FEASIBLE = 'feasible'
STATUS_INFEASIBLE = 'infeasible'


@dataclass(frozen=True, eq=False)
class DualIndex:
    """Bijection between flat lambda positions and the (m, k) pairs with c[m, f_k] = 0."""
    pairs: tuple
    num_rrhs: int
    num_users: int

    @classmethod
    def build(cls, content, cfg):
        uncached = content.uncached_for_user
        pairs = tuple((int(m), int(k)) for m, k in zip(*np.nonzero(uncached)))
        return cls(pairs=pairs, num_rrhs=cfg.num_rrhs, num_users=cfg.num_users)

    @property
    def num_lambdas(self):
        return len(self.pairs)

    @property
    def size(self):
        return self.num_lambdas + self.num_users

    @cached_property
    def _positions(self):
        return {pair: i for i, pair in enumerate(self.pairs)}

    def position(self, m, k):
        try:
            return self._positions[(m, k)]
        except KeyError:
            raise ValidationError(f"RRH {m} caches the content of user {k}; there is no lambda for that pair")

    @cached_property
    def rows(self):
        return np.array([m for m, _ in self.pairs], dtype=np.int64)

    @cached_property
    def cols(self):
        return np.array([k for _, k in self.pairs], dtype=np.int64)

    def lambda_matrix(self, lam):
        """Scatter flat lambda into an M x K matrix, zero where the RRH has the content cached."""
        matrix = np.zeros((self.num_rrhs, self.num_users))
        matrix[self.rows, self.cols] = lam
        return matrix

    def gather(self, matrix):
        """Inverse of lambda_matrix for an M x K array."""
        return np.asarray(matrix)[self.rows, self.cols]

    def split(self, vector):
        vector = np.asarray(vector, dtype=float)
        return vector[:self.num_lambdas], vector[self.num_lambdas:]


@dataclass(frozen=True, eq=False)
class DualState:
    lam: np.ndarray
    mu: np.ndarray
    index: DualIndex

    def __post_init__(self):
        for name in ('lam', 'mu'):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        self.clean()

    def clean(self):
        errors = {}
        if self.lam.shape != (self.index.num_lambdas,):
            errors['lam'] = f"expected {self.index.num_lambdas} multipliers, got shape {self.lam.shape}"
        elif np.any(self.lam < 0):
            errors['lam'] = "fronthaul multipliers must be nonnegative"
        if self.mu.shape != (self.index.num_users,):
            errors['mu'] = f"expected {self.index.num_users} multipliers, got shape {self.mu.shape}"
        elif np.any(self.mu < 0):
            errors['mu'] = "rate multipliers must be nonnegative"
        if errors:
            raise ValidationError(errors)

    @classmethod
    def zeros(cls, index):
        return cls(lam=np.zeros(index.num_lambdas), mu=np.zeros(index.num_users), index=index)

    @classmethod
    def from_vector(cls, vector, index):
        lam, mu = index.split(vector)
        return cls(lam=lam, mu=mu, index=index)

    @property
    def vector(self):
        return np.concatenate([self.lam, self.mu])

    @cached_property
    def lambda_matrix(self):
        return self.index.lambda_matrix(self.lam)


@dataclass(frozen=True, eq=False)
class EllipsoidState:
    """Ellipsoid {x : (x - center)^T P^-1 (x - center) <= 1}."""
    center: np.ndarray
    shape: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        self.clean()

    def clean(self):
        n = self.center.shape[0]
        if self.shape.shape != (n, n):
            raise ValidationError({'shape': f"expected a {n} x {n} matrix, got {self.shape.shape}"})
        if not np.allclose(self.shape, self.shape.T, rtol=1e-12, atol=0.0):
            raise ValidationError({'shape': "shape matrix must be symmetric"})
        try:
            np.linalg.cholesky(self.shape)
        except np.linalg.LinAlgError:
            raise ValidationError({'shape': "shape matrix is not positive definite"})

    @classmethod
    def ball(cls, dimension, radius):
        return cls(center=np.zeros(dimension), shape=radius ** 2 * np.eye(dimension))

    def width(self, direction):
        """sqrt(d^T P d): the largest change of d . x over the ellipsoid."""
        return float(np.sqrt(max(direction @ self.shape @ direction, 0.0)))


@dataclass(frozen=True, eq=False)
class SubproblemSolution:
    """
    Minimisers of the Lagrangian at one dual point.

    Per subchannel: `users[n]` (-1 when idle), `selection[:, n]`, `power[:, n]`,
    `values[n]` = L_n and the rate the choice delivers. Globally: rho and the
    split g = g1 + g2 + sum(mu).
    """
    users: np.ndarray
    selection: np.ndarray
    power: np.ndarray
    values: np.ndarray
    rates: np.ndarray
    rho: np.ndarray
    g1: float
    g2: float
    g: float
    candidates: int = 0

    def skeleton(self):
        return Skeleton.from_arrays(self.users, self.selection)

    def assignment_matrix(self, num_users):
        return self.skeleton().assignment_matrix(num_users)

    def served_rates(self, num_users):
        """(K, M) rate RRH m delivers to user k."""
        return (self.assignment_matrix(num_users) * self.rates[None, :]) @ self.selection.T


@dataclass(frozen=True)
class SolverOptions:
    mode: str = MODE_EXHAUSTIVE
    tol: float = 1e-4
    max_iter: int = None
    max_iter_factor: int = 2000
    initial_radius: float = None
    radius_safety: float = 1e3
    gap_floor: float = 1e-6
    recovery_pool: int = 16
    recovery_width: int = 4
    recovery_budget: int = 512
    kkt_tol: float = 1e-8
    feasibility_tol: float = 1e-6

    def __post_init__(self):
        self.clean()

    @classmethod
    def from_mapping(cls, values):
        known = {name: values[name] for name in cls.__dataclass_fields__ if name in values}
        return cls(**known)

    def clean(self):
        errors = {}
        if self.mode not in MODES:
            errors['mode'] = f"expected one of {', '.join(MODES)}, got {self.mode!r}"
        if not self.tol > 0:
            errors['tol'] = "must be positive"
        if self.max_iter is not None and self.max_iter < 1:
            errors['max_iter'] = "must be at least 1"
        if self.initial_radius is not None and not self.initial_radius > 0:
            errors['initial_radius'] = "must be positive"
        if self.recovery_pool < 1:
            errors['recovery_pool'] = "must be at least 1"
        if self.recovery_width < 1:
            errors['recovery_width'] = "must be at least 1"
        if self.recovery_budget < 0:
            errors['recovery_budget'] = "must not be negative"
        if errors:
            raise ValidationError(errors)

    def iteration_cap(self, dimension):
        return self.max_iter if self.max_iter is not None else self.max_iter_factor * max(dimension, 1)

    def stop_threshold(self, value):
        """Uncertainty below which the ellipsoid stops at best value `value`."""
        return self.tol * max(self.gap_floor, abs(value))


@dataclass(frozen=True, eq=False)
class EllipsoidResult:
    status: str
    dual: DualState
    solution: SubproblemSolution
    best_value: float
    iterations: int
    uncertainty: float
    initial_radius: float
    threshold: float = None
    trajectory: tuple = field(default_factory=tuple)
    best_trajectory: tuple = field(default_factory=tuple)
    pool: tuple = field(default_factory=tuple)
    message: str = ''

    @property
    def converged(self):
        return self.status == STATUS_CONVERGED


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    status: str
    allocation: object = None
    report: object = None
    skeleton: Skeleton = None
    total_power: float = None
    kkt_residual: float = None
    certified: bool = False
    candidates_tried: int = 0
    cause: str = None

    @property
    def is_feasible(self):
        return self.status == STATUS_FEASIBLE


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Outcome of one full run: dual bound, recovered primal and their relative gap."""
    status: str
    ellipsoid: EllipsoidResult
    recovery: RecoveryResult
    options: SolverOptions

    @property
    def dual_bound(self):
        return self.ellipsoid.best_value

    @property
    def primal_power(self):
        return self.recovery.total_power if self.recovery.is_feasible else None

    @property
    def gap(self):
        """(primal - dual) / primal, or None without a feasible primal."""
        primal = self.primal_power
        if primal is None or primal <= 0:
            return None
        return (primal - self.dual_bound) / primal

    @property
    def error(self):
        if self.status == STATUS_INFEASIBLE:
            return self.recovery.cause
        if self.status == STATUS_UNCONVERGED:
            return self.ellipsoid.message
        return None
