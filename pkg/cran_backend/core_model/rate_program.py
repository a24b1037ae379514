"""
Residual problem once the integer decisions are fixed.

A *skeleton* fixes, for every subchannel, the served user (or none) and the
set of transmitting RRHs. What is left is convex in the per-subchannel rates:
the power needed on subchannel n is (2^(N r_n / B) - 1) / G_n, the minimum
rate constraints are linear and the fronthaul constraints become linear once
every (RRH, content) pair gets an auxiliary load variable.

Both the dual solver (primal recovery) and the brute-force oracle solve this
restriction, so it lives with the system model.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, minimize, nnls

from .constraints import check_feasibility, fronthaul_shares
from .models import Allocation
from .radio import min_power_for_rate

logger = logging.getLogger(__name__)

DEFAULT_KKT_TOL = 1e-8
ACTIVE_TOL = 1e-7
LN2 = np.log(2.0)


@dataclass(frozen=True)
class Skeleton:
    """Per subchannel: served user (-1 when idle) and a bitmask of selected RRHs."""
    users: tuple
    masks: tuple

    def __post_init__(self):
        object.__setattr__(self, 'users', tuple(int(u) for u in self.users))
        object.__setattr__(self, 'masks', tuple(int(b) for b in self.masks))

    @classmethod
    def from_arrays(cls, users, selection):
        """`users` holds one user index (or -1) per SC; `selection` is the M x N alpha matrix."""
        selection = np.asarray(selection, dtype=np.int64)
        weights = 1 << np.arange(selection.shape[0], dtype=np.int64)
        return cls(users=tuple(users), masks=tuple(weights @ selection))

    @property
    def num_subchannels(self):
        return len(self.users)

    def sort_key(self):
        """Lexicographic order over subchannels; an idle subchannel sorts first."""
        return tuple((u + 1, b) for u, b in zip(self.users, self.masks))

    def canonical(self):
        """Same restriction with every user-without-RRH subchannel marked idle."""
        pairs = [(u, b) if u >= 0 and b else (-1, 0) for u, b in zip(self.users, self.masks)]
        return Skeleton(users=[u for u, _ in pairs], masks=[b for _, b in pairs])

    def is_canonical(self):
        return all((u >= 0) == (b != 0) for u, b in zip(self.users, self.masks))

    def selection_matrix(self, num_rrhs):
        masks = np.asarray(self.masks, dtype=np.int64)
        return ((masks[None, :] >> np.arange(num_rrhs)[:, None]) & 1).astype(np.int8)

    def assignment_matrix(self, num_users):
        nu = np.zeros((num_users, self.num_subchannels), dtype=np.int8)
        for n, u in enumerate(self.users):
            if u >= 0:
                nu[u, n] = 1
        return nu


@dataclass(frozen=True, eq=False)
class RateProgramResult:
    status: str
    skeleton: Skeleton
    rates: np.ndarray = None
    power: np.ndarray = None
    total_power: float = None
    kkt_residual: float = None
    certified: bool = False
    method: str = None
    cause: str = None

    @property
    def is_optimal(self):
        return self.status == 'optimal'


def rate_water_fill(gains, target):
    """
    Split `target` bits/s/Hz over subchannels with effective gains G_n so that
    sum_n (2^x_n - 1) / G_n is minimal: x_n = [log2 G_n + level]^+.
    """
    gains = np.asarray(gains, dtype=float)
    x = np.zeros_like(gains)
    if target <= 0 or gains.size == 0:
        return x
    order = np.argsort(-gains, kind='stable')
    logs = np.log2(gains[order])
    for count in range(order.size, 0, -1):
        level = (target - logs[:count].sum()) / count
        if logs[count - 1] + level >= 0:
            x[order[:count]] = logs[:count] + level
            break
    return x


def water_fill_power(gains, x):
    return float(np.sum(np.expm1(LN2 * x) / gains))


class _Restriction:
    """Skeleton-specific data in spectral-efficiency units (bits/s/Hz per SC)."""

    def __init__(self, skeleton, chan, content, cfg):
        self.cfg = cfg
        self.skeleton = skeleton
        users = np.asarray(skeleton.users)
        self.selection = skeleton.selection_matrix(cfg.num_rrhs)
        gains = chan.power_gains / cfg.noise_power
        effective = np.zeros(cfg.num_subchannels)
        for n in np.flatnonzero(users >= 0):
            effective[n] = gains[users[n], :, n] @ self.selection[:, n]
        self.gains = effective
        self.active = (users >= 0) & (effective > 0)
        self.users = np.where(self.active, users, -1)
        self.targets = cfg.min_rate_array / cfg.subchannel_bandwidth
        self.capacity = cfg.fronthaul_array / cfg.subchannel_bandwidth
        self.content = content

    def lower_bound(self):
        """Exact optimum with the fronthaul constraints dropped, or None if a user has no subchannel."""
        x = np.zeros(self.cfg.num_subchannels)
        for k in range(self.cfg.num_users):
            idx = self.users == k
            if not idx.any():
                return None, None
            x[idx] = rate_water_fill(self.gains[idx], self.targets[k])
        return water_fill_power(self.gains[self.active], x[self.active]), x

    def loads(self, x):
        served = np.zeros((self.cfg.num_users, self.cfg.num_rrhs))
        for k in range(self.cfg.num_users):
            idx = self.users == k
            served[k] = self.selection[:, idx] @ x[idx]
        per_content = served.T[:, :, None] * self.content.requests[None, :, :]
        return (per_content.max(axis=1) * (1 - self.content.cache)).sum(axis=1)


def _linear_system(restriction):
    """
    Variables z = [x over active SCs, t over fronthaul pairs (m, f)].
    Returns (A_ub, b_ub, lower, upper, number of rate variables).
    """
    cfg = restriction.cfg
    active = np.flatnonzero(restriction.active)
    position = {n: i for i, n in enumerate(active)}
    requested = restriction.content.requested

    pairs = []
    for m in range(cfg.num_rrhs):
        for k in range(cfg.num_users):
            f = int(requested[k])
            if restriction.content.cache[m, f]:
                continue
            if any(restriction.selection[m, n] for n in active if restriction.users[n] == k) and (m, f) not in pairs:
                pairs.append((m, f))
    pair_index = {pair: len(active) + i for i, pair in enumerate(pairs)}
    size = len(active) + len(pairs)

    rows, rhs = [], []
    for k in range(cfg.num_users):
        row = np.zeros(size)
        for n in active:
            if restriction.users[n] == k:
                row[position[n]] = -1.0
        rows.append(row)
        rhs.append(-restriction.targets[k])
    for m in range(cfg.num_rrhs):
        for k in range(cfg.num_users):
            pair = (m, int(requested[k]))
            if pair not in pair_index:
                continue
            row = np.zeros(size)
            for n in active:
                if restriction.users[n] == k and restriction.selection[m, n]:
                    row[position[n]] = 1.0
            if not row.any():
                continue
            row[pair_index[pair]] = -1.0
            rows.append(row)
            rhs.append(0.0)
        row = np.zeros(size)
        for (mm, _), i in pair_index.items():
            if mm == m:
                row[i] = 1.0
        if row.any():
            rows.append(row)
            rhs.append(restriction.capacity[m])

    lower = np.zeros(size)
    upper = np.concatenate([
        restriction.targets[restriction.users[active]],
        [restriction.capacity[m] for m, _ in pairs],
    ])
    return np.array(rows), np.array(rhs), lower, upper, len(active)


def _kkt_residual(z, grad, A, b, lower, upper):
    """Relative stationarity residual over the detected active set, plus primal infeasibility."""
    scale_b = np.maximum(np.abs(b), 1.0)
    columns = [A[i] for i in np.flatnonzero(b - A @ z <= ACTIVE_TOL * scale_b)]
    for j in range(z.size):
        span = max(upper[j] - lower[j], 1.0)
        if z[j] - lower[j] <= ACTIVE_TOL * span:
            columns.append(-np.eye(z.size)[j])
        elif upper[j] - z[j] <= ACTIVE_TOL * span:
            columns.append(np.eye(z.size)[j])
    grad_norm = max(np.linalg.norm(grad), np.finfo(float).tiny)
    if columns:
        _, residual = nnls(np.array(columns).T, -grad)
    else:
        residual = np.linalg.norm(grad)
    infeasibility = float(np.max(np.maximum(A @ z - b, 0.0) / scale_b, initial=0.0))
    return max(residual / grad_norm, infeasibility)


def _solve_general(restriction, kkt_tol):
    A, b, lower, upper, num_rates = _linear_system(restriction)
    feasible = linprog(np.zeros(A.shape[1]), A_ub=A, b_ub=b, bounds=list(zip(lower, upper)), method='highs')
    if feasible.status == 2:
        return None, None, "fronthaul capacity cannot carry the minimum rates on this skeleton"
    if feasible.status != 0:
        return None, None, f"feasibility LP failed: {feasible.message}"

    gains = restriction.gains[restriction.active]
    weights = gains.max() / gains

    def objective(z):
        return float(np.sum(weights * np.expm1(LN2 * z[:num_rates])))

    def gradient(z):
        grad = np.zeros_like(z)
        grad[:num_rates] = weights * LN2 * np.exp2(z[:num_rates])
        return grad

    def hessian(z):
        return np.diag(np.concatenate([weights * LN2 ** 2 * np.exp2(z[:num_rates]), np.zeros(z.size - num_rates)]))

    bounds = Bounds(lower, upper)
    result = minimize(
        objective, feasible.x, jac=gradient, bounds=bounds, method='SLSQP',
        constraints=[{'type': 'ineq', 'fun': lambda z: b - A @ z, 'jac': lambda z: -A}],
        options={'ftol': 1e-15, 'maxiter': 1000},
    )
    z = np.clip(result.x, lower, upper)
    residual = _kkt_residual(z, gradient(z), A, b, lower, upper)

    if residual > kkt_tol:
        polished = minimize(
            objective, z, jac=gradient, hess=hessian, bounds=bounds, method='trust-constr',
            constraints=[LinearConstraint(A, -np.inf, b)],
            options={'gtol': 1e-13, 'xtol': 1e-15, 'maxiter': 3000},
        )
        candidate = np.clip(polished.x, lower, upper)
        candidate_residual = _kkt_residual(candidate, gradient(candidate), A, b, lower, upper)
        if candidate_residual < residual:
            z, residual = candidate, candidate_residual

    x = np.zeros(restriction.cfg.num_subchannels)
    x[restriction.active] = z[:num_rates]
    return x, residual, None


def solve_rate_program(skeleton, chan, content, cfg, kkt_tol=DEFAULT_KKT_TOL):
    """
    Minimum-power rates and powers for a fixed skeleton.

    Returns status 'optimal' with rates (bits/s per SC), the M x N power
    matrix and the KKT residual of the solution, or status 'infeasible' with
    the cause when no rate vector satisfies the constraints.
    """
    restriction = _Restriction(skeleton, chan, content, cfg)
    bound, x = restriction.lower_bound()
    if bound is None:
        missing = [k for k in range(cfg.num_users) if not np.any(restriction.users == k)]
        return RateProgramResult(
            status='infeasible', skeleton=skeleton,
            cause=f"user {missing[0]} has no usable subchannel")

    method, residual = 'water_fill', 0.0
    if np.any(restriction.loads(x) > restriction.capacity * (1 + 1e-12)):
        x, residual, cause = _solve_general(restriction, kkt_tol)
        if x is None:
            return RateProgramResult(status='infeasible', skeleton=skeleton, cause=cause)
        method = 'slsqp'

    certified = residual <= kkt_tol
    if not certified:
        logger.warning("rate program KKT residual %.3e above tolerance %.1e", residual, kkt_tol)

    rates = x * cfg.subchannel_bandwidth
    power = np.zeros((cfg.num_rrhs, cfg.num_subchannels))
    for n in np.flatnonzero(restriction.active & (rates > 0)):
        k = restriction.users[n]
        power[:, n] = min_power_for_rate(chan.coefficients[k, :, n], restriction.selection[:, n], rates[n], cfg)

    return RateProgramResult(
        status='optimal', skeleton=skeleton, rates=rates, power=power,
        total_power=float(power.sum()), kkt_residual=float(residual),
        certified=certified, method=method,
    )


def skeleton_lower_bound(skeleton, chan, content, cfg):
    """Minimum power of the restriction with fronthaul ignored; None when some user has no subchannel."""
    bound, _ = _Restriction(skeleton, chan, content, cfg).lower_bound()
    return bound


def allocation_from_program(result, content, chan, cfg):
    """Turn an optimal restriction into an Allocation; zero-rate subchannels become idle."""
    serving = result.rates > 0
    users = np.where(serving, result.skeleton.users, -1)
    nu = Skeleton(users=users, masks=result.skeleton.masks).assignment_matrix(cfg.num_users)
    alpha = result.skeleton.selection_matrix(cfg.num_rrhs) * serving[None, :]
    draft = Allocation(
        user_assignment=nu, rrh_selection=alpha, power=result.power,
        fronthaul_share=np.zeros((cfg.num_rrhs, cfg.num_contents)),
    )
    return Allocation(
        user_assignment=nu, rrh_selection=alpha, power=result.power,
        fronthaul_share=fronthaul_shares(draft, content, chan, cfg),
    )


def evaluate_skeleton(skeleton, chan, content, cfg, kkt_tol=DEFAULT_KKT_TOL, tol=1e-6):
    """Solve a restriction and, when optimal, return (result, allocation, feasibility report)."""
    result = solve_rate_program(skeleton, chan, content, cfg, kkt_tol=kkt_tol)
    if not result.is_optimal:
        return result, None, None
    alloc = allocation_from_program(result, content, chan, cfg)
    return result, alloc, check_feasibility(alloc, content, chan, cfg, tol=tol)
