"""
Maximisation of the concave dual function g over the nonnegative orthant
with the central-cut ellipsoid method.

An iterate outside the orthant gets a feasibility cut on its most negative
coordinate; a feasible iterate gets a cut along its supergradient d, which
keeps every point x with d . (x - center) >= 0. For a feasible center the
optimum can exceed g(center) by at most sqrt(d^T P d), which is the
stopping measure.
"""

import logging
import math

import numpy as np
from django.core.exceptions import ValidationError

from .models import (
    STATUS_BREAKDOWN, STATUS_CONVERGED, STATUS_UNCONVERGED, DualState, EllipsoidResult, EllipsoidState,
    SolverOptions,
)
from .problem import LN2, DualProblem
from .subproblems import evaluate, supergradient

logger = logging.getLogger(__name__)

EXPONENT_CAP = 1000.0


def estimate_initial_radius(problem, safety):
    """
    Radius of the starting ball. For each user it prices the rate multiplier
    that would make a single average subchannel share deliver R_min, then
    scales the largest of those by the R_fh / R_min spread (fronthaul
    multipliers live on the same scale) and a safety factor.
    """
    cfg = problem.cfg
    if cfg.num_users == 0:
        return float(safety)
    b = problem.subchannel_bandwidth
    share = max(1, cfg.num_subchannels // cfg.num_users)
    exponent = np.minimum(cfg.min_rate_array / (b * share), EXPONENT_CAP)
    mean_gain = problem.gains.sum(axis=1).mean(axis=1)
    tiny = np.finfo(float).tiny
    with np.errstate(over='ignore'):
        mu_hat = cfg.min_rate_array * (LN2 / b) * np.exp2(exponent) / np.maximum(mean_gain, tiny)
    spread = max(1.0, float(cfg.fronthaul_array.max() / cfg.min_rate_array.min()))
    radius = safety * float(mu_hat.max()) * spread
    if not math.isfinite(radius) or radius <= 0:
        raise ValidationError({'initial_radius': "could not derive a finite starting radius; set it explicitly"})
    return radius


def cut(center, shape, direction):
    """
    Smallest ellipsoid containing {x in E : direction . (x - center) <= 0}.
    Returns (center, shape), or None when direction^T P direction is not
    positive.
    """
    n = center.shape[0]
    curvature = float(direction @ shape @ direction)
    if not curvature > 0:
        return None
    step = shape @ direction / math.sqrt(curvature)
    if n == 1:
        return center - step / 2.0, shape / 4.0
    center = center - step / (n + 1)
    shape = (n * n / (n * n - 1.0)) * (shape - (2.0 / (n + 1)) * np.outer(step, step))
    return center, (shape + shape.T) / 2.0


class _SkeletonPool:
    """Distinct integer skeletons seen at feasible iterates, ranked by g (earlier first on ties)."""

    def __init__(self, size):
        self.size = size
        self._entries = {}

    def offer(self, solution, iteration):
        skeleton = solution.skeleton()
        previous = self._entries.get(skeleton)
        if previous is None or solution.g > previous[0]:
            self._entries[skeleton] = (solution.g, iteration if previous is None else previous[1])
        if len(self._entries) > 4 * self.size:
            self._entries = dict(self._ranked()[:self.size])

    def _ranked(self):
        return sorted(self._entries.items(), key=lambda item: (-item[1][0], item[1][1]))

    def skeletons(self):
        return tuple(skeleton for skeleton, _ in self._ranked()[:self.size])


def ellipsoid_solve(chan, content, cfg, options=None, problem=None):
    """Run the ellipsoid method on the dual of one instance; returns an EllipsoidResult."""
    options = options or SolverOptions()
    problem = problem or DualProblem(chan, content, cfg)
    index = problem.index
    dim = index.size
    radius = options.initial_radius or estimate_initial_radius(problem, options.radius_safety)
    cap = options.iteration_cap(dim)

    center = np.zeros(dim)
    shape = radius ** 2 * np.eye(dim)
    pool = _SkeletonPool(options.recovery_pool)
    trajectory, best_trajectory = [], []
    best_g, best_dual, best_solution = -math.inf, None, None
    uncertainty = math.inf
    status, message = STATUS_UNCONVERGED, f"no convergence within {cap} iterations"

    logger.info("ellipsoid start: %d multipliers (%d fronthaul, %d rate), radius %.3e, mode %s, cap %d",
                dim, index.num_lambdas, cfg.num_users, radius, options.mode, cap)

    iteration = 0
    for iteration in range(1, cap + 1):
        if dim and iteration % dim == 0:
            try:
                EllipsoidState(center=center, shape=shape, iteration=iteration)
            except ValidationError:
                status, message = STATUS_BREAKDOWN, f"shape matrix lost definiteness at iteration {iteration}"
                break

        if dim and center.min() < 0:
            direction = np.zeros(dim)
            direction[int(np.argmin(center))] = -1.0
        else:
            dual = DualState.from_vector(np.maximum(center, 0.0), index)
            g, solution = evaluate(problem, dual, options.mode)
            d = supergradient(problem, dual, solution)
            trajectory.append(g)
            pool.offer(solution, iteration)
            if g > best_g:
                best_g, best_dual, best_solution = g, dual, solution
            best_trajectory.append(best_g)

            if not np.any(d):
                uncertainty = 0.0
                status, message = STATUS_CONVERGED, "zero supergradient"
                break
            uncertainty = math.sqrt(max(float(d @ shape @ d), 0.0))
            if uncertainty <= options.stop_threshold(best_g):
                status, message = STATUS_CONVERGED, ''
                break
            direction = -d

        updated = cut(center, shape, direction)
        if updated is None:
            status, message = STATUS_BREAKDOWN, f"degenerate cut at iteration {iteration}"
            break
        center, shape = updated

        if iteration % 500 == 0:
            logger.debug("iteration %d: best g %.6e, uncertainty %.3e", iteration, best_g, uncertainty)

    if best_solution is None:
        best_dual = DualState.zeros(index)
        best_g, best_solution = evaluate(problem, best_dual, options.mode)
        pool.offer(best_solution, 0)

    if status == STATUS_CONVERGED:
        logger.info("ellipsoid converged after %d iterations: g = %.6e", iteration, best_g)
    else:
        logger.warning("ellipsoid stopped (%s) after %d iterations: %s; best g = %.6e",
                       status, iteration, message, best_g)

    return EllipsoidResult(
        status=status,
        dual=best_dual,
        solution=best_solution,
        best_value=best_g,
        iterations=iteration,
        uncertainty=uncertainty,
        initial_radius=radius,
        threshold=options.stop_threshold(best_g),
        trajectory=tuple(trajectory),
        best_trajectory=tuple(best_trajectory),
        pool=pool.skeletons(),
        message=message,
    )
