"""
Exact global minimum of the total transmit power for tiny instances.

Every canonical skeleton (idle subchannel, or one user with a nonempty RRH
set) is a convex rate program once fixed. Skeletons are visited in order of
their water-filling lower bound, which ignores fronthaul and so never
exceeds the restricted optimum; the search stops once that bound passes the
incumbent.
"""

import logging
import sys

from tqdm import tqdm

from core_model.models import check_instance
from core_model.rate_program import DEFAULT_KKT_TOL, evaluate_skeleton, skeleton_lower_bound, solve_rate_program
from dual_solver.runner import solve_instance

from .enumeration import enumerate_skeletons
from .models import STATUS_INFEASIBLE, STATUS_OPTIMAL, OracleCheck, OracleResult, TinyInstanceGuard

logger = logging.getLogger(__name__)

TIE_TOL = 1e-10


def convex_rate_program(skeleton, chan, content, cfg, kkt_tol=DEFAULT_KKT_TOL):
    return solve_rate_program(skeleton, chan, content, cfg, kkt_tol=kkt_tol)


def brute_force_optimum(chan, content, cfg, guard=None, kkt_tol=DEFAULT_KKT_TOL, tol=1e-6, progress=False):
    """
    Minimum-power feasible allocation over all skeletons. Restrictions within
    a relative 1e-10 of each other go to the skeleton with the smaller sort_key.
    """
    check_instance(chan, content, cfg)
    guard = guard or TinyInstanceGuard()
    total = guard.check(cfg)

    ranked = []
    for skeleton in enumerate_skeletons(cfg, guard=guard, canonical=True):
        bound = skeleton_lower_bound(skeleton, chan, content, cfg)
        if bound is not None:
            ranked.append((bound, skeleton.sort_key(), skeleton))
    ranked.sort(key=lambda item: item[:2])
    logger.info("oracle: %d skeletons, %d canonical ones serve every user", total, len(ranked))

    best = None
    evaluated = 0
    first_cause = None
    for bound, key, skeleton in tqdm(ranked, desc="skeletons", file=sys.stderr, disable=not progress):
        if best is not None and bound > best[0].total_power * (1 + TIE_TOL):
            break
        evaluated += 1
        result, alloc, report = evaluate_skeleton(skeleton, chan, content, cfg, kkt_tol=kkt_tol, tol=tol)
        if alloc is None or not report.is_feasible:
            first_cause = first_cause or result.cause
            continue
        if best is None:
            best = (result, alloc, report, key)
            continue
        incumbent = best[0].total_power
        if result.total_power < incumbent * (1 - TIE_TOL) or (
                result.total_power <= incumbent * (1 + TIE_TOL) and key < best[3]):
            best = (result, alloc, report, key)

    pruned = len(ranked) - evaluated
    if best is None:
        cause = "no skeleton admits a feasible allocation"
        if first_cause:
            cause = f"{cause} (first failure: {first_cause})"
        logger.info("oracle: instance infeasible after %d restriction(s)", evaluated)
        return OracleResult(status=STATUS_INFEASIBLE, skeletons_total=total, evaluated=evaluated, pruned=pruned,
                            cause=cause)

    result, alloc, report, _ = best
    if not result.certified:
        logger.warning("oracle optimum has KKT residual %.3e", result.kkt_residual)
    logger.info("oracle: optimum %.6e W after %d restriction(s), %d pruned", result.total_power, evaluated, pruned)
    return OracleResult(
        status=STATUS_OPTIMAL,
        skeletons_total=total,
        evaluated=evaluated,
        pruned=pruned,
        skeleton=result.skeleton,
        allocation=alloc,
        report=report,
        total_power=result.total_power,
        kkt_residual=result.kkt_residual,
    )


def compare_with_dual(chan, content, cfg, options=None, guard=None, progress=False):
    """Run the dual solver and the oracle on one instance; the guard is checked before either starts."""
    guard = guard or TinyInstanceGuard()
    guard.check(cfg)
    report = solve_instance(chan, content, cfg, options)
    oracle = brute_force_optimum(chan, content, cfg, guard=guard, kkt_tol=report.options.kkt_tol,
                                 tol=report.options.feasibility_tol, progress=progress)
    check = OracleCheck(oracle=oracle, solve=report)
    if not check.weak_duality_holds():
        logger.error("dual bound %.9e W exceeds the oracle optimum %.9e W", report.dual_bound, oracle.total_power)
    return check
