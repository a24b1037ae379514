"""
Primal recovery: fix the integer part (user per subchannel, RRH selection)
of dual minimisers and solve the remaining convex rate problem exactly.

A single dual minimiser is often unusable. Near the dual optimum several
(user, selection) choices on a subchannel have almost the same L_n and the
primal optimum mixes them; on a flat channel every subchannel even picks the
same user. So after the pooled minimisers, recovery also tries combinations
of the cheapest choices per subchannel at the best multipliers and then
improves the best feasible skeleton one subchannel at a time.
"""

import heapq
import logging
import math

import numpy as np

from core_model.rate_program import DEFAULT_KKT_TOL, Skeleton, evaluate_skeleton, skeleton_lower_bound

from .models import STATUS_FEASIBLE, STATUS_INFEASIBLE, RecoveryResult, SubproblemSolution
from .subproblems import lagrangian_table

logger = logging.getLogger(__name__)

# combinations scanned per budgeted skeleton before giving up on finding covering ones
SCAN_FACTOR = 4


def _as_skeletons(candidates):
    if isinstance(candidates, (SubproblemSolution, Skeleton)):
        candidates = [candidates]
    skeletons = []
    for candidate in candidates:
        skeleton = candidate.skeleton() if isinstance(candidate, SubproblemSolution) else candidate
        if skeleton not in skeletons:
            skeletons.append(skeleton)
    return skeletons


class _Search:
    """
    Incumbent bookkeeping. Every distinct skeleton is looked at once; once a
    feasible one is known, others are only solved when their fronthaul-free
    lower bound beats it.
    """

    def __init__(self, chan, content, cfg, kkt_tol, tol):
        self.chan = chan
        self.content = content
        self.cfg = cfg
        self.kkt_tol = kkt_tol
        self.tol = tol
        self.seen = set()
        self.best = None
        self.first_cause = None

    @property
    def tried(self):
        return len(self.seen)

    def offer(self, skeleton):
        """Evaluate `skeleton`; True when it becomes the incumbent."""
        if skeleton in self.seen:
            return False
        position = len(self.seen)
        self.seen.add(skeleton)

        if self.best is not None:
            bound = skeleton_lower_bound(skeleton, self.chan, self.content, self.cfg)
            if bound is None or bound >= self.best[0].total_power:
                return False

        result, alloc, report = evaluate_skeleton(skeleton, self.chan, self.content, self.cfg,
                                                  kkt_tol=self.kkt_tol, tol=self.tol)
        if alloc is None:
            logger.debug("candidate %d infeasible: %s", position, result.cause)
            self.first_cause = self.first_cause or result.cause
            return False
        if not report.is_feasible:
            cause = f"recovered allocation violates {report.violations[0].kind} constraint"
            logger.warning("candidate %d: %s", position, cause)
            self.first_cause = self.first_cause or cause
            return False
        if self.best is None or result.total_power < self.best[0].total_power:
            self.best = (result, alloc, report, skeleton)
            return True
        return False

    def outcome(self):
        if self.best is None:
            return RecoveryResult(
                status=STATUS_INFEASIBLE,
                candidates_tried=self.tried,
                cause=self.first_cause or "no candidate skeleton",
            )
        result, alloc, report, skeleton = self.best
        logger.info("recovered %.6e W from %d candidate skeleton(s)", result.total_power, self.tried)
        return RecoveryResult(
            status=STATUS_FEASIBLE,
            allocation=alloc,
            report=report,
            skeleton=skeleton,
            total_power=result.total_power,
            kkt_residual=result.kkt_residual,
            certified=result.certified,
            candidates_tried=self.tried,
        )


def primal_recovery(candidates, chan, content, cfg, kkt_tol=DEFAULT_KKT_TOL, tol=1e-6):
    """
    Evaluate each candidate skeleton (a SubproblemSolution, a Skeleton or a
    sequence of them) and keep the feasible one with the least power; the
    earlier candidate wins a tie. When none is feasible the cause reported is
    the first candidate's.
    """
    search = _Search(chan, content, cfg, kkt_tol, tol)
    for skeleton in _as_skeletons(candidates):
        search.offer(skeleton)
    return search.outcome()


def subchannel_choices(problem, dual, width):
    """
    Per subchannel, the `width` cheapest (user, mask, L_n) choices at `dual`
    plus the cheapest choice of every user not among them, in L_n order.
    Idle counts as a choice with L_n = 0; ties keep idle first, then the lower
    user and selection index.
    """
    cfg = problem.cfg
    subchannels = np.arange(cfg.num_subchannels)
    _, _, values = lagrangian_table(problem, dual, subchannels)
    num_users, num_subsets, _ = values.shape
    masks = problem.selections.astype(np.int64) @ (1 << np.arange(cfg.num_rrhs, dtype=np.int64))
    table = np.vstack([np.zeros((1, subchannels.size)), values.reshape(num_users * num_subsets, -1)])
    order = np.argsort(table, axis=0, kind='stable')

    choices = []
    for n in subchannels:
        row, users = [], set()
        for flat in order[:, n]:
            if len(row) >= width and len(users) == num_users:
                break
            user, subset = (-1, 0) if flat == 0 else divmod(int(flat) - 1, num_subsets)
            if len(row) < width or (user >= 0 and user not in users):
                row.append((user, int(masks[subset]) if user >= 0 else 0, float(table[flat, n])))
                if user >= 0:
                    users.add(user)
        choices.append(tuple(row))
    return choices


def cheapest_combinations(choices):
    """
    Index vectors into the per-subchannel choice lists, in nondecreasing order
    of total L. A vector is pushed only from the one with its last nonzero
    entry lowered by one, so none repeats.
    """
    costs = [[value for _, _, value in row] for row in choices]
    start = (0,) * len(costs)
    heap = [(math.fsum(row[0] for row in costs), start, 0)]
    while heap:
        total, combo, last = heapq.heappop(heap)
        yield combo
        for n in range(last, len(costs)):
            step = combo[n] + 1
            if step < len(costs[n]):
                heapq.heappush(heap, (total - costs[n][combo[n]] + costs[n][step],
                                      combo[:n] + (step,) + combo[n + 1:], n))


def _skeleton(choices, combo):
    picked = [choices[n][i] for n, i in enumerate(combo)]
    return Skeleton(users=[user for user, _, _ in picked], masks=[mask for _, mask, _ in picked])


def _combine(search, choices, num_users, budget):
    """Offer the cheapest combinations that give every user a subchannel."""
    limit = search.tried + budget
    for scanned, combo in enumerate(cheapest_combinations(choices)):
        if search.tried >= limit or scanned >= SCAN_FACTOR * budget:
            break
        skeleton = _skeleton(choices, combo)
        if len(set(skeleton.users) - {-1}) == num_users:
            search.offer(skeleton)


def _improve(search, choices, budget):
    """First-improvement descent: change one subchannel of the incumbent at a time."""
    limit = search.tried + budget
    improved = True
    while improved and search.tried < limit:
        improved = False
        current = search.best[3]
        for n, row in enumerate(choices):
            for user, mask, _ in row:
                if (user, mask) == (current.users[n], current.masks[n]):
                    continue
                users, masks = list(current.users), list(current.masks)
                users[n], masks[n] = user, mask
                improved = search.offer(Skeleton(users=users, masks=masks))
                if improved or search.tried >= limit:
                    break
            if improved or search.tried >= limit:
                break


def recover(problem, ellipsoid, options):
    """
    Recovery after a dual solve: the pooled skeletons first, then up to half
    of `options.recovery_budget` covering combinations of the
    `options.recovery_width` cheapest choices per subchannel at the best
    multipliers, then single-subchannel improvement of the incumbent over a
    wider choice list with what is left of the budget.
    """
    search = _Search(problem.chan, problem.content, problem.cfg, options.kkt_tol, options.feasibility_tol)
    for skeleton in _as_skeletons(ellipsoid.pool or ellipsoid.solution):
        search.offer(skeleton)

    budget = options.recovery_budget
    if budget and ellipsoid.dual is not None:
        pooled = search.tried
        choices = subchannel_choices(problem, ellipsoid.dual, options.recovery_width)
        _combine(search, choices, problem.cfg.num_users, budget // 2)
        if search.best is not None:
            wider = subchannel_choices(problem, ellipsoid.dual, 4 * options.recovery_width)
            _improve(search, wider, budget - (search.tried - pooled))
        logger.debug("recovery examined %d skeleton(s) beyond the pool of %d", search.tried - pooled, pooled)
    return search.outcome()
