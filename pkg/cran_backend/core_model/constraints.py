"""
Objective and constraint evaluation for the main power-minimisation problem.
"""

import logging

import numpy as np
from django.core.exceptions import ValidationError

from .models import FeasibilityReport, Violation, check_instance
from .radio import rate_matrix

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6


def total_power(alloc):
    """Objective: sum of p[m, n] over all RRHs and subchannels (Watts)."""
    return alloc.total_power


def served_rates(alloc, chan, cfg):
    """
    served[k, m] = sum_n alpha[m, n] nu[k, n] r[k, n]: the rate RRH m carries
    for user k.
    """
    return rate_matrix(alloc, chan, cfg) @ alloc.rrh_selection.T


def content_loads(alloc, content, chan, cfg):
    """
    Per-(RRH, content) fronthaul rate: the largest rate RRH m sends to any
    user requesting f, or 0 when f is cached at m or nobody requests it.
    """
    served = served_rates(alloc, chan, cfg)
    # (M, K, F): served rate for users requesting f, zero elsewhere
    per_content = served.T[:, :, None] * content.requests[None, :, :]
    return per_content.max(axis=1) * (1 - content.cache)


def fronthaul_loads(alloc, content, chan, cfg):
    return content_loads(alloc, content, chan, cfg).sum(axis=1)


def fronthaul_load(m, alloc, content, chan, cfg):
    """Left side of the fronthaul constraint of RRH m, in bits/s."""
    if not 0 <= m < cfg.num_rrhs:
        raise ValidationError(f"RRH index {m} out of range 0..{cfg.num_rrhs - 1}")
    return float(fronthaul_loads(alloc, content, chan, cfg)[m])


def fronthaul_shares(alloc, content, chan, cfg):
    """Auxiliary shares rho[m, f] = load[m, f] / capacity[m] implied by an allocation."""
    return content_loads(alloc, content, chan, cfg) / cfg.fronthaul_array[:, None]


def check_feasibility(alloc, content, chan, cfg, tol=DEFAULT_TOL):
    """
    Evaluate every constraint of the main problem and list the violated ones.

    Slacks are normalised by their bound, so `tol` is relative. An empty
    violation list certifies the allocation is feasible to that tolerance.
    """
    check_instance(chan, content, cfg)
    alloc.check_against(cfg)

    violations = []
    delivered = rate_matrix(alloc, chan, cfg).sum(axis=1)
    loads = fronthaul_loads(alloc, content, chan, cfg)

    for k, (got, need) in enumerate(zip(delivered, cfg.min_rate)):
        slack = (got - need) / need
        if slack < -tol:
            violations.append(Violation('min_rate', k, float(slack)))

    for m, (load, capacity) in enumerate(zip(loads, cfg.fronthaul_capacity)):
        slack = (capacity - load) / capacity
        if slack < -tol:
            violations.append(Violation('fronthaul', m, float(slack)))

    users_per_sc = alloc.user_assignment.sum(axis=0)
    for n in np.flatnonzero(users_per_sc > 1):
        violations.append(Violation('exclusivity', int(n), float(1 - users_per_sc[n])))

    scale = max(float(np.max(np.abs(alloc.power), initial=0.0)), 1.0)
    for m, n in zip(*np.nonzero(alloc.power < -tol * scale)):
        violations.append(Violation('nonnegative_power', int(m * cfg.num_subchannels + n), float(alloc.power[m, n])))

    idle = users_per_sc == 0
    for n in np.flatnonzero(idle & ((alloc.rrh_selection.sum(axis=0) > 0) | (np.abs(alloc.power).sum(axis=0) > 0))):
        violations.append(Violation('idle_subchannel', int(n), -float(np.abs(alloc.power[:, n]).sum())))

    if violations:
        logger.debug("allocation violates %d constraint(s): %s", len(violations), violations)

    return FeasibilityReport(
        user_rates=delivered,
        fronthaul_loads=loads,
        total_power=alloc.total_power,
        violations=tuple(violations),
    )
