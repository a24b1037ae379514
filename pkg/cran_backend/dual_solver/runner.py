import logging

from .ellipsoid import ellipsoid_solve
from .models import STATUS_FEASIBLE, STATUS_INFEASIBLE, STATUS_UNCONVERGED, SolveReport, SolverOptions
from .problem import DualProblem
from .recovery import recover

logger = logging.getLogger(__name__)


def solve_instance(chan, content, cfg, options=None):
    """
    Dual maximisation followed by primal recovery from the dual minimisers.

    The report's status is 'infeasible' when no candidate skeleton admits a
    feasible rate vector, 'unconverged' when the ellipsoid stopped early (the
    recovered allocation is still attached), and 'feasible' otherwise.
    """
    options = options or SolverOptions()
    problem = DualProblem(chan, content, cfg)
    ellipsoid = ellipsoid_solve(chan, content, cfg, options=options, problem=problem)
    recovery = recover(problem, ellipsoid, options)

    if not recovery.is_feasible:
        status = STATUS_INFEASIBLE
    elif not ellipsoid.converged:
        status = STATUS_UNCONVERGED
    else:
        status = STATUS_FEASIBLE

    report = SolveReport(status=status, ellipsoid=ellipsoid, recovery=recovery, options=options)
    if report.gap is not None:
        logger.info("primal %.6e W, dual bound %.6e W, relative gap %.3e",
                    report.primal_power, report.dual_bound, report.gap)
    return report


def solve_scenario(scenario, options=None):
    return solve_instance(scenario.channel, scenario.content, scenario.system, options)
