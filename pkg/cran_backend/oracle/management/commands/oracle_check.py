import logging

from django.conf import settings
from django.core.management.base import CommandError

from dual_solver.models import MODES, SolverOptions
from oracle.models import GuardRefused, TinyInstanceGuard
from oracle.serializers import dump_check
from oracle.solver import compare_with_dual
from scenarios.generators import generate_scenario
from scenarios.serializers import load_scenario
from utils import exit_codes
from utils.commands import CranCommand

logger = logging.getLogger(__name__)


def _percent(value):
    return "n/a" if value is None else f"{100 * value:.4f}%"


class Command(CranCommand):
    help = ("Solve a tiny instance with both the dual method and brute-force enumeration and report the gaps. "
            "Instances above the enumeration limit are refused.")

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--scenario', help="scenario file written by `gen` ('-' for stdin)")
        parser.add_argument('--drop', type=int, default=0, help="drop index when generating the instance")
        parser.add_argument('--mode', choices=MODES, help="RRH selection search of the dual solver")
        parser.add_argument('--limit', type=int, help="largest skeleton count to enumerate "
                                                      "(default CRAN_ORACLE_LIMIT)")
        parser.add_argument('--output', '-o', default='-', help="comparison report path ('-' for stdout)")

    def run(self, **options):
        run_config = self.load_config(options)
        solver_options = SolverOptions.from_mapping(self.solver_settings(run_config, options.get('mode')))
        guard = TinyInstanceGuard(limit=options.get('limit') or settings.CRAN_ORACLE_LIMIT)

        if options.get('scenario'):
            scenario = load_scenario(self.read_bytes(options['scenario']))
        else:
            scenario = generate_scenario(run_config.scenario, run_config.seed, options['drop'])

        try:
            check = compare_with_dual(scenario.channel, scenario.content, scenario.system, solver_options,
                                      guard=guard, progress=int(options.get('verbosity', 1)) >= 2)
        except GuardRefused as exc:
            raise CommandError(f"refused: {exc.message}", returncode=exit_codes.GUARD_REFUSED) from exc

        self.write_bytes(options['output'], dump_check(check))
        out = self.stderr if options['output'] == '-' else self.stdout
        solve, oracle = check.solve, check.oracle

        primal = "none" if solve.primal_power is None else f"{solve.primal_power:.6e} W"
        out.write(f"dual solver: {solve.status}, primal {primal}, dual bound {solve.dual_bound:.6e} W")
        if not oracle.is_feasible:
            out.write(self.style.ERROR(f"oracle: {oracle.cause}"))
            raise CommandError("instance is infeasible", returncode=exit_codes.INFEASIBLE)

        out.write(f"oracle: optimum {oracle.total_power:.6e} W "
                  f"({oracle.evaluated} of {oracle.skeletons_total} skeletons solved, {oracle.pruned} pruned)")
        style = self.style.SUCCESS if check.weak_duality_holds() else self.style.ERROR
        out.write(style(f"primal gap {_percent(check.primal_gap)}, dual gap {_percent(check.dual_gap)}"))
