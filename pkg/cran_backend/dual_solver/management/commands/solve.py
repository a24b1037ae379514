import logging

from django.core.management.base import CommandError

from dual_solver.models import MODES, STATUS_INFEASIBLE, STATUS_UNCONVERGED, SolverOptions
from dual_solver.runner import solve_scenario
from dual_solver.serializers import STOPPING_RULE, dump_report
from scenarios.generators import generate_scenario
from scenarios.serializers import load_scenario
from utils import exit_codes
from utils.commands import CranCommand
from utils.units import RATE, format_quantity

logger = logging.getLogger(__name__)


class Command(CranCommand):
    help = ("Solve one instance with the Lagrange dual method and primal recovery, and write the solver report. "
            "Without --scenario the instance is generated from the run configuration.")

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--scenario', help="scenario file written by `gen` ('-' for stdin)")
        parser.add_argument('--drop', type=int, default=0, help="drop index when generating the instance")
        parser.add_argument('--mode', choices=MODES, help="RRH selection search, overrides solver.mode")
        parser.add_argument('--output', '-o', default='-', help="solver report path ('-' for stdout)")

    def run(self, **options):
        run_config = self.load_config(options)
        solver_options = SolverOptions.from_mapping(self.solver_settings(run_config, options.get('mode')))

        if options.get('scenario'):
            scenario = load_scenario(self.read_bytes(options['scenario']))
        else:
            scenario = generate_scenario(run_config.scenario, run_config.seed, options['drop'])

        report = solve_scenario(scenario, solver_options)
        self.write_bytes(options['output'], dump_report(report))
        self.print_summary(report, scenario, stderr=options['output'] == '-')

        if report.status == STATUS_INFEASIBLE:
            raise CommandError(f"infeasible: {report.error}", returncode=exit_codes.INFEASIBLE)
        if report.status == STATUS_UNCONVERGED:
            raise CommandError(f"unconverged: {report.error}", returncode=exit_codes.UNCONVERGED)

    def print_summary(self, report, scenario, stderr=False):
        out = self.stderr if stderr else self.stdout
        ellipsoid = report.ellipsoid
        out.write(f"dual bound {report.dual_bound:.6e} W after {ellipsoid.iterations} iterations "
                  f"({ellipsoid.status}, mode {report.options.mode})")
        out.write(f"  stopping rule {STOPPING_RULE}: uncertainty {ellipsoid.uncertainty:.3e} W, "
                  f"threshold {ellipsoid.threshold:.3e} W")
        if not report.recovery.is_feasible:
            out.write(self.style.ERROR(f"no feasible allocation: {report.error}"))
            return

        feasibility = report.recovery.report
        style = self.style.SUCCESS if report.status != STATUS_UNCONVERGED else self.style.WARNING
        gap = "n/a" if report.gap is None else f"{report.gap:.3e}"
        out.write(style(f"total power {report.primal_power:.6e} W, relative gap {gap}"))
        for k, rate in enumerate(feasibility.user_rates):
            out.write(f"  user {k}: {format_quantity(rate, RATE)} "
                      f"(min {format_quantity(scenario.system.min_rate[k], RATE)})")
        for m, load in enumerate(feasibility.fronthaul_loads):
            out.write(f"  RRH {m}: fronthaul {format_quantity(load, RATE)} "
                      f"of {format_quantity(scenario.system.fronthaul_capacity[m], RATE)}")
