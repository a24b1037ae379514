import logging

from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import CommandError

from dual_solver.models import MODES, SolverOptions
from experiments.harness import run_sweep, spec_from_run_config
from experiments.reporting import FORMAT_CSV, FORMAT_PDF, FORMATS, emit_results
from utils import exit_codes
from utils.commands import CranCommand

logger = logging.getLogger(__name__)

MIN_SUCCESS_RATIO = 0.9


class Command(CranCommand):
    help = ("Monte-Carlo sweep of the total transmit power over fronthaul capacity or cache size, "
            "for each caching strategy. The grid comes from the config's sweep section.")

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--threads', type=int, help="worker processes for the drops (default CRAN_THREADS)")
        parser.add_argument('--format', dest='fmt', choices=FORMATS, default=FORMAT_CSV, help="result format")
        parser.add_argument('--mode', choices=MODES, help="RRH selection search, overrides solver.mode")
        parser.add_argument('--output', '-o', default='-', help="result path ('-' for stdout, not for pdf)")

    def run(self, **options):
        run_config = self.load_config(options)
        solver_options = SolverOptions.from_mapping(self.solver_settings(run_config, options.get('mode')))
        spec = spec_from_run_config(run_config, solver_options)

        threads = options.get('threads') or settings.CRAN_THREADS
        if threads < 1:
            raise ValidationError({'threads': "must be at least 1"})
        if options['fmt'] == FORMAT_PDF and options['output'] == '-':
            raise ValidationError({'output': "PDF results need a file path"})

        result = run_sweep(spec, threads=threads, progress=int(options.get('verbosity', 1)) >= 2)
        self.write_bytes(options['output'], emit_results(result, options['fmt']))

        out = self.stderr if options['output'] == '-' else self.stdout
        for point in result.points:
            mean = "n/a" if point.mean_power is None else f"{point.mean_power / spec.num_rrhs:.6e} W/RRH"
            line = (f"{point.strategy:>13} {spec.param}={point.value:<12g} {mean}  "
                    f"({point.n_feasible}/{point.n_drops} feasible, {point.n_unconverged} unconverged)")
            out.write(line if point.n_feasible == point.n_drops else self.style.WARNING(line))

        records = result.records
        succeeded = sum(1 for r in records if r.succeeded)
        if result.success_ratio < MIN_SUCCESS_RATIO:
            raise CommandError(f"only {succeeded} of {len(records)} drops produced a feasible allocation",
                               returncode=exit_codes.INFEASIBLE)
        out.write(self.style.SUCCESS(f"{succeeded} of {len(records)} drops feasible"))
