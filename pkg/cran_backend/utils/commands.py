"""
Base class for the CRAN management commands.

It adds the shared --config/--preset/--set/--seed options, maps --verbosity
onto the app loggers and turns ValidationError into the "invalid input" exit
code, so each command's `run()` only deals with its own outcome states.
"""

import logging
import sys
from pathlib import Path

from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from . import exit_codes
from .runconfig import load_run_config

APP_LOGGERS = ('core_model', 'scenarios', 'dual_solver', 'oracle', 'experiments', 'utils')

VERBOSITY_LEVELS = {0: logging.WARNING, 1: logging.INFO, 2: logging.INFO, 3: logging.DEBUG}


def exit_code_epilog():
    lines = [f"{code}: {text}" for code, text in sorted(exit_codes.DESCRIPTIONS.items())]
    return "exit codes -- " + "; ".join(lines)


class CranCommand(BaseCommand):
    uses_run_config = True

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.epilog = exit_code_epilog()
        return parser

    def add_arguments(self, parser):
        if self.uses_run_config:
            parser.add_argument('--config', help="YAML run configuration file")
            parser.add_argument('--preset', help="shipped preset name (paper, desk, tiny)")
            parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                                help="override one config entry, e.g. system.num_users=4 (repeatable)")
            parser.add_argument('--seed', type=int, help="base seed, overrides the config's seed")

    def handle(self, *args, **options):
        self.configure_logging(options.get('verbosity', 1))
        try:
            return self.run(**options)
        except ValidationError as exc:
            raise CommandError(self.describe(exc), returncode=exit_codes.INVALID_INPUT) from exc
        except OSError as exc:
            raise CommandError(str(exc), returncode=exit_codes.INVALID_INPUT) from exc

    def run(self, **options):
        raise NotImplementedError('subclasses of CranCommand must provide a run() method')

    # ── helpers ───────────────────────────────────────────────

    def configure_logging(self, verbosity):
        level = VERBOSITY_LEVELS.get(int(verbosity), logging.DEBUG)
        for name in APP_LOGGERS:
            logging.getLogger(name).setLevel(level)

    @staticmethod
    def describe(exc):
        if hasattr(exc, 'message_dict'):
            return "; ".join(f"{key}: {' '.join(map(str, msgs))}" for key, msgs in exc.message_dict.items())
        return " ".join(str(m) for m in exc.messages)

    def load_config(self, options):
        overrides = list(options.get('overrides') or [])
        if options.get('seed') is not None:
            overrides.append(f"seed={options['seed']}")
        return load_run_config(
            config_path=options.get('config'),
            preset=options.get('preset'),
            overrides=overrides,
            preset_dir=settings.CRAN_PRESET_DIR,
        )

    def solver_settings(self, run_config, mode=None):
        """Settings defaults, then the config's solver section, then --mode."""
        merged = {
            **settings.CRAN_SOLVER,
            'kkt_tol': settings.CRAN_KKT_TOL,
            'feasibility_tol': settings.CRAN_FEASIBILITY_TOL,
            **run_config.solver,
        }
        if mode:
            merged['mode'] = mode
        return merged

    def write_bytes(self, path, payload):
        if path in (None, '-'):
            self.stdout.write(payload.decode('utf-8'), ending='')
            return
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)

    def read_bytes(self, path):
        if path == '-':
            return sys.stdin.buffer.read()
        try:
            return Path(path).read_bytes()
        except FileNotFoundError as exc:
            raise ValidationError(f"input file {path} does not exist") from exc
