import logging

from scenarios.generators import generate_scenario, summarize
from scenarios.models import CACHE_STRATEGIES
from scenarios.serializers import dump_scenario
from utils.commands import CranCommand
from utils.units import watts_to_dbm

logger = logging.getLogger(__name__)


class Command(CranCommand):
    help = "Generate one random network instance and write it as a scenario file."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--output', '-o', default='-', help="scenario file path ('-' for stdout)")
        parser.add_argument('--drop', type=int, default=0, help="Monte-Carlo drop index under the seed")
        parser.add_argument('--strategy', choices=CACHE_STRATEGIES, help="override the caching strategy")

    def run(self, **options):
        run_config = self.load_config(options)
        config = run_config.scenario
        if options.get('strategy'):
            config = config.with_changes(cache_strategy=options['strategy'])

        scenario = generate_scenario(config, run_config.seed, options['drop'])
        self.write_bytes(options['output'], dump_scenario(scenario))

        summary = summarize(scenario)
        logger.info("scenario written to %s", options['output'])
        out = self.stderr if options['output'] == '-' else self.stdout
        out.write(self.style.SUCCESS(
            f"M={summary['num_rrhs']} K={summary['num_users']} N={summary['num_subchannels']} "
            f"F={summary['num_contents']} cache={summary['cache_strategy']} seed={summary['seed']} "
            f"drop={summary['drop']}"))
        out.write(
            f"noise {watts_to_dbm(summary['noise_power_W']):.2f} dBm per SC, "
            f"distance {summary['distance_min_m']:.1f}/{summary['distance_mean_m']:.1f}/"
            f"{summary['distance_max_m']:.1f} m (min/mean/max), "
            f"{summary['distinct_requests']} distinct requests, cache hit ratio {summary['cache_hit_ratio']:.2f}")
