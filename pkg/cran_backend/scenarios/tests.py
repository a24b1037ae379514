import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from core_model.models import SystemConfig
from utils import exit_codes
from utils.serialization import parse_json, render_json

from .generators import (
    cache_hit_ratio, cache_most_popular, cache_none, cache_probabilistic, gen_channel,
    gen_requests, gen_topology, generate_scenario, pathloss_gain, power_delay_profile, summarize, zipf_pmf,
)
from .models import ChannelConfig, GeometryConfig, ScenarioConfig
from .serializers import dump_scenario, load_scenario


def tiny_config(**changes):
    return ScenarioConfig(num_rrhs=2, num_users=2, num_subchannels=4, num_contents=3, cache_size=1,
                          fronthaul_capacity=30e6).with_changes(**changes)


class TopologyTests(SimpleTestCase):

    def test_default_layout(self):
        topology = gen_topology(GeometryConfig(), 5, 10, seed=1)
        np.testing.assert_array_equal(
            topology.rrh_positions, [[0, 0], [-50, -50], [50, 50], [50, -50], [-50, 50]])
        self.assertTrue(np.all(np.abs(topology.user_positions) <= 100))

    def test_no_users(self):
        self.assertEqual(gen_topology(GeometryConfig(), 5, 0, seed=1).user_positions.shape, (0, 2))

    def test_same_seed_same_positions(self):
        self.assertEqual(gen_topology(GeometryConfig(), 3, 6, seed=9), gen_topology(GeometryConfig(), 3, 6, seed=9))
        self.assertNotEqual(gen_topology(GeometryConfig(), 3, 6, seed=9, drop=1),
                            gen_topology(GeometryConfig(), 3, 6, seed=9))

    def test_custom_layout_needs_positions(self):
        with self.assertRaises(ValidationError):
            GeometryConfig(rrh_layout='custom')

    def test_too_many_rrhs_for_default_layout(self):
        with self.assertRaises(ValidationError):
            ScenarioConfig(num_rrhs=6)


class ChannelTests(SimpleTestCase):

    def test_pathloss_at_one_meter(self):
        self.assertAlmostEqual(pathloss_gain(1.0, 0.0, ChannelConfig()) / 10 ** -3.8, 1.0)

    def test_distance_clamped(self):
        self.assertEqual(pathloss_gain(0.0, 0.0, ChannelConfig()), pathloss_gain(1.0, 0.0, ChannelConfig()))

    def test_power_delay_profile(self):
        pdp = power_delay_profile(16, ChannelConfig().tap_decay_db)
        self.assertAlmostEqual(pdp.sum(), 1.0)
        self.assertAlmostEqual(pdp[-1] / pdp[0], math.exp(-3))
        np.testing.assert_array_equal(power_delay_profile(1, 10.0), [1.0])

    def test_noise_power(self):
        noise = ChannelConfig().noise_power(20e6, 64)
        self.assertAlmostEqual(noise / 9.886e-15, 1.0, delta=1e-3)

    def test_small_scale_power_is_normalised(self):
        chan_cfg = ChannelConfig(shadowing_std_db=0.0)
        cfg = SystemConfig.uniform(num_rrhs=1, num_users=100_000, num_subchannels=16, num_contents=1,
                                   bandwidth=20e6, noise_power=1.0, fronthaul_capacity=1.0, min_rate=1.0,
                                   cache_size=0)
        topology = gen_topology(GeometryConfig(), 1, cfg.num_users, seed=4)
        channel = gen_channel(topology, chan_cfg, cfg, seed=4)
        large_scale = pathloss_gain(topology.distances(), 0.0, chan_cfg)
        ratio = channel.power_gains / large_scale[:, :, None]
        self.assertAlmostEqual(ratio.mean(), 1.0, delta=0.01)

    def test_too_many_taps(self):
        with self.assertRaises(ValidationError):
            ChannelConfig(num_taps=8).taps_for(4)


class ZipfTests(SimpleTestCase):

    def test_uniform_when_flat(self):
        np.testing.assert_allclose(zipf_pmf(4, 0.0), [0.25] * 4)

    def test_single_content(self):
        np.testing.assert_array_equal(zipf_pmf(1, 0.9), [1.0])

    def test_reference_head_probability(self):
        pmf = zipf_pmf(50, 0.9)
        self.assertAlmostEqual(pmf[0], 0.186, delta=1e-3)
        self.assertAlmostEqual(pmf.sum(), 1.0, delta=1e-12)
        self.assertTrue(np.all(np.diff(pmf) <= 0))


class RequestTests(SimpleTestCase):

    def test_point_mass(self):
        requests, requested = gen_requests([1.0, 0.0, 0.0], 6, seed=1)
        np.testing.assert_array_equal(requested, np.zeros(6))
        np.testing.assert_array_equal(requests.sum(axis=1), np.ones(6))

    def test_empirical_frequency(self):
        pmf = zipf_pmf(50, 0.9)
        _, requested = gen_requests(pmf, 100_000, seed=3)
        self.assertAlmostEqual(np.mean(requested == 0), pmf[0], delta=0.01)

    def test_reproducible(self):
        pmf = zipf_pmf(10, 0.9)
        np.testing.assert_array_equal(gen_requests(pmf, 20, seed=5)[1], gen_requests(pmf, 20, seed=5)[1])


class CacheTests(SimpleTestCase):

    def setUp(self):
        self.pmf = zipf_pmf(50, 0.9)

    def test_most_popular(self):
        np.testing.assert_array_equal(cache_most_popular(self.pmf, 0, 3), np.zeros((3, 50)))
        np.testing.assert_array_equal(cache_most_popular(self.pmf, 50, 3), np.ones((3, 50)))
        cache = cache_most_popular(self.pmf, 5, 3)
        np.testing.assert_array_equal(np.flatnonzero(cache[0]), [0, 1, 2, 3, 4])
        self.assertTrue(np.all(cache == cache[0]))

    def test_most_popular_ties_go_to_lower_index(self):
        np.testing.assert_array_equal(cache_most_popular([0.25] * 4, 2, 1), [[1, 1, 0, 0]])

    def test_probabilistic_extremes(self):
        np.testing.assert_array_equal(cache_probabilistic(self.pmf, 50, 2, seed=1), np.ones((2, 50)))
        np.testing.assert_array_equal(cache_probabilistic(self.pmf, 0, 2, seed=1), np.zeros((2, 50)))

    def test_probabilistic_rows_hold_exactly_s(self):
        cache = cache_probabilistic(self.pmf, 5, 10_000, seed=2)
        np.testing.assert_array_equal(cache.sum(axis=1), np.full(10_000, 5))
        self.assertGreaterEqual(cache[:, 0].mean(), cache[:, 49].mean())

    def test_probabilistic_fills_degenerate_pmf(self):
        np.testing.assert_array_equal(cache_probabilistic([1.0, 0.0, 0.0], 2, 1, seed=1), [[1, 1, 0]])

    def test_none(self):
        np.testing.assert_array_equal(cache_none(3, 4), np.zeros((3, 4)))


class ScenarioTests(SimpleTestCase):

    def test_deterministic(self):
        self.assertEqual(generate_scenario(tiny_config(), 11), generate_scenario(tiny_config(), 11))

    def test_strategies_share_channel_and_requests(self):
        popular = generate_scenario(tiny_config(), 11, drop=3)
        nothing = generate_scenario(tiny_config(cache_strategy='none'), 11, drop=3)
        self.assertEqual(popular.channel, nothing.channel)
        np.testing.assert_array_equal(popular.content.requested, nothing.content.requested)
        np.testing.assert_array_equal(nothing.content.cache, np.zeros((2, 3)))

    def test_cache_size_above_library_rejected(self):
        with self.assertRaises(ValidationError):
            tiny_config(cache_size=4)

    def test_summary(self):
        scenario = generate_scenario(tiny_config(cache_strategy='none'), 1)
        summary = summarize(scenario)
        self.assertEqual(summary['cache_hit_ratio'], 0.0)
        self.assertEqual((summary['num_rrhs'], summary['num_users']), (2, 2))
        self.assertGreaterEqual(summary['distance_min_m'], 1.0)

    def test_cache_hit_ratio_counts_rrh_user_pairs(self):
        scenario = generate_scenario(tiny_config(cache_size=3), 1)
        self.assertEqual(cache_hit_ratio(scenario.content), 1.0)


class ScenarioFileTests(SimpleTestCase):

    def test_round_trip(self):
        scenario = generate_scenario(tiny_config(cache_strategy='probabilistic'), 21, drop=2)
        restored = load_scenario(dump_scenario(scenario))
        self.assertEqual(restored, scenario)
        self.assertEqual(dump_scenario(restored), dump_scenario(scenario))

    def test_wrong_format_rejected(self):
        with self.assertRaises(ValidationError):
            load_scenario(b'{"format": "something-else", "version": 1}')

    def test_malformed_json_rejected(self):
        with self.assertRaises(ValidationError):
            load_scenario(b'{"format": ')

    def test_nested_errors_keep_their_path(self):
        data = parse_json(dump_scenario(generate_scenario(tiny_config(), 4)))
        data['config']['geometry']['rrh_layout'] = 'hexagon'
        data['system']['num_users'] = 'two'
        with self.assertRaises(ValidationError) as ctx:
            load_scenario(render_json(data))
        self.assertIn('config.geometry.rrh_layout', ctx.exception.message_dict)
        self.assertIn('system.num_users', ctx.exception.message_dict)


class GenCommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _gen(self, name, **options):
        path = Path(self.tmp.name) / name
        call_command('gen', output=str(path), verbosity=0, stdout=StringIO(), **options)
        return path

    def test_default_config_is_full_size(self):
        scenario = load_scenario(self._gen('default.json').read_bytes())
        self.assertEqual((scenario.system.num_rrhs, scenario.system.num_users, scenario.system.num_subchannels),
                         (5, 10, 64))

    def test_repeat_gives_identical_bytes(self):
        first = self._gen('a.json', preset='tiny', seed=3).read_bytes()
        second = self._gen('b.json', preset='tiny', seed=3).read_bytes()
        self.assertEqual(first, second)

    def test_strategy_flag(self):
        scenario = load_scenario(self._gen('none.json', preset='tiny', strategy='none').read_bytes())
        self.assertEqual(scenario.config.cache_strategy, 'none')

    def test_cache_larger_than_library_rejected(self):
        with self.assertRaises(CommandError) as ctx:
            self._gen('bad.json', preset='tiny', overrides=['system.cache_size=9'])
        self.assertEqual(ctx.exception.returncode, exit_codes.INVALID_INPUT)

    def test_invalid_section_value_rejected(self):
        with self.assertRaises(CommandError) as ctx:
            self._gen('bad.json', preset='tiny', overrides=['system.num_users=0'])
        self.assertEqual(ctx.exception.returncode, exit_codes.INVALID_INPUT)
        self.assertIn("system.num_users", str(ctx.exception))
