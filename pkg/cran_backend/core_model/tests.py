import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from .constraints import check_feasibility, fronthaul_load, total_power
from .factories import flat_channel, make_config, make_content, random_channel
from .models import Allocation, ChannelState, ContentState, SystemConfig
from .radio import min_power_for_rate, rate, snr
from .rate_program import Skeleton, evaluate_skeleton, rate_water_fill, skeleton_lower_bound, solve_rate_program


class SystemConfigTests(SimpleTestCase):

    def test_rejects_cache_larger_than_library(self):
        with self.assertRaises(ValidationError) as ctx:
            make_config(num_contents=3, cache_size=4)
        self.assertIn('cache_size', ctx.exception.message_dict)

    def test_rejects_wrong_vector_length(self):
        with self.assertRaises(ValidationError):
            SystemConfig(num_rrhs=2, num_users=1, num_subchannels=1, num_contents=1, bandwidth=1.0,
                         noise_power=1.0, fronthaul_capacity=(1.0,), min_rate=(1.0,), cache_size=0)

    def test_subchannel_bandwidth(self):
        self.assertEqual(make_config(num_subchannels=64).subchannel_bandwidth, 312_500.0)


class ContentStateTests(SimpleTestCase):

    def test_build_derives_request_matrix(self):
        content = ContentState.build([1, 0], np.zeros((1, 2)), [0.5, 0.5])
        np.testing.assert_array_equal(content.requests, [[0, 1], [1, 0]])

    def test_rejects_unnormalised_popularity(self):
        with self.assertRaises(ValidationError):
            ContentState.build([0], np.zeros((1, 2)), [0.5, 0.6])

    def test_rejects_user_without_request(self):
        with self.assertRaises(ValidationError):
            ContentState(cache=np.zeros((1, 2)), requests=np.zeros((1, 2)), requested=[0], popularity=[0.5, 0.5])

    def test_cache_size_checked_against_config(self):
        cfg = make_config(num_contents=2, cache_size=1)
        content = make_content(cfg, cache=np.ones((1, 2)))
        with self.assertRaises(ValidationError):
            content.check_against(cfg)


class SnrTests(SimpleTestCase):

    def test_single_rrh_unit_snr(self):
        self.assertAlmostEqual(snr([1.0], [1], [0.3], 0.3), 1.0)

    def test_coherent_combining_quadruples_snr(self):
        single = snr([0.5, 0.5], [1, 0], [2.0, 2.0], 1.0)
        double = snr([0.5, 0.5], [1, 1], [2.0, 2.0], 1.0)
        self.assertAlmostEqual(double, 4 * single)

    def test_no_rrh_selected(self):
        self.assertEqual(snr([1.0, 2.0], [0, 0], [1.0, 1.0], 1.0), 0.0)

    def test_phase_rotation_invariance(self):
        rng = np.random.default_rng(7)
        h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        p = rng.uniform(0, 1, 3)
        rotated = h * np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
        self.assertAlmostEqual(snr(h, [1, 1, 1], p, 0.1), snr(rotated, [1, 1, 1], p, 0.1))

    def test_errors(self):
        with self.assertRaises(ValidationError):
            snr([1.0, 1.0], [1], [1.0], 1.0)
        with self.assertRaises(ValidationError):
            snr([1.0], [1], [1.0], 0.0)


class RateTests(SimpleTestCase):

    def setUp(self):
        self.cfg = make_config(num_subchannels=64)

    def test_reference_values(self):
        self.assertAlmostEqual(rate(1.0, self.cfg), 312_500.0)
        self.assertAlmostEqual(rate(3.0, self.cfg), 625_000.0)
        self.assertEqual(rate(0.0, self.cfg), 0.0)

    def test_negative_snr(self):
        with self.assertRaises(ValidationError):
            rate(-0.1, self.cfg)

    def test_rate_of_snr_nondecreasing_in_power(self):
        rng = np.random.default_rng(3)
        h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        p = rng.uniform(0, 1, 4)
        base = rate(snr(h, np.ones(4), p, 1.0), self.cfg)
        for m in range(4):
            bumped = p.copy()
            bumped[m] += 0.1
            self.assertGreaterEqual(rate(snr(h, np.ones(4), bumped, 1.0), self.cfg), base)

    def test_rate_is_concave_in_power(self):
        rng = np.random.default_rng(11)
        for _ in range(10_000):
            h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            alpha = rng.integers(0, 2, 3)
            p, q = rng.uniform(0, 2, 3) * alpha, rng.uniform(0, 2, 3) * alpha
            theta = rng.uniform()
            mixed = rate(snr(h, alpha, theta * p + (1 - theta) * q, 0.5), self.cfg)
            chord = theta * rate(snr(h, alpha, p, 0.5), self.cfg) + (1 - theta) * rate(snr(h, alpha, q, 0.5), self.cfg)
            self.assertGreaterEqual(mixed, chord - 1e-9 * max(1.0, chord))


class MinPowerForRateTests(SimpleTestCase):

    def setUp(self):
        self.cfg = make_config(num_rrhs=2, num_subchannels=64, noise_power=1e-3)

    def test_zero_target(self):
        np.testing.assert_array_equal(min_power_for_rate([1.0, 1.0], [1, 1], 0.0, self.cfg), [0.0, 0.0])

    def test_single_rrh_closed_form(self):
        gain = 0.2 ** 2 / self.cfg.noise_power
        p = min_power_for_rate([0.2, 0.5], [1, 0], 1e6, self.cfg)
        self.assertAlmostEqual(p[0], (2 ** (1e6 / 312_500) - 1) / gain)
        self.assertEqual(p[1], 0.0)

    def test_proportional_split(self):
        p = min_power_for_rate([2.0, 1.0], [1, 1], 5e5, self.cfg)
        self.assertAlmostEqual(p[0] / p[1], 4.0)

    def test_round_trip_and_optimality(self):
        rng = np.random.default_rng(5)
        h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        target = 7.5e5
        p = min_power_for_rate(h, [1, 1], target, self.cfg)
        achieved = rate(snr(h, [1, 1], p, self.cfg.noise_power), self.cfg)
        self.assertAlmostEqual(achieved / target, 1.0, delta=1e-9)
        for _ in range(1000):
            candidate = rng.uniform(0, 1, 2)
            scale = self.cfg.noise_power * np.expm1(np.log(2) * target / 312_500) / snr(h, [1, 1], candidate, 1.0)
            self.assertGreaterEqual(scale * candidate.sum(), p.sum() * (1 - 1e-9))

    def test_empty_selection(self):
        with self.assertRaises(ValidationError):
            min_power_for_rate([1.0, 1.0], [0, 0], 1e5, self.cfg)


class FronthaulLoadTests(SimpleTestCase):

    def setUp(self):
        # B/N = 10 MHz, so 1 bit/s/Hz carries 10 Mbps
        self.cfg = make_config(num_users=2, num_subchannels=2, num_contents=2, cache_size=1)
        self.chan = flat_channel(self.cfg)

    def _serve(self, rates):
        power = np.zeros((1, 2))
        for n, r in enumerate(rates):
            power[:, n] = min_power_for_rate(self.chan.coefficients[n, :, n], [1], r, self.cfg)
        return Allocation(user_assignment=np.eye(2), rrh_selection=np.ones((1, 2)), power=power,
                          fronthaul_share=np.zeros((1, 2)))

    def test_shared_content_counted_once(self):
        content = make_content(self.cfg, requested=[0, 0])
        load = fronthaul_load(0, self._serve([10e6, 15e6]), content, self.chan, self.cfg)
        self.assertAlmostEqual(load / 15e6, 1.0, delta=1e-9)

    def test_distinct_contents_add_up(self):
        content = make_content(self.cfg, requested=[0, 1])
        load = fronthaul_load(0, self._serve([10e6, 15e6]), content, self.chan, self.cfg)
        self.assertAlmostEqual(load / 25e6, 1.0, delta=1e-9)

    def test_cached_content_is_free(self):
        content = make_content(self.cfg, requested=[0, 0], cache=[[1, 0]])
        self.assertEqual(fronthaul_load(0, self._serve([10e6, 15e6]), content, self.chan, self.cfg), 0.0)

    def test_uncaching_never_lowers_load(self):
        alloc = self._serve([10e6, 15e6])
        cached = make_content(self.cfg, requested=[0, 1], cache=[[0, 1]])
        uncached = cached.with_cache([[0, 0]])
        self.assertGreaterEqual(fronthaul_load(0, alloc, uncached, self.chan, self.cfg),
                                fronthaul_load(0, alloc, cached, self.chan, self.cfg))

    def test_index_out_of_range(self):
        with self.assertRaises(ValidationError):
            fronthaul_load(1, self._serve([1e6, 1e6]), make_content(self.cfg), self.chan, self.cfg)


class FeasibilityTests(SimpleTestCase):

    def setUp(self):
        self.cfg = make_config(num_rrhs=2, num_users=3, num_subchannels=4)
        self.chan = flat_channel(self.cfg)
        self.content = make_content(self.cfg)

    def test_zero_allocation_misses_every_rate(self):
        report = check_feasibility(Allocation.zeros(self.cfg), self.content, self.chan, self.cfg)
        self.assertEqual([v.index for v in report.violations_of('min_rate')], [0, 1, 2])
        self.assertFalse(report.is_feasible)

    def test_shared_subchannel_flagged(self):
        nu = np.zeros((3, 4))
        nu[0, 1] = nu[1, 1] = 1
        alloc = Allocation(user_assignment=nu, rrh_selection=np.zeros((2, 4)), power=np.zeros((2, 4)),
                           fronthaul_share=np.zeros((2, 1)))
        report = check_feasibility(alloc, self.content, self.chan, self.cfg)
        self.assertEqual([v.index for v in report.violations_of('exclusivity')], [1])

    def test_power_on_idle_subchannel_flagged(self):
        power = np.zeros((2, 4))
        power[1, 3] = 0.2
        alloc = Allocation(user_assignment=np.zeros((3, 4)), rrh_selection=np.zeros((2, 4)), power=power,
                           fronthaul_share=np.zeros((2, 1)))
        report = check_feasibility(alloc, self.content, self.chan, self.cfg)
        self.assertEqual([v.index for v in report.violations_of('idle_subchannel')], [3])

    def test_shape_mismatch(self):
        with self.assertRaises(ValidationError):
            check_feasibility(Allocation.zeros(make_config()), self.content, self.chan, self.cfg)


class TotalPowerTests(SimpleTestCase):

    def test_values(self):
        cfg = make_config(num_rrhs=5, num_subchannels=64)
        self.assertEqual(total_power(Allocation.zeros(cfg)), 0.0)
        power = np.zeros((5, 64))
        power[0, 0] = 0.5
        alloc = Allocation(user_assignment=np.zeros((1, 64)), rrh_selection=np.zeros((5, 64)), power=power,
                           fronthaul_share=np.zeros((5, 1)))
        self.assertEqual(total_power(alloc), 0.5)
        uniform = Allocation(user_assignment=np.zeros((1, 64)), rrh_selection=np.ones((5, 64)),
                             power=np.full((5, 64), 0.01), fronthaul_share=np.zeros((5, 1)))
        self.assertAlmostEqual(total_power(uniform), 3.2)


class RateWaterFillTests(SimpleTestCase):

    def test_equal_gains_split_evenly(self):
        np.testing.assert_allclose(rate_water_fill([2.0, 2.0], 3.0), [1.5, 1.5])

    def test_weak_subchannel_left_empty(self):
        x = rate_water_fill([1024.0, 1.0], 2.0)
        np.testing.assert_allclose(x, [2.0, 0.0])

    def test_total_matches_target(self):
        x = rate_water_fill(np.random.default_rng(1).uniform(0.1, 10, 8), 5.0)
        self.assertAlmostEqual(x.sum(), 5.0)
        self.assertTrue(np.all(x >= 0))


class RateProgramTests(SimpleTestCase):

    def setUp(self):
        # B/N = 1 MHz, sigma^2 = 1; user needs 4 bits/s/Hz in total
        self.cfg = SystemConfig(num_rrhs=2, num_users=1, num_subchannels=2, num_contents=1, bandwidth=2e6,
                                noise_power=1.0, fronthaul_capacity=(3e6, 10e6), min_rate=(4e6,), cache_size=0)
        self.chan = ChannelState(np.array([[[4.0, 0.0], [0.0, 1.0]]], dtype=complex))
        self.content = make_content(self.cfg)
        self.skeleton = Skeleton(users=(0, 0), masks=(0b01, 0b10))

    def test_water_fill_when_fronthaul_is_slack(self):
        cfg = self.cfg.with_changes(fronthaul_capacity=(10e6, 10e6))
        result = solve_rate_program(self.skeleton, self.chan, self.content, cfg)
        self.assertEqual(result.method, 'water_fill')
        self.assertAlmostEqual(result.total_power, 15 / 16)

    def test_binding_fronthaul_shifts_rate(self):
        result, alloc, report = evaluate_skeleton(self.skeleton, self.chan, self.content, self.cfg)
        self.assertTrue(result.is_optimal)
        self.assertAlmostEqual(result.total_power / (7 / 16 + 1), 1.0, delta=1e-6)
        self.assertTrue(report.is_feasible, report.violations)
        self.assertAlmostEqual(alloc.fronthaul_share[0, 0], 1.0, delta=1e-6)

    def test_fronthaul_too_small(self):
        cfg = self.cfg.with_changes(fronthaul_capacity=(1e6, 1e6))
        result = solve_rate_program(self.skeleton, self.chan, self.content, cfg)
        self.assertEqual(result.status, 'infeasible')

    def test_user_without_subchannel(self):
        result = solve_rate_program(Skeleton(users=(-1, -1), masks=(0, 0)), self.chan, self.content, self.cfg)
        self.assertEqual(result.status, 'infeasible')
        self.assertIn('user 0', result.cause)

    def test_lower_bound_ignores_fronthaul(self):
        self.assertAlmostEqual(skeleton_lower_bound(self.skeleton, self.chan, self.content, self.cfg), 15 / 16)
        self.assertIsNone(skeleton_lower_bound(Skeleton(users=(-1, -1), masks=(0, 0)), self.chan, self.content,
                                               self.cfg))

    def test_zero_rate_subchannel_becomes_idle(self):
        chan = ChannelState(np.array([[[32.0, 0.0], [0.0, 1.0]]], dtype=complex))
        cfg = self.cfg.with_changes(fronthaul_capacity=(10e6, 10e6))
        _, alloc, report = evaluate_skeleton(self.skeleton, chan, self.content, cfg)
        self.assertEqual(alloc.assigned_user(1), None)
        self.assertTrue(report.is_feasible)

    def test_random_instances_feasible(self):
        rng = np.random.default_rng(2)
        cfg = make_config(num_rrhs=2, num_users=2, num_subchannels=4, num_contents=2, bandwidth=4e6,
                          fronthaul_capacity=6e6, min_rate=2e6)
        chan = random_channel(cfg, rng)
        content = make_content(cfg, requested=[0, 1])
        skeleton = Skeleton(users=(0, 1, 0, 1), masks=(3, 3, 1, 2))
        result, _, report = evaluate_skeleton(skeleton, chan, content, cfg)
        if result.is_optimal:
            self.assertTrue(report.is_feasible, report.violations)


class SkeletonTests(SimpleTestCase):

    def test_round_trip_through_matrices(self):
        skeleton = Skeleton(users=(1, -1, 0), masks=(0b11, 0, 0b10))
        np.testing.assert_array_equal(skeleton.selection_matrix(2), [[1, 0, 0], [1, 0, 1]])
        self.assertEqual(Skeleton.from_arrays(skeleton.users, skeleton.selection_matrix(2)), skeleton)

    def test_canonical_form(self):
        skeleton = Skeleton(users=(0, -1), masks=(0, 3))
        self.assertFalse(skeleton.is_canonical())
        self.assertEqual(skeleton.canonical(), Skeleton(users=(-1, -1), masks=(0, 0)))

    def test_idle_sorts_first(self):
        self.assertLess(Skeleton(users=(-1,), masks=(0,)).sort_key(), Skeleton(users=(0,), masks=(1,)).sort_key())
