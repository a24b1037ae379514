import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from core_model.constraints import check_feasibility
from core_model.factories import flat_channel, make_config, make_content, random_channel
from core_model.models import ChannelState
from core_model.rate_program import Skeleton
from dual_solver.models import MODE_EXHAUSTIVE, DualState, SolverOptions
from dual_solver.models import STATUS_INFEASIBLE as SOLVE_INFEASIBLE
from dual_solver.problem import DualProblem
from dual_solver.subproblems import evaluate
from scenarios.generators import generate_scenario
from scenarios.models import ScenarioConfig
from utils import exit_codes

from .enumeration import enumerate_skeletons
from .models import GuardRefused, OracleCheck, TinyInstanceGuard, skeleton_count
from .serializers import load_check
from .solver import brute_force_optimum, compare_with_dual, convex_rate_program


def tiny_instance(seed, num_subchannels=2):
    """Two RRHs, two users, unit noise, 1 MHz subchannels; contents 0 and 1 requested, content 0 cached at RRH 0."""
    rng = np.random.default_rng(seed)
    cfg = make_config(num_rrhs=2, num_users=2, num_subchannels=num_subchannels, num_contents=2,
                      bandwidth=1e6 * num_subchannels, fronthaul_capacity=1.5e6, min_rate=1e6, cache_size=1)
    content = make_content(cfg, requested=[0, 1], cache=[[1, 0], [0, 0]])
    return random_channel(cfg, rng), content, cfg


class EnumerationTests(SimpleTestCase):

    def test_small_counts(self):
        self.assertEqual(len(list(enumerate_skeletons(make_config()))), 3)
        self.assertEqual(len(list(enumerate_skeletons(make_config(num_users=2)))), 5)

    def test_count_matches_closed_form(self):
        cfg = make_config(num_rrhs=2, num_users=2, num_subchannels=2)
        skeletons = list(enumerate_skeletons(cfg))
        self.assertEqual(len(skeletons), skeleton_count(cfg))
        self.assertEqual(len(skeletons), 81)
        self.assertEqual(len(set(skeletons)), 81)

    def test_canonical_stream(self):
        cfg = make_config(num_rrhs=2, num_users=2, num_subchannels=2)
        skeletons = list(enumerate_skeletons(cfg, canonical=True))
        self.assertEqual(len(skeletons), (1 + 2 * 3) ** 2)
        self.assertTrue(all(s.is_canonical() for s in skeletons))

    def test_sorted_order(self):
        skeletons = list(enumerate_skeletons(make_config(num_rrhs=2, num_users=2, num_subchannels=2)))
        self.assertEqual(skeletons, sorted(skeletons, key=Skeleton.sort_key))
        self.assertEqual(skeletons[0], Skeleton(users=(-1, -1), masks=(0, 0)))


class GuardTests(SimpleTestCase):

    def test_paper_scale_refused(self):
        cfg = make_config(num_rrhs=5, num_users=10, num_subchannels=64)
        with self.assertRaises(GuardRefused) as ctx:
            TinyInstanceGuard().check(cfg)
        self.assertEqual(ctx.exception.count, 321 ** 64)
        self.assertIsInstance(ctx.exception, ValidationError)

    def test_within_limit(self):
        self.assertEqual(TinyInstanceGuard(limit=81).check(make_config(num_rrhs=2, num_users=2,
                                                                        num_subchannels=2)), 81)

    def test_enumeration_refuses_too(self):
        with self.assertRaises(GuardRefused):
            next(enumerate_skeletons(make_config(num_subchannels=3), guard=TinyInstanceGuard(limit=26)))


class ConvexRateProgramTests(SimpleTestCase):

    def test_single_constraint_closed_form(self):
        cfg = make_config(bandwidth=1e6, min_rate=1e6)
        chan = ChannelState(np.full((1, 1, 1), np.sqrt(2.0), dtype=complex))
        result = convex_rate_program(Skeleton(users=(0,), masks=(1,)), chan, make_content(cfg), cfg)
        self.assertTrue(result.is_optimal)
        self.assertAlmostEqual(result.rates[0], 1e6)
        self.assertAlmostEqual(result.total_power, (2 ** 1 - 1) / 2.0)

    def test_fronthaul_below_min_rate(self):
        cfg = make_config(bandwidth=1e6, min_rate=1e6, fronthaul_capacity=0.5e6)
        result = convex_rate_program(Skeleton(users=(0,), masks=(1,)), flat_channel(cfg), make_content(cfg), cfg)
        self.assertEqual(result.status, 'infeasible')

    def test_equal_gains_split_rate(self):
        cfg = make_config(num_subchannels=2, bandwidth=2e6, min_rate=2e6)
        result = convex_rate_program(Skeleton(users=(0, 0), masks=(1, 1)), flat_channel(cfg), make_content(cfg), cfg)
        np.testing.assert_allclose(result.rates, [1e6, 1e6])


class BruteForceTests(SimpleTestCase):

    def test_single_user_cached(self):
        cfg = make_config(bandwidth=1e6, min_rate=1e6, cache_size=1)
        chan = ChannelState(np.full((1, 1, 1), np.sqrt(2.0), dtype=complex))
        content = make_content(cfg, cache=[[1]])
        result = brute_force_optimum(chan, content, cfg)
        self.assertTrue(result.is_feasible)
        self.assertAlmostEqual(result.total_power, 0.5)
        self.assertEqual(result.skeletons_total, 3)
        np.testing.assert_array_equal(result.report.fronthaul_loads, [0.0])

    def test_output_is_feasible(self):
        for seed in range(5):
            chan, content, cfg = tiny_instance(seed)
            result = brute_force_optimum(chan, content, cfg)
            self.assertTrue(result.is_feasible)
            report = check_feasibility(result.allocation, content, chan, cfg)
            self.assertTrue(report.is_feasible, report.violations)
            self.assertAlmostEqual(report.total_power, result.total_power, delta=1e-12)
            self.assertGreaterEqual(result.evaluated, 1)

    def test_no_cheaper_skeleton_exists(self):
        chan, content, cfg = tiny_instance(3)
        result = brute_force_optimum(chan, content, cfg)
        for skeleton in enumerate_skeletons(cfg, canonical=True):
            restricted = convex_rate_program(skeleton, chan, content, cfg)
            if restricted.is_optimal:
                self.assertGreaterEqual(restricted.total_power, result.total_power * (1 - 1e-9))

    def test_stronger_channel_halves_power(self):
        chan, content, cfg = tiny_instance(4)
        base = brute_force_optimum(chan, content, cfg)
        stronger = brute_force_optimum(ChannelState(chan.coefficients * np.sqrt(2.0)), content, cfg)
        self.assertLessEqual(stronger.total_power, base.total_power)
        self.assertAlmostEqual(stronger.total_power / base.total_power, 0.5, delta=1e-6)

    def test_caching_never_costs_power(self):
        for seed in range(3):
            chan, content, cfg = tiny_instance(seed)
            uncached = brute_force_optimum(chan, content.with_cache(np.zeros((2, 2))), cfg)
            cached = brute_force_optimum(chan, content.with_cache([[1, 0], [0, 1]]), cfg)
            self.assertLessEqual(cached.total_power, uncached.total_power * (1 + 1e-6))

    def test_subchannel_permutation(self):
        chan, content, cfg = tiny_instance(5, num_subchannels=3)
        base = brute_force_optimum(chan, content, cfg)
        permuted = brute_force_optimum(ChannelState(chan.coefficients[:, :, [2, 0, 1]]), content, cfg)
        self.assertAlmostEqual(permuted.total_power / base.total_power, 1.0, delta=1e-6)

    def test_infeasible_everywhere(self):
        cfg = make_config(bandwidth=1e6, min_rate=1e6, fronthaul_capacity=0.5e6)
        result = brute_force_optimum(flat_channel(cfg), make_content(cfg), cfg)
        self.assertFalse(result.is_feasible)
        self.assertIn("no skeleton", result.cause)


class DualVersusOracleTests(SimpleTestCase):

    def test_scalar_instance(self):
        cfg = make_config(num_subchannels=2, bandwidth=2e6, min_rate=1e6, cache_size=1)
        chan = ChannelState(np.array([[[1.0, 0.5]]], dtype=complex))
        check = compare_with_dual(chan, make_content(cfg, cache=[[1]]), cfg)
        self.assertTrue(check.weak_duality_holds())
        self.assertAlmostEqual(check.oracle.total_power, 1.0, delta=1e-9)
        self.assertGreaterEqual(check.dual_gap, -1e-9)
        self.assertLess(abs(check.primal_gap), 1e-9)

    def test_weak_duality_at_random_multipliers(self):
        rng = np.random.default_rng(0)
        for seed in range(3):
            chan, content, cfg = tiny_instance(seed)
            optimum = brute_force_optimum(chan, content, cfg).total_power
            problem = DualProblem(chan, content, cfg)
            for _ in range(20):
                dual = DualState(lam=rng.uniform(0, 5, problem.index.num_lambdas),
                                 mu=rng.uniform(0, 5, cfg.num_users), index=problem.index)
                g, _ = evaluate(problem, dual, MODE_EXHAUSTIVE)
                self.assertLessEqual(g, optimum * (1 + 1e-6))

    def test_generated_tiny_instances(self):
        """Every recovered allocation within 5% of the optimum, dual bound never above it."""
        config = ScenarioConfig(num_rrhs=2, num_users=2, num_subchannels=4, num_contents=3, cache_size=1,
                                fronthaul_capacity=30e6)
        for drop in range(20):
            strategy = ('most_popular', 'probabilistic', 'none')[drop % 3]
            scenario = generate_scenario(config.with_changes(cache_strategy=strategy), 2024, drop)
            check = compare_with_dual(scenario.channel, scenario.content, scenario.system)
            self.assertTrue(check.oracle.is_feasible, drop)
            self.assertTrue(check.weak_duality_holds(), drop)
            self.assertNotEqual(check.solve.status, SOLVE_INFEASIBLE, (drop, check.solve.error))
            self.assertGreaterEqual(check.primal_gap, -1e-6, drop)
            self.assertLessEqual(check.primal_gap, 0.05, drop)

    def test_flat_channel_serves_every_user(self):
        """One tap per link: every dual minimiser gives all subchannels to a single user."""
        config = ScenarioConfig(num_rrhs=2, num_users=2, num_subchannels=4, num_contents=3, cache_size=1,
                                fronthaul_capacity=30e6, cache_strategy='none')
        scenario = generate_scenario(config, 5)
        gains = scenario.channel.power_gains
        np.testing.assert_allclose(gains, np.repeat(gains[:, :, :1], 4, axis=2), rtol=1e-9)
        check = compare_with_dual(scenario.channel, scenario.content, scenario.system)
        self.assertNotEqual(check.solve.status, SOLVE_INFEASIBLE, check.solve.error)
        self.assertEqual(set(check.solve.recovery.skeleton.users) - {-1}, {0, 1})
        self.assertLessEqual(check.primal_gap, 0.05)


class OracleCheckCommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_tiny_preset(self):
        path = Path(self.tmp.name) / 'check.json'
        out = StringIO()
        call_command('oracle_check', preset='tiny', output=str(path), verbosity=0, stdout=out, stderr=StringIO())
        data = load_check(path.read_bytes())
        self.assertTrue(data['weak_duality'])
        self.assertEqual(data['oracle']['status'], 'optimal')
        self.assertEqual(data['oracle']['skeletons_total'], 9 ** 4)
        self.assertEqual(data['solver']['format'], 'cran-solver-report')
        self.assertTrue(data['oracle']['feasibility']['is_feasible'])
        self.assertIn("oracle: optimum", out.getvalue())

    def test_guard_refusal(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('oracle_check', preset='tiny', limit=100, verbosity=0, stdout=StringIO(),
                         stderr=StringIO())
        self.assertEqual(ctx.exception.returncode, exit_codes.GUARD_REFUSED)
        self.assertIn("6561", str(ctx.exception))

    def test_default_instance_refused(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('oracle_check', verbosity=0, stdout=StringIO(), stderr=StringIO())
        self.assertEqual(ctx.exception.returncode, exit_codes.GUARD_REFUSED)


class OracleCheckModelTests(SimpleTestCase):

    def test_gaps_need_a_feasible_oracle(self):
        cfg = make_config(bandwidth=1e6, min_rate=1e6, fronthaul_capacity=0.5e6)
        check = compare_with_dual(flat_channel(cfg), make_content(cfg), cfg, SolverOptions(max_iter=50))
        self.assertFalse(check.oracle.is_feasible)
        self.assertIsNone(check.primal_gap)
        self.assertIsNone(check.dual_gap)
        self.assertTrue(check.weak_duality_holds())
