import dataclasses
import itertools
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase
from scipy.optimize import minimize_scalar

from core_model.factories import flat_channel, make_config, make_content, random_channel
from core_model.models import ChannelState, ContentState
from core_model.rate_program import Skeleton
from scenarios.generators import generate_scenario
from scenarios.models import ScenarioConfig
from scenarios.serializers import dump_scenario
from utils import exit_codes

from .ellipsoid import cut, ellipsoid_solve, estimate_initial_radius
from .models import (
    MODE_EXHAUSTIVE, MODE_GREEDY, STATUS_CONVERGED, STATUS_FEASIBLE, STATUS_INFEASIBLE, STATUS_UNCONVERGED,
    DualIndex, DualState, SolverOptions,
)
from .power import fixed_user_objective, cooperative_power_alloc, water_fill_single_rrh
from .problem import LN2, DualProblem, rrh_subsets
from .recovery import cheapest_combinations, primal_recovery, recover, subchannel_choices
from .runner import solve_instance
from .serializers import STOPPING_RULE, dump_report, load_report
from .subproblems import dual_value, evaluate, per_sc_subproblem, solve_g2, solve_subchannels, subgradient


def random_dual(index, rng, scale=4.0):
    return DualState(lam=rng.uniform(0, scale, index.num_lambdas), mu=rng.uniform(0, scale, index.num_users),
                     index=index)


def mixed_instance(seed=0, num_rrhs=3, num_users=3, num_subchannels=4):
    """Subchannel bandwidth 1 MHz, unit noise, R_min = R_fh = 1 Mbps, partially cached contents."""
    rng = np.random.default_rng(seed)
    cfg = make_config(num_rrhs=num_rrhs, num_users=num_users, num_subchannels=num_subchannels, num_contents=2,
                      bandwidth=1e6 * num_subchannels, fronthaul_capacity=1e6, min_rate=1e6, cache_size=1)
    requested = np.arange(num_users) % 2
    cache = np.zeros((num_rrhs, 2), dtype=int)
    cache[0, 0] = 1
    cache[-1, 1] = 1
    content = make_content(cfg, requested=requested, cache=cache)
    return random_channel(cfg, rng), content, cfg


def scalar_dual_instance():
    """One user, one RRH, two subchannels with |h|^2 = 1 and 0.25, content cached: the dual is 1-D."""
    cfg = make_config(num_subchannels=2, bandwidth=2e6, min_rate=1e6, cache_size=1)
    chan = ChannelState(np.array([[[1.0, 0.5]]], dtype=complex))
    content = make_content(cfg, cache=np.ones((1, 1), dtype=int))
    return chan, content, cfg


def two_user_instance():
    """Each user has its own strong subchannel on both RRHs; everything cached."""
    cfg = make_config(num_rrhs=2, num_users=2, num_subchannels=2, bandwidth=2e6, min_rate=1e6, cache_size=1)
    coefficients = np.full((2, 2, 2), 0.1, dtype=complex)
    coefficients[0, :, 0] = 1.0
    coefficients[1, :, 1] = 1.0
    content = make_content(cfg, cache=np.ones((2, 1), dtype=int))
    return ChannelState(coefficients), content, cfg


class DualIndexTests(SimpleTestCase):

    def test_cached_pairs_have_no_multiplier(self):
        _, content, cfg = mixed_instance()
        index = DualIndex.build(content, cfg)
        self.assertNotIn((0, 0), index.pairs)
        self.assertNotIn((2, 1), index.pairs)
        self.assertEqual(index.num_lambdas, int(content.uncached_for_user.sum()))
        with self.assertRaises(ValidationError):
            index.position(0, 0)

    def test_lambda_matrix_round_trip(self):
        _, content, cfg = mixed_instance()
        index = DualIndex.build(content, cfg)
        lam = np.arange(1.0, index.num_lambdas + 1)
        np.testing.assert_array_equal(index.gather(index.lambda_matrix(lam)), lam)
        self.assertEqual(index.lambda_matrix(lam)[0, 0], 0.0)

    def test_negative_multiplier_rejected(self):
        _, content, cfg = mixed_instance()
        index = DualIndex.build(content, cfg)
        with self.assertRaises(ValidationError):
            DualState(lam=np.zeros(index.num_lambdas), mu=[-1.0, 0.0, 0.0], index=index)


class PowerAllocationTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(11)

    def _tuples(self, count):
        """(problem, dual, n, user, selection) with every RRH selection, including the empty one."""
        for trial in range(count):
            if trial % 20 == 0:
                chan, content, cfg = mixed_instance(seed=trial)
                problem = DualProblem(chan, content, cfg)
            dual = random_dual(problem.index, self.rng)
            selection = self.rng.integers(0, 2, cfg.num_rrhs)
            yield problem, dual, int(self.rng.integers(cfg.num_subchannels)), \
                int(self.rng.integers(cfg.num_users)), selection

    def test_threshold_is_exact(self):
        for problem, dual, n, k, selection in self._tuples(1000):
            power = cooperative_power_alloc(n, k, selection, dual, problem.chan, problem.content, problem.cfg, problem)
            combined = problem.gains[k, :, n] @ selection
            price = problem.price(dual, k, selection)
            transmits = price * combined > LN2 / problem.subchannel_bandwidth
            self.assertEqual(bool(power.sum() > 0), bool(transmits))
            self.assertTrue(np.all(power >= 0))
            self.assertTrue(np.all(power[selection == 0] == 0))

    def test_matches_scalar_minimiser(self):
        for problem, dual, n, k, selection in self._tuples(1000):
            if not selection.any():
                continue
            args = (dual, problem.chan, problem.content, problem.cfg, problem)
            power = cooperative_power_alloc(n, k, selection, *args)
            best = fixed_user_objective(n, k, selection, power, *args)

            weights = problem.gains[k, :, n] * selection
            weights = weights / weights.sum()
            upper = max(2.0 * power.sum(), 1.0)
            numeric = minimize_scalar(lambda t: fixed_user_objective(n, k, selection, t * weights, *args),
                                      bounds=(0.0, upper), method='bounded', options={'xatol': 1e-12})
            self.assertLessEqual(best, numeric.fun + 1e-9 * max(1.0, abs(best)))
            self.assertLessEqual(abs(best - numeric.fun), 1e-6 * max(1.0, abs(best)))

    def test_perturbations_never_improve(self):
        for problem, dual, n, k, selection in self._tuples(1000):
            args = (dual, problem.chan, problem.content, problem.cfg, problem)
            power = cooperative_power_alloc(n, k, selection, *args)
            best = fixed_user_objective(n, k, selection, power, *args)
            for _ in range(3):
                nudged = power * (1 + 0.01 * self.rng.uniform(-1, 1, power.size))
                nudged = nudged + (power == 0) * selection * 1e-3 * self.rng.uniform(0, 1, power.size)
                value = fixed_user_objective(n, k, selection, nudged, *args)
                self.assertGreaterEqual(value, best - 1e-9 * max(1.0, abs(best)))

    def test_single_rrh_is_water_filling(self):
        cfg = make_config(num_subchannels=3, bandwidth=3e6)
        chan = random_channel(cfg, self.rng)
        content = make_content(cfg)
        problem = DualProblem(chan, content, cfg)
        for _ in range(50):
            dual = random_dual(problem.index, self.rng)
            for n in range(3):
                power = cooperative_power_alloc(n, 0, [1], dual, chan, content, cfg, problem)
                expected = water_fill_single_rrh(problem.price(dual, 0, [1]), problem.gains[0, 0, n], 1e6)
                self.assertAlmostEqual(power[0], expected, delta=1e-12 * max(1.0, expected))

    def test_all_rrhs_cached_leaves_only_rate_price(self):
        chan, content, cfg = two_user_instance()
        problem = DualProblem(chan, content, cfg)
        self.assertEqual(problem.index.num_lambdas, 0)
        dual = DualState(lam=[], mu=[3.0, 1.0], index=problem.index)
        self.assertAlmostEqual(problem.price(dual, 0, [1, 1]), 3e-6, delta=1e-18)
        power = cooperative_power_alloc(0, 0, [1, 1], dual, chan, content, cfg, problem)
        self.assertAlmostEqual(power.sum(), (1e6 * 3.0 / 1e6 * 2.0 / LN2 - 1.0) / 2.0)
        np.testing.assert_allclose(power, [power.sum() / 2] * 2)

    def test_empty_selection(self):
        chan, content, cfg = two_user_instance()
        dual = DualState(lam=[], mu=[3.0, 1.0], index=DualIndex.build(content, cfg))
        np.testing.assert_array_equal(cooperative_power_alloc(0, 0, [0, 0], dual, chan, content, cfg), [0.0, 0.0])


class PerSubchannelTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(5)
        self.chan, self.content, self.cfg = mixed_instance(seed=3)
        self.problem = DualProblem(self.chan, self.content, self.cfg)

    def test_no_rate_reward_means_idle(self):
        dual = DualState(lam=self.rng.uniform(0, 1, self.problem.index.num_lambdas),
                         mu=np.zeros(self.cfg.num_users), index=self.problem.index)
        for mode in (MODE_EXHAUSTIVE, MODE_GREEDY):
            for n in range(self.cfg.num_subchannels):
                user, selection, power, value = per_sc_subproblem(
                    n, dual, mode, self.chan, self.content, self.cfg, self.problem)
                self.assertIsNone(user)
                self.assertEqual(value, 0.0)
                np.testing.assert_array_equal(power, np.zeros(self.cfg.num_rrhs))
                np.testing.assert_array_equal(selection, np.zeros(self.cfg.num_rrhs))

    def test_exhaustive_never_worse_than_greedy(self):
        checked = 0
        for trial in range(2500):
            if trial % 250 == 0:
                problem = DualProblem(*mixed_instance(seed=trial // 250))
            dual = random_dual(problem.index, self.rng)
            exhaustive = solve_subchannels(problem, dual, MODE_EXHAUSTIVE)['values']
            greedy = solve_subchannels(problem, dual, MODE_GREEDY)['values']
            self.assertTrue(np.all(exhaustive <= greedy + 1e-12 * (1.0 + np.abs(greedy))))
            checked += exhaustive.size
        self.assertEqual(checked, 10_000)

    def test_matches_direct_enumeration(self):
        chan, content, cfg = mixed_instance(seed=8, num_rrhs=2, num_users=2, num_subchannels=3)
        problem = DualProblem(chan, content, cfg)
        selections = ([1, 0], [0, 1], [1, 1])
        for _ in range(30):
            dual = random_dual(problem.index, self.rng)
            for n in range(cfg.num_subchannels):
                best = 0.0
                for k, selection in itertools.product(range(2), selections):
                    power = cooperative_power_alloc(n, k, selection, dual, chan, content, cfg, problem)
                    best = min(best, fixed_user_objective(n, k, selection, power, dual, chan, content, cfg, problem))
                _, _, _, value = per_sc_subproblem(n, dual, MODE_EXHAUSTIVE, chan, content, cfg, problem)
                self.assertAlmostEqual(value, best, delta=1e-9 * max(1.0, abs(best)))

    def test_candidate_count(self):
        dual = random_dual(self.problem.index, self.rng)
        _, solution = evaluate(self.problem, dual, MODE_EXHAUSTIVE)
        cfg = self.cfg
        self.assertEqual(solution.candidates, cfg.num_subchannels * cfg.num_users * 2 ** cfg.num_rrhs)
        _, greedy = evaluate(self.problem, dual, MODE_GREEDY)
        m = cfg.num_rrhs
        self.assertLessEqual(greedy.candidates, cfg.num_subchannels * cfg.num_users * m * (m + 1) // 2)

    def test_ties_go_to_lowest_user(self):
        chan, content, cfg = two_user_instance()
        flat = ChannelState(np.ones((2, 2, 2), dtype=complex))
        problem = DualProblem(flat, content, cfg)
        dual = DualState(lam=[], mu=[2.0, 2.0], index=problem.index)
        users = solve_subchannels(problem, dual, MODE_EXHAUSTIVE)['users']
        np.testing.assert_array_equal(users, [0, 0])

    def test_rrh_subsets_are_ordered(self):
        np.testing.assert_array_equal(rrh_subsets(2), [[1, 0], [1, 1], [0, 1]])
        self.assertEqual(rrh_subsets(4).shape, (15, 4))


class FronthaulShareTests(SimpleTestCase):

    def test_zero_lambda(self):
        _, content, cfg = mixed_instance()
        dual = DualState.zeros(DualIndex.build(content, cfg))
        rho, g2 = solve_g2(dual, content, cfg)
        self.assertEqual(g2, 0.0)
        np.testing.assert_array_equal(rho, np.zeros((cfg.num_rrhs, cfg.num_contents)))

    def test_single_requested_content(self):
        cfg = make_config(num_users=2, num_contents=3)
        content = make_content(cfg, requested=[2, 2])
        index = DualIndex.build(content, cfg)
        rho, g2 = solve_g2(DualState(lam=[0.5, 1.5], mu=[0.0, 0.0], index=index), content, cfg)
        np.testing.assert_array_equal(rho, [[0, 0, 1]])
        self.assertEqual(g2, -2.0)

    def test_matches_vertex_enumeration(self):
        rng = np.random.default_rng(2)
        cfg = make_config(num_rrhs=3, num_users=5, num_contents=4, cache_size=2)
        content = make_content(cfg, requested=[0, 1, 1, 3, 2], cache=[[1, 0, 0, 0], [0, 1, 1, 0], [0, 0, 0, 0]])
        index = DualIndex.build(content, cfg)
        # per RRH: rho = 0 or one unit vector on an uncached content
        choices = [[None] + [f for f in range(4) if not content.cache[m, f]] for m in range(3)]
        for _ in range(200):
            dual = random_dual(index, rng, scale=2.0)
            scores = (dual.lambda_matrix @ content.requests) * (1 - content.cache)
            best = min(
                -sum(scores[m, f] for m, f in enumerate(vertex) if f is not None)
                for vertex in itertools.product(*choices))
            rho, g2 = solve_g2(dual, content, cfg)
            self.assertAlmostEqual(g2, best, delta=1e-12)
            self.assertAlmostEqual(-float((scores * rho).sum()), g2, delta=1e-12)
            self.assertTrue(np.all(((1 - content.cache) * rho).sum(axis=1) <= 1))


class DualFunctionTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(9)
        self.chan, self.content, self.cfg = mixed_instance(seed=4)
        self.problem = DualProblem(self.chan, self.content, self.cfg)

    def g(self, dual):
        return evaluate(self.problem, dual, MODE_EXHAUSTIVE)

    def test_zero_dual(self):
        dual = DualState.zeros(self.problem.index)
        g, solution = dual_value(dual, MODE_EXHAUSTIVE, self.chan, self.content, self.cfg)
        self.assertEqual(g, 0.0)
        np.testing.assert_array_equal(solution.users, -np.ones(self.cfg.num_subchannels))
        d = subgradient(dual, solution, self.chan, self.content, self.cfg)
        lam_part, mu_part = self.problem.index.split(d)
        np.testing.assert_array_equal(mu_part, np.ones(self.cfg.num_users))
        np.testing.assert_array_equal(lam_part, np.zeros(self.problem.index.num_lambdas))

    def test_value_splits(self):
        dual = random_dual(self.problem.index, self.rng)
        g, solution = self.g(dual)
        self.assertAlmostEqual(g, solution.g1 + solution.g2 + dual.mu.sum(), delta=1e-9 * max(1.0, abs(g)))
        self.assertAlmostEqual(solution.g1, solution.values.sum(), delta=1e-9 * max(1.0, abs(g)))

    def test_supergradient_inequality(self):
        index = self.problem.index
        for _ in range(100):
            x, y = random_dual(index, self.rng), random_dual(index, self.rng)
            gx, solution = self.g(x)
            gy, _ = self.g(y)
            d = subgradient(x, solution, self.chan, self.content, self.cfg, self.problem)
            bound = gx + d @ (y.vector - x.vector)
            self.assertLessEqual(gy, bound + 1e-9 * max(1.0, abs(gx), abs(gy)))

    def test_concavity(self):
        index = self.problem.index
        for _ in range(100):
            x, y = random_dual(index, self.rng), random_dual(index, self.rng)
            middle = DualState.from_vector((x.vector + y.vector) / 2, index)
            gx, gy, gm = self.g(x)[0], self.g(y)[0], self.g(middle)[0]
            self.assertGreaterEqual(gm, (gx + gy) / 2 - 1e-9 * max(1.0, abs(gx), abs(gy)))

    def test_supergradient_has_one_entry_per_multiplier(self):
        dual = random_dual(self.problem.index, self.rng)
        _, solution = self.g(dual)
        d = subgradient(dual, solution, self.chan, self.content, self.cfg, self.problem)
        self.assertEqual(d.shape, (self.problem.index.size,))


class EllipsoidCutTests(SimpleTestCase):

    def test_interval_halves(self):
        center, shape = cut(np.array([0.0]), np.array([[4.0]]), np.array([1.0]))
        np.testing.assert_allclose(center, [-1.0])
        np.testing.assert_allclose(shape, [[1.0]])

    def test_kept_half_stays_inside(self):
        rng = np.random.default_rng(1)
        center = np.array([1.0, -2.0, 0.5])
        factor = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        shape = factor @ factor.T
        direction = rng.standard_normal(3)
        new_center, new_shape = cut(center, shape, direction)
        inverse = np.linalg.inv(new_shape)
        for _ in range(500):
            u = rng.standard_normal(3)
            u *= rng.uniform() ** (1 / 3) / np.linalg.norm(u)
            point = center + np.linalg.cholesky(shape) @ u
            if direction @ (point - center) <= 0:
                offset = point - new_center
                self.assertLessEqual(offset @ inverse @ offset, 1 + 1e-9)
        self.assertLess(np.linalg.det(new_shape), np.linalg.det(shape))

    def test_degenerate_direction(self):
        self.assertIsNone(cut(np.zeros(2), np.eye(2), np.zeros(2)))


class EllipsoidSolveTests(SimpleTestCase):

    def test_scalar_dual_matches_golden_section(self):
        chan, content, cfg = scalar_dual_instance()
        index = DualIndex.build(content, cfg)
        self.assertEqual(index.size, 1)

        def negative_g(mu):
            return -dual_value(DualState(lam=[], mu=[mu], index=index), MODE_EXHAUSTIVE, chan, content, cfg)[0]

        reference = minimize_scalar(negative_g, bracket=(0.0, 1.0, 10.0), method='golden', tol=1e-10)
        result = ellipsoid_solve(chan, content, cfg)
        self.assertEqual(result.status, STATUS_CONVERGED)
        self.assertAlmostEqual(result.best_value, -reference.fun, delta=1e-3)
        self.assertAlmostEqual(result.best_value, 1.0, delta=1e-3)
        self.assertAlmostEqual(result.dual.mu[0], 2 * LN2, delta=0.05)

    def test_best_value_never_decreases(self):
        chan, content, cfg = mixed_instance(seed=6)
        result = ellipsoid_solve(chan, content, cfg, SolverOptions(max_iter=300))
        steps = np.diff(result.best_trajectory)
        self.assertTrue(np.all(steps >= 0))
        self.assertEqual(result.best_trajectory[-1], result.best_value)
        self.assertEqual(max(result.trajectory), result.best_value)

    def test_pool_leads_with_best_skeleton(self):
        chan, content, cfg = mixed_instance(seed=6)
        result = ellipsoid_solve(chan, content, cfg, SolverOptions(max_iter=300, recovery_pool=4))
        self.assertLessEqual(len(result.pool), 4)
        self.assertEqual(result.pool[0], result.solution.skeleton())
        self.assertEqual(len(set(result.pool)), len(result.pool))

    def test_iteration_cap(self):
        chan, content, cfg = mixed_instance(seed=6)
        result = ellipsoid_solve(chan, content, cfg, SolverOptions(max_iter=3))
        self.assertEqual(result.status, STATUS_UNCONVERGED)
        self.assertEqual(result.iterations, 3)
        self.assertTrue(math.isfinite(result.best_value))

    def test_default_iteration_cap_scales_with_dimension(self):
        self.assertEqual(SolverOptions().iteration_cap(7), 14_000)
        self.assertEqual(SolverOptions(max_iter=10).iteration_cap(7), 10)

    def test_initial_radius_contains_scalar_optimum(self):
        chan, content, cfg = scalar_dual_instance()
        self.assertGreater(estimate_initial_radius(DualProblem(chan, content, cfg), 1e3), 2 * LN2)

    def test_explicit_radius_used(self):
        chan, content, cfg = scalar_dual_instance()
        result = ellipsoid_solve(chan, content, cfg, SolverOptions(initial_radius=10.0))
        self.assertEqual(result.initial_radius, 10.0)
        self.assertAlmostEqual(result.best_value, 1.0, delta=1e-3)


class RecoveryTests(SimpleTestCase):

    def setUp(self):
        self.cfg = make_config(num_subchannels=2, bandwidth=2e6, min_rate=1e6)
        self.chan = ChannelState(np.array([[[1.0, 0.5]]], dtype=complex))
        self.content = make_content(self.cfg)

    def test_keeps_cheapest_feasible_candidate(self):
        strong = Skeleton(users=(0, -1), masks=(1, 0))
        weak = Skeleton(users=(-1, 0), masks=(0, 1))
        result = primal_recovery([weak, strong], self.chan, self.content, self.cfg)
        self.assertEqual(result.status, STATUS_FEASIBLE)
        self.assertEqual(result.skeleton, strong)
        self.assertAlmostEqual(result.total_power, 1.0, delta=1e-9)
        self.assertEqual(result.candidates_tried, 2)
        self.assertTrue(result.report.is_feasible)
        self.assertAlmostEqual(result.report.total_power, result.total_power, delta=1e-12)

    def test_user_without_subchannel(self):
        cfg = make_config(num_users=2, num_subchannels=2, bandwidth=2e6, min_rate=1e6)
        chan = ChannelState(np.ones((2, 1, 2), dtype=complex))
        result = primal_recovery(Skeleton(users=(0, 0), masks=(1, 1)), chan, make_content(cfg), cfg)
        self.assertEqual(result.status, STATUS_INFEASIBLE)
        self.assertIn("user 1", result.cause)
        self.assertIsNone(result.allocation)

    def test_from_dual_minimiser(self):
        problem = DualProblem(self.chan, self.content, self.cfg)
        dual = DualState(lam=[0.0], mu=[5.0], index=problem.index)
        _, solution = evaluate(problem, dual, MODE_EXHAUSTIVE)
        result = primal_recovery(solution, self.chan, self.content, self.cfg)
        self.assertTrue(result.is_feasible)
        self.assertAlmostEqual(result.total_power, 1.0, delta=1e-9)

    def test_choices_cover_every_user(self):
        problem = DualProblem(*mixed_instance(seed=3))
        rng = np.random.default_rng(3)
        for _ in range(20):
            choices = subchannel_choices(problem, random_dual(problem.index, rng), 1)
            self.assertEqual(len(choices), problem.cfg.num_subchannels)
            for row in choices:
                values = [value for _, _, value in row]
                self.assertEqual(values, sorted(values))
                self.assertLessEqual({0, 1, 2}, {user for user, _, _ in row})

    def test_combinations_in_cost_order_without_repeats(self):
        choices = [((-1, 0, 0.0), (0, 1, 1.0), (1, 1, 3.0)),
                   ((-1, 0, 0.0), (1, 2, 0.5)),
                   ((-1, 0, 0.0), (0, 3, 2.0), (1, 3, 2.5))]
        combos = list(cheapest_combinations(choices))
        totals = [sum(choices[n][i][2] for n, i in enumerate(combo)) for combo in combos]
        self.assertEqual(len(combos), 18)
        self.assertEqual(len(set(combos)), 18)
        self.assertEqual(set(combos), set(itertools.product(range(3), range(2), range(3))))
        self.assertEqual(totals, sorted(totals))

    def test_flat_channel_serves_both_users(self):
        cfg = make_config(num_rrhs=2, num_users=2, num_subchannels=4, bandwidth=4e6, min_rate=1e6, cache_size=1)
        chan = flat_channel(cfg)
        content = make_content(cfg, cache=np.ones((2, 1), dtype=int))
        problem = DualProblem(chan, content, cfg)
        ellipsoid = ellipsoid_solve(chan, content, cfg, SolverOptions(), problem=problem)

        pooled_only = recover(problem, ellipsoid, SolverOptions(recovery_budget=0))
        self.assertEqual(pooled_only.status, STATUS_INFEASIBLE)

        result = recover(problem, ellipsoid, SolverOptions())
        self.assertEqual(result.status, STATUS_FEASIBLE)
        self.assertEqual(set(result.skeleton.users) - {-1}, {0, 1})
        self.assertTrue(result.report.is_feasible)
        self.assertLessEqual(ellipsoid.best_value, result.total_power * (1 + 1e-9))


class SolveInstanceTests(SimpleTestCase):

    def test_scalar_instance_has_no_gap(self):
        report = solve_instance(*scalar_dual_instance())
        self.assertEqual(report.status, STATUS_FEASIBLE)
        self.assertAlmostEqual(report.primal_power, 1.0, delta=1e-9)
        self.assertLessEqual(report.dual_bound, report.primal_power + 1e-9)
        self.assertLess(report.gap, 1e-3)
        self.assertIsNone(report.error)

    def test_fully_cached_instance_uses_no_fronthaul(self):
        report = solve_instance(*two_user_instance())
        self.assertEqual(report.status, STATUS_FEASIBLE)
        np.testing.assert_array_equal(report.recovery.report.fronthaul_loads, [0.0, 0.0])
        self.assertEqual(report.recovery.skeleton.users, (0, 1))
        self.assertAlmostEqual(report.primal_power, 1.0, delta=1e-9)
        self.assertLessEqual(report.dual_bound, report.primal_power + 1e-9)

    def test_capped_run_is_unconverged_but_recovers(self):
        report = solve_instance(*two_user_instance(), SolverOptions(max_iter=2))
        self.assertEqual(report.status, STATUS_UNCONVERGED)
        self.assertTrue(report.recovery.is_feasible)
        self.assertIn("2 iterations", report.error)

    def test_single_iteration_finds_nothing(self):
        report = solve_instance(*two_user_instance(), SolverOptions(max_iter=1, recovery_budget=0))
        self.assertEqual(report.status, STATUS_INFEASIBLE)
        self.assertIn("no usable subchannel", report.error)
        self.assertIsNone(report.gap)

    def test_single_iteration_recovers_from_choices(self):
        report = solve_instance(*two_user_instance(), SolverOptions(max_iter=1))
        self.assertEqual(report.status, STATUS_UNCONVERGED)
        self.assertTrue(report.recovery.is_feasible)
        self.assertEqual(set(report.recovery.skeleton.users), {0, 1})

    def test_greedy_mode(self):
        report = solve_instance(*two_user_instance(), SolverOptions(mode=MODE_GREEDY))
        self.assertEqual(report.status, STATUS_FEASIBLE)
        self.assertAlmostEqual(report.primal_power, 1.0, delta=1e-9)

    def test_options_validated(self):
        with self.assertRaises(ValidationError):
            SolverOptions(mode='random')
        self.assertEqual(SolverOptions.from_mapping({'tol': 1e-3, 'unused': 1}).tol, 1e-3)


class GreedyVersusExhaustiveTests(SimpleTestCase):

    def test_greedy_power_close_to_exhaustive(self):
        """Greedy subproblems cost at most 15% extra power on generated tiny instances."""
        config = ScenarioConfig(num_rrhs=2, num_users=2, num_subchannels=4, num_contents=3, cache_size=1,
                                fronthaul_capacity=30e6)
        for drop in range(20):
            strategy = ('most_popular', 'probabilistic', 'none')[drop % 3]
            scenario = generate_scenario(config.with_changes(cache_strategy=strategy), 2024, drop)
            instance = (scenario.channel, scenario.content, scenario.system)
            exhaustive = solve_instance(*instance, SolverOptions(mode=MODE_EXHAUSTIVE))
            greedy = solve_instance(*instance, SolverOptions(mode=MODE_GREEDY))
            self.assertNotEqual(exhaustive.status, STATUS_INFEASIBLE, (drop, exhaustive.error))
            self.assertNotEqual(greedy.status, STATUS_INFEASIBLE, (drop, greedy.error))
            self.assertLessEqual(greedy.primal_power, 1.15 * exhaustive.primal_power, drop)


class SolveReportFileTests(SimpleTestCase):

    def test_report_contents(self):
        report = solve_instance(*two_user_instance())
        data = load_report(dump_report(report))
        self.assertEqual(data['status'], STATUS_FEASIBLE)
        self.assertEqual(data['primal_power'], report.primal_power)
        self.assertEqual(data['dual']['bound'], report.dual_bound)
        self.assertEqual(len(data['dual']['trajectory']), len(report.ellipsoid.trajectory))
        np.testing.assert_array_equal(data['primal']['allocation']['power'], report.recovery.allocation.power)

    def test_stopping_rule_reported(self):
        report = solve_instance(*two_user_instance())
        dual = load_report(dump_report(report))['dual']
        self.assertEqual(dual['stopping_rule'], STOPPING_RULE)
        self.assertAlmostEqual(dual['threshold'], report.options.stop_threshold(report.dual_bound), delta=1e-15)
        self.assertLessEqual(dual['uncertainty'], dual['threshold'])

    def test_infeasible_report_has_no_allocation(self):
        report = solve_instance(*two_user_instance(), SolverOptions(max_iter=1, recovery_budget=0))
        data = load_report(dump_report(report))
        self.assertIsNone(data['primal']['allocation'])
        self.assertIsNone(data['gap'])

    def test_wrong_format_rejected(self):
        with self.assertRaises(ValidationError):
            load_report(b'{"format": "cran-scenario", "version": 1}')


class SolveCommandTests(SimpleTestCase):
    """Runs `solve` on a generated tiny scenario whose channel and contents are replaced by hand."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        config = ScenarioConfig(num_rrhs=2, num_users=2, num_subchannels=4, num_contents=3, cache_size=1,
                                fronthaul_capacity=30e6)
        scenario = generate_scenario(config, 1)
        # |h|^2 = sigma^2: users 0 and 1 own subchannels 0-1 and 2-3 on both RRHs
        amplitude = math.sqrt(scenario.system.noise_power)
        coefficients = np.full((2, 2, 4), 0.01 * amplitude, dtype=complex)
        coefficients[0, :, :2] = amplitude
        coefficients[1, :, 2:] = amplitude
        content = ContentState.build([0, 0], [[1, 0, 0], [1, 0, 0]], scenario.content.popularity)
        scenario = dataclasses.replace(scenario, channel=ChannelState(coefficients), content=content)
        self.scenario_path = Path(self.tmp.name) / 'scenario.json'
        self.scenario_path.write_bytes(dump_scenario(scenario))

    def _solve(self, name, **options):
        path = Path(self.tmp.name) / name
        out = StringIO()
        call_command('solve', scenario=str(self.scenario_path), output=str(path), verbosity=0, stdout=out,
                     stderr=StringIO(), **options)
        return path, out.getvalue()

    def test_feasible_run(self):
        path, out = self._solve('report.json')
        data = load_report(path.read_bytes())
        self.assertEqual(data['status'], STATUS_FEASIBLE)
        # 2 bits/s/Hz on each of four subchannels at combined gain 2
        self.assertAlmostEqual(data['primal_power'], 6.0, delta=1e-6)
        self.assertEqual(data['primal']['feasibility']['fronthaul_loads'], [0.0, 0.0])
        self.assertIn("stopping rule", out)
        self.assertIn("total power", out)
        self.assertIn("RRH 1: fronthaul", out)

    def test_repeat_gives_identical_bytes(self):
        first, _ = self._solve('a.json', mode='greedy')
        second, _ = self._solve('b.json', mode='greedy')
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_unconverged_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            self._solve('capped.json', overrides=['solver.max_iter=2'])
        self.assertEqual(ctx.exception.returncode, exit_codes.UNCONVERGED)
        self.assertEqual(load_report((Path(self.tmp.name) / 'capped.json').read_bytes())['status'],
                         STATUS_UNCONVERGED)

    def test_infeasible_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            self._solve('nothing.json', overrides=['solver.max_iter=1', 'solver.recovery_budget=0'])
        self.assertEqual(ctx.exception.returncode, exit_codes.INFEASIBLE)

    def test_missing_scenario_file(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('solve', scenario=str(Path(self.tmp.name) / 'absent.json'), verbosity=0,
                         stdout=StringIO(), stderr=StringIO())
        self.assertEqual(ctx.exception.returncode, exit_codes.INVALID_INPUT)
