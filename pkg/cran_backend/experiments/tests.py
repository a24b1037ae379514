import math
import os
import random
import tempfile
from io import BytesIO, StringIO
from pathlib import Path
from unittest import mock, skipUnless

import numpy as np
import pandas as pd
from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from dual_solver.models import STATUS_FEASIBLE, STATUS_INFEASIBLE, STATUS_UNCONVERGED, SolverOptions
from dual_solver.runner import solve_scenario
from scenarios.models import CACHE_MOST_POPULAR, CACHE_NONE, CACHE_PROBABILISTIC, ScenarioConfig
from utils import exit_codes
from utils.runconfig import load_run_config

from .harness import run_drop, run_sweep, scenario_for, spec_from_run_config
from .models import (
    STATUS_ERROR, SWEEP_CACHE_SIZE, SWEEP_FRONTHAUL, DropRecord, SweepPoint, SweepResult, SweepSpec,
)
from .reporting import CSV_COLUMNS, emit_results
from .serializers import load_results

SLOW = os.getenv('CRAN_SLOW_TESTS') == '1'

TINY = ScenarioConfig(num_rrhs=2, num_users=2, num_subchannels=4, num_contents=3, cache_size=1,
                      fronthaul_capacity=30e6, min_rate=1e6)

TINY_SWEEP = ['sweep.param=fronthaul_capacity', 'sweep.values=30 Mbps,60 Mbps',
              'sweep.strategies=most_popular,none', 'sweep.num_drops=1', 'system.min_rate=1 Mbps']


def tiny_spec(**changes):
    kwargs = dict(param=SWEEP_FRONTHAUL, values=(30e6, 60e6), template=TINY,
                  strategies=(CACHE_MOST_POPULAR, CACHE_NONE), num_drops=2, seed=11)
    kwargs.update(changes)
    return SweepSpec(**kwargs)


def handmade_records(strategy=CACHE_MOST_POPULAR, value=30e6):
    """Four feasible drops (one unconverged) with powers 1..4 W and one infeasible drop."""
    return (
        DropRecord(strategy, value, 0, STATUS_FEASIBLE, 1.0, 0.99, 0.01, 40, 0.5),
        DropRecord(strategy, value, 1, STATUS_FEASIBLE, 2.0, 1.96, 0.02, 41, 0.5),
        DropRecord(strategy, value, 2, STATUS_INFEASIBLE, None, 0.5, None, 38, 0.0, "no candidate skeleton"),
        DropRecord(strategy, value, 3, STATUS_FEASIBLE, 3.0, 2.97, 0.01, 39, 1.0),
        DropRecord(strategy, value, 4, STATUS_UNCONVERGED, 4.0, 3.6, 0.1, 100, 0.5,
                   "no convergence within 100 iterations"),
    )


class SweepSpecTests(SimpleTestCase):

    def test_grid_must_increase(self):
        with self.assertRaises(ValidationError):
            tiny_spec(values=(60e6, 30e6))
        with self.assertRaises(ValidationError):
            tiny_spec(values=(30e6, 30e6))

    def test_grid_must_not_be_empty(self):
        with self.assertRaises(ValidationError):
            tiny_spec(values=())

    def test_needs_a_drop(self):
        with self.assertRaises(ValidationError):
            tiny_spec(num_drops=0)

    def test_needs_a_strategy(self):
        with self.assertRaises(ValidationError):
            tiny_spec(strategies=())

    def test_unknown_strategy(self):
        with self.assertRaises(ValidationError):
            tiny_spec(strategies=('lru',))

    def test_cache_size_beyond_catalogue(self):
        with self.assertRaises(ValidationError):
            tiny_spec(param=SWEEP_CACHE_SIZE, values=(1, 4))

    def test_cache_sizes_are_integers(self):
        spec = tiny_spec(param=SWEEP_CACHE_SIZE, values=(0.0, 2.0))
        self.assertEqual(spec.values, (0, 2))
        self.assertIsInstance(spec.values[0], int)

    def test_repeated_strategies_collapse(self):
        spec = tiny_spec(strategies=(CACHE_NONE, CACHE_MOST_POPULAR, CACHE_NONE))
        self.assertEqual(spec.strategies, (CACHE_NONE, CACHE_MOST_POPULAR))

    def test_tasks_are_strategy_major(self):
        tasks = tiny_spec().tasks()
        self.assertEqual(len(tasks), 2 * 2 * 2)
        self.assertEqual(tasks[0], (CACHE_MOST_POPULAR, 30e6, 0))
        self.assertEqual(tasks[-1], (CACHE_NONE, 60e6, 1))


class PairedDrawTests(SimpleTestCase):

    def test_strategies_share_channel_and_requests(self):
        spec = tiny_spec(strategies=(CACHE_MOST_POPULAR, CACHE_PROBABILISTIC, CACHE_NONE))
        scenarios = [scenario_for(3, strategy, 30e6, spec) for strategy in spec.strategies]
        for other in scenarios[1:]:
            self.assertEqual(other.channel, scenarios[0].channel)
            self.assertEqual(other.topology, scenarios[0].topology)
            np.testing.assert_array_equal(other.content.requested, scenarios[0].content.requested)
        self.assertEqual(int(scenarios[2].content.cache.sum()), 0)
        self.assertEqual(int(scenarios[0].content.cache.sum()), TINY.num_rrhs * TINY.cache_size)

    def test_grid_values_share_draws(self):
        spec = tiny_spec()
        low, high = (scenario_for(0, CACHE_MOST_POPULAR, value, spec) for value in spec.values)
        self.assertEqual(low.channel, high.channel)
        self.assertEqual(list(high.system.fronthaul_capacity), [60e6, 60e6])

    def test_drops_differ(self):
        spec = tiny_spec()
        self.assertNotEqual(scenario_for(0, CACHE_NONE, 30e6, spec).channel,
                            scenario_for(1, CACHE_NONE, 30e6, spec).channel)


class RunDropTests(SimpleTestCase):

    def test_record_matches_direct_solve(self):
        spec = tiny_spec()
        record = run_drop(0, CACHE_MOST_POPULAR, 30e6, spec)
        report = solve_scenario(scenario_for(0, CACHE_MOST_POPULAR, 30e6, spec), spec.solver)
        self.assertEqual(record.status, report.status)
        self.assertEqual(record.dual_bound, report.dual_bound)
        self.assertEqual(record.iterations, report.ellipsoid.iterations)
        self.assertTrue(record.succeeded)
        checked = report.recovery.report.total_power
        self.assertLessEqual(abs(record.total_power - checked), 1e-9 * max(1.0, checked))

    def test_no_cache_never_hits(self):
        record = run_drop(0, CACHE_NONE, 30e6, tiny_spec())
        self.assertEqual(record.cache_hit_ratio, 0.0)

    def test_solver_errors_are_recorded(self):
        with mock.patch('experiments.harness.solve_scenario', side_effect=ValidationError("singular channel")):
            record = run_drop(0, CACHE_NONE, 30e6, tiny_spec())
        self.assertEqual(record.status, STATUS_ERROR)
        self.assertFalse(record.succeeded)
        self.assertEqual(record.error, "singular channel")


class AggregationTests(SimpleTestCase):

    def test_mean_over_feasible_drops_only(self):
        point = SweepPoint(CACHE_MOST_POPULAR, 30e6, handmade_records())
        self.assertEqual(point.n_drops, 5)
        self.assertEqual(point.n_feasible, 4)
        self.assertEqual(point.n_infeasible, 1)
        self.assertEqual(point.n_unconverged, 1)
        self.assertEqual(point.mean_power, 2.5)
        self.assertAlmostEqual(point.stderr, math.sqrt((5 / 3) / 4), places=12)
        self.assertAlmostEqual(point.mean_gap, 0.035, places=12)

    def test_single_drop(self):
        point = SweepPoint(CACHE_NONE, 30e6, handmade_records()[:1])
        self.assertEqual(point.mean_power, 1.0)
        self.assertEqual(point.stderr, 0.0)

    def test_no_feasible_drop(self):
        point = SweepPoint(CACHE_NONE, 30e6, handmade_records()[2:3])
        self.assertIsNone(point.mean_power)
        self.assertIsNone(point.stderr)
        self.assertIsNone(point.mean_gap)

    def test_order_independent(self):
        rng = random.Random(5)
        records = [DropRecord(CACHE_NONE, 30e6, d, STATUS_FEASIBLE, rng.uniform(0, 1) * 10 ** rng.randint(-8, 2))
                   for d in range(50)]
        shuffled = list(records)
        rng.shuffle(shuffled)
        first, second = SweepPoint(CACHE_NONE, 30e6, tuple(records)), SweepPoint(CACHE_NONE, 30e6, tuple(shuffled))
        self.assertEqual(first.mean_power, second.mean_power)
        self.assertEqual(first.stderr, second.stderr)

    def test_from_records_groups_in_spec_order(self):
        spec = tiny_spec(values=(30e6,), num_drops=5)
        records = list(handmade_records(CACHE_NONE)) + list(handmade_records(CACHE_MOST_POPULAR))
        random.Random(1).shuffle(records)
        result = SweepResult.from_records(spec, records)
        self.assertEqual([p.strategy for p in result.points], [CACHE_MOST_POPULAR, CACHE_NONE])
        self.assertEqual([r.drop for r in result.points[0].records], [0, 1, 2, 3, 4])
        self.assertAlmostEqual(result.success_ratio, 0.8)


class PairedComparisonTests(SimpleTestCase):

    def _result(self, offsets):
        """One grid point: none at 1 W per drop, most_popular at 1 W plus the offset."""
        spec = tiny_spec(values=(30e6,), num_drops=len(offsets))
        records = [DropRecord(CACHE_NONE, 30e6, d, STATUS_FEASIBLE, 1.0) for d in range(len(offsets))]
        records += [DropRecord(CACHE_MOST_POPULAR, 30e6, d, STATUS_FEASIBLE, 1.0 + x) for d, x in enumerate(offsets)]
        return SweepResult.from_records(spec, records)

    def test_consistent_saving_is_significant(self):
        result = self._result([-0.2, -0.1, -0.3, -0.2])
        self.assertAlmostEqual(paired_upper_bound(result, CACHE_MOST_POPULAR, CACHE_NONE),
                               -0.1 + 1.96 * math.sqrt(0.005 / 3) / 2, places=12)

    def test_noisy_saving_is_not(self):
        result = self._result([-0.2, 0.1, -0.1, 0.15])
        self.assertGreater(paired_upper_bound(result, CACHE_MOST_POPULAR, CACHE_NONE), 0.0)
        np.testing.assert_allclose(result.mean_curve(CACHE_NONE), [2.5])


class RunSweepTests(SimpleTestCase):

    def test_single_drop_single_point(self):
        spec = tiny_spec(values=(30e6,), strategies=(CACHE_NONE,), num_drops=1)
        result = run_sweep(spec)
        self.assertEqual(len(result.points), 1)
        self.assertEqual(result.points[0].records, (run_drop(0, CACHE_NONE, 30e6, spec),))

    def test_worker_pool_matches_serial_run(self):
        spec = tiny_spec()
        serial = run_sweep(spec, threads=1)
        pooled = run_sweep(spec, threads=2)
        self.assertEqual(serial, pooled)
        self.assertEqual(emit_results(serial, 'json'), emit_results(pooled, 'json'))
        self.assertEqual(sum(p.n_drops for p in serial.points), 8)


class ReportingTests(SimpleTestCase):

    def setUp(self):
        spec = tiny_spec(values=(30e6, 60e6), num_drops=5)
        records = handmade_records(CACHE_MOST_POPULAR, 30e6) + handmade_records(CACHE_NONE, 60e6)
        self.result = SweepResult.from_records(spec, records)

    def test_empty_result_is_header_only(self):
        empty = SweepResult(spec=self.result.spec, points=())
        self.assertEqual(emit_results(empty, 'csv'), (",".join(CSV_COLUMNS) + "\n").encode())

    def test_csv_rows(self):
        frame = pd.read_csv(BytesIO(emit_results(self.result, 'csv')))
        self.assertEqual(list(frame.columns), CSV_COLUMNS)
        self.assertEqual(len(frame), 4)
        row = frame.iloc[0]
        self.assertEqual(row['strategy'], CACHE_MOST_POPULAR)
        self.assertEqual(row['swept_param'], SWEEP_FRONTHAUL)
        self.assertEqual(row['value'], 30e6)
        # normalized by M = 2
        self.assertAlmostEqual(row['mean_power_W'], 1.25)
        self.assertAlmostEqual(row['stderr_W'], math.sqrt((5 / 3) / 4) / 2)
        self.assertEqual(row['n_feasible'], 4)
        self.assertEqual(row['n_drops'], 5)
        self.assertAlmostEqual(row['mean_gap'], 0.035)
        # (most_popular, 60 Mbps) has no drops
        self.assertTrue(math.isnan(frame.iloc[1]['mean_power_W']))
        self.assertEqual(frame.iloc[1]['n_drops'], 0)

    def test_csv_uses_unix_newlines(self):
        self.assertNotIn(b"\r", emit_results(self.result, 'csv'))

    def test_structured_round_trip(self):
        self.assertEqual(load_results(emit_results(self.result, 'json')), self.result)

    def test_structured_round_trip_cache_size(self):
        spec = tiny_spec(param=SWEEP_CACHE_SIZE, values=(0, 1), num_drops=1)
        record = DropRecord(CACHE_NONE, 1, 0, STATUS_FEASIBLE, 0.25, 0.25, 0.0, 12, 0.0)
        result = SweepResult.from_records(spec, [record])
        loaded = load_results(emit_results(result, 'json'))
        self.assertEqual(loaded, result)
        self.assertIsInstance(loaded.points[-1].records[0].value, int)

    def test_structured_file_embeds_spec(self):
        data = emit_results(self.result, 'json').decode()
        self.assertIn('"format": "cran-sweep-results"', data)
        self.assertIn('"seed": 11', data)
        self.assertIn('"template"', data)

    def test_pdf(self):
        payload = emit_results(self.result, 'pdf')
        self.assertTrue(payload.startswith(b"%PDF"))
        self.assertEqual(payload, emit_results(self.result, 'pdf'))

    def test_pdf_of_empty_result(self):
        payload = emit_results(SweepResult(spec=self.result.spec, points=()), 'pdf')
        self.assertTrue(payload.startswith(b"%PDF"))

    def test_unknown_format(self):
        with self.assertRaises(ValidationError):
            emit_results(self.result, 'xlsx')


class SweepCommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _sweep(self, name, overrides=TINY_SWEEP, **options):
        path = Path(self.tmp.name) / name
        out = StringIO()
        call_command('sweep', preset='tiny', overrides=list(overrides), output=str(path), verbosity=0,
                     stdout=out, stderr=StringIO(), **options)
        return path, out.getvalue()

    def test_csv_output(self):
        path, out = self._sweep('sweep.csv')
        frame = pd.read_csv(path)
        self.assertEqual(list(frame.columns), CSV_COLUMNS)
        self.assertEqual(list(frame['strategy']), [CACHE_MOST_POPULAR] * 2 + [CACHE_NONE] * 2)
        self.assertEqual(list(frame['value']), [30e6, 60e6] * 2)
        self.assertIn("drops feasible", out)

    def test_repeat_gives_identical_bytes(self):
        first, _ = self._sweep('a.json', fmt='json')
        second, _ = self._sweep('b.json', fmt='json', threads=2)
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_structured_output(self):
        path, _ = self._sweep('sweep.json', fmt='json')
        result = load_results(path.read_bytes())
        self.assertEqual(result.spec.param, SWEEP_FRONTHAUL)
        self.assertEqual(result.spec.values, (30e6, 60e6))
        self.assertEqual(result.spec.seed, 7)
        self.assertEqual(result.spec.template.min_rate, 1e6)

    def test_pdf_output(self):
        path, _ = self._sweep('sweep.pdf', fmt='pdf')
        self.assertTrue(path.read_bytes().startswith(b"%PDF"))

    def test_pdf_needs_a_file(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('sweep', preset='tiny', overrides=TINY_SWEEP, fmt='pdf', verbosity=0,
                         stdout=StringIO(), stderr=StringIO())
        self.assertEqual(ctx.exception.returncode, exit_codes.INVALID_INPUT)

    def test_empty_strategy_set(self):
        with self.assertRaises(CommandError) as ctx:
            self._sweep('none.csv', overrides=TINY_SWEEP + ['sweep.strategies='])
        self.assertEqual(ctx.exception.returncode, exit_codes.INVALID_INPUT)

    def test_missing_sweep_section(self):
        with self.assertRaises(CommandError) as ctx:
            self._sweep('none.csv', overrides=[])
        self.assertEqual(ctx.exception.returncode, exit_codes.INVALID_INPUT)

    def test_too_many_failed_drops(self):
        spec = tiny_spec(values=(30e6,), num_drops=5)
        failing = SweepResult.from_records(spec, handmade_records(CACHE_NONE) + tuple(
            DropRecord(CACHE_MOST_POPULAR, 30e6, d, STATUS_INFEASIBLE) for d in range(5)))
        with mock.patch('experiments.management.commands.sweep.run_sweep', return_value=failing):
            with self.assertRaises(CommandError) as ctx:
                self._sweep('failing.csv')
        self.assertEqual(ctx.exception.returncode, exit_codes.INFEASIBLE)
        self.assertIn("4 of 10", str(ctx.exception))
        self.assertTrue((Path(self.tmp.name) / 'failing.csv').exists())

    def test_nine_in_ten_is_enough(self):
        spec = tiny_spec(values=(30e6,), strategies=(CACHE_NONE,), num_drops=10)
        records = [DropRecord(CACHE_NONE, 30e6, d, STATUS_FEASIBLE, 1.0 + d) for d in range(9)]
        records.append(DropRecord(CACHE_NONE, 30e6, 9, STATUS_INFEASIBLE))
        with mock.patch('experiments.management.commands.sweep.run_sweep',
                        return_value=SweepResult.from_records(spec, records)):
            _, out = self._sweep('enough.csv')
        self.assertIn("9 of 10 drops feasible", out)


class PresetSweepTests(SimpleTestCase):
    """The shipped presets describe the two published sweep shapes."""

    def _spec(self, overrides=()):
        run_config = load_run_config(preset='paper', overrides=list(overrides), preset_dir=settings.CRAN_PRESET_DIR)
        return spec_from_run_config(run_config, SolverOptions(**run_config.solver))

    def test_fronthaul_sweep_at_fixed_cache_size(self):
        spec = self._spec()
        self.assertEqual(spec.param, SWEEP_FRONTHAUL)
        self.assertEqual(spec.template.cache_size, 5)
        self.assertEqual(spec.template.min_rate, 20e6)
        self.assertEqual(spec.solver.mode, 'greedy')
        self.assertEqual(spec.strategies, (CACHE_MOST_POPULAR, CACHE_PROBABILISTIC, CACHE_NONE))

    def test_cache_size_sweep_at_fixed_fronthaul(self):
        spec = self._spec(['sweep.param=cache_size', 'sweep.values=1,2,5,10,20'])
        self.assertEqual(spec.param, SWEEP_CACHE_SIZE)
        self.assertEqual(spec.values, (1, 2, 5, 10, 20))
        self.assertEqual(spec.template.fronthaul_capacity, 80e6)

    def test_unitless_fronthaul_values_rejected(self):
        with self.assertRaises(ValidationError):
            self._spec(['sweep.values=20,40'])


def paired_upper_bound(result, better, worse):
    """
    Upper end of the one-sided 95% interval for the mean paired difference
    better - worse (W per RRH) over drops where both succeeded.
    """
    diffs = []
    for value in result.spec.values:
        a = {r.drop: r.total_power for r in result.point(better, value).records if r.succeeded}
        b = {r.drop: r.total_power for r in result.point(worse, value).records if r.succeeded}
        diffs.extend((a[d] - b[d]) / result.spec.num_rrhs for d in sorted(a.keys() & b.keys()))
    diffs = np.array(diffs)
    return diffs.mean() + 1.96 * diffs.std(ddof=1) / math.sqrt(diffs.size)


def nonincreasing_share(curve, rel=1e-6):
    pairs = list(zip(curve, curve[1:]))
    return sum(1 for a, b in pairs if b <= a * (1 + rel)) / len(pairs)


@skipUnless(SLOW, "desk-scale sweeps run only with CRAN_SLOW_TESTS=1")
class TrendTests(SimpleTestCase):
    """Desk-scale sweeps (M=3, K=4, N=16, F=10, 20 paired drops)."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        run_config = load_run_config(preset='desk', preset_dir=settings.CRAN_PRESET_DIR)
        solver = SolverOptions(**run_config.solver)
        threads = max(settings.CRAN_THREADS, 1)
        cls.fronthaul = run_sweep(spec_from_run_config(run_config, solver), threads=threads)
        cache_config = load_run_config(preset='desk', preset_dir=settings.CRAN_PRESET_DIR, overrides=[
            'sweep.param=cache_size', 'sweep.values=0,1,2,3,4,5', 'sweep.strategies=most_popular'])
        cls.cache = run_sweep(spec_from_run_config(cache_config, solver), threads=threads)

    def test_most_popular_not_worse_than_probabilistic_or_none(self):
        self.assertLessEqual(paired_upper_bound(self.fronthaul, CACHE_MOST_POPULAR, CACHE_NONE), 1e-9)
        self.assertLessEqual(paired_upper_bound(self.fronthaul, CACHE_MOST_POPULAR, CACHE_PROBABILISTIC), 1e-9)
        self.assertLessEqual(paired_upper_bound(self.fronthaul, CACHE_PROBABILISTIC, CACHE_NONE), 1e-9)

    def test_power_falls_with_fronthaul_capacity(self):
        self.assertGreaterEqual(nonincreasing_share(self.fronthaul.mean_curve(CACHE_NONE)), 0.8)

    def test_caching_saves_less_with_more_fronthaul(self):
        saving = self.fronthaul.mean_curve(CACHE_NONE) - self.fronthaul.mean_curve(CACHE_MOST_POPULAR)
        self.assertLessEqual(saving[-1], saving[0])

    def test_power_falls_with_cache_size(self):
        self.assertGreaterEqual(nonincreasing_share(self.cache.mean_curve(CACHE_MOST_POPULAR)), 0.8)
