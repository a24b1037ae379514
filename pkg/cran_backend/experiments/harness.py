"""
Runs sweeps: one dual solve + primal recovery per (strategy, value, drop).

Drops are independent, so with `threads > 1` they go to a process pool.
Records are regrouped by key afterwards and every aggregate sorts before
summing, so the result does not depend on completion order.
"""

import logging
import sys
from concurrent.futures import ProcessPoolExecutor

from django.core.exceptions import ValidationError
from tqdm import tqdm

from dual_solver.runner import solve_scenario
from scenarios.generators import cache_hit_ratio, generate_scenario

from .models import DEFAULT_NUM_DROPS, STATUS_ERROR, DropRecord, SweepResult, SweepSpec

logger = logging.getLogger(__name__)


def scenario_for(drop, strategy, value, spec):
    return generate_scenario(spec.config_for(strategy, value), spec.seed, drop)


def run_drop(drop, strategy, value, spec):
    """Solve one drop; solver outcomes (and scenario errors) end up in the record, never raised."""
    try:
        scenario = scenario_for(drop, strategy, value, spec)
        report = solve_scenario(scenario, spec.solver)
    except ValidationError as exc:
        message = " ".join(str(m) for m in exc.messages)
        logger.warning("drop %d (%s, %s=%s) failed: %s", drop, strategy, spec.param, value, message)
        return DropRecord(strategy=strategy, value=value, drop=drop, status=STATUS_ERROR, error=message)

    return DropRecord(
        strategy=strategy,
        value=value,
        drop=drop,
        status=report.status,
        total_power=report.primal_power,
        dual_bound=report.dual_bound,
        gap=report.gap,
        iterations=report.ellipsoid.iterations,
        cache_hit_ratio=cache_hit_ratio(scenario.content),
        error=report.error,
    )


def _run_task(args):
    strategy, value, drop, spec = args
    return run_drop(drop, strategy, value, spec)


def run_sweep(spec, threads=1, progress=False):
    tasks = [(strategy, value, drop, spec) for strategy, value, drop in spec.tasks()]
    logger.info("sweep over %s: %d value(s) x %d strateg%s x %d drop(s) on %d worker(s)",
                spec.param, len(spec.values), len(spec.strategies),
                'y' if len(spec.strategies) == 1 else 'ies', spec.num_drops, threads)

    bar = tqdm(total=len(tasks), desc="drops", file=sys.stderr, disable=not progress)
    records = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for record in pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))):
                records.append(record)
                bar.update()
    else:
        for task in tasks:
            records.append(_run_task(task))
            bar.update()
    bar.close()

    result = SweepResult.from_records(spec, records)
    failed = sum(1 for r in records if not r.succeeded)
    if failed:
        logger.warning("%d of %d drop(s) without a feasible allocation", failed, len(records))
    return result


def spec_from_run_config(run_config, solver_options):
    """SweepSpec from a run configuration's `sweep` section and its scenario template."""
    if not run_config.sweep:
        raise ValidationError({'sweep': "the run configuration has no sweep section"})
    section = run_config.sweep
    kwargs = {}
    if 'strategies' in section:
        kwargs['strategies'] = tuple(section['strategies'])
    return SweepSpec(
        param=section['param'],
        values=tuple(section['values']),
        template=run_config.scenario,
        num_drops=section.get('num_drops', DEFAULT_NUM_DROPS),
        seed=run_config.seed,
        solver=solver_options,
        **kwargs,
    )
