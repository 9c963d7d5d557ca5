"""
Parameter sweeps: one alternating-optimization run per sweep value, seed and
scheme, with a CSV row per run and a JSON trace file per completed run.

This is usually reached through the console script:

    MARISR_CONFIG=configs/dev.py marisr sweep --config sweep.toml --out results

Runs may execute in a process pool; only the parent process writes the CSV.

Attributes:
    CSV_COLUMNS: The exact header of every results table.
    SweepPoint: namedtuple of one run's RunConfig, seed and sweep value.
    PointOutcome: namedtuple returned by run_point().
    logger: Logger instance scoped to the current module name.
"""

import csv
import functools
import logging
import time
from collections import namedtuple
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from marisr.clients.solver import ConicSolverError
from marisr.controllers import BaseController
from marisr.controllers.alternating import AlternatingController, verify_robustness

CSV_COLUMNS = [
    'scenario', 'scheme', 'seed', 'sweep_name', 'sweep_value', 'ao_iters', 'rate_bpshz',
    'secondary_snr_db', 'feasible', 'runtime_s']

SweepPoint = namedtuple('SweepPoint', ['config', 'seed', 'sweep_value'])
PointOutcome = namedtuple('PointOutcome', ['row', 'trace_path', 'error', 'passed'])

logger = logging.getLogger(__name__)


def _format_value(value):
    return '' if value is None else f'{value:g}'


def sweep_points(config, *, schemes=None):
    """
    Every (config, seed, value) combination of a sweep, in output order.

    Args:
        config: RunConfig instance. With sweep_name 'none' there is a single
            point per seed and scheme.
        schemes: Optional list of scheme names to run instead of config.scheme.

    Returns:
        List of SweepPoint instances, ordered by value, then scheme, then seed.
    """
    values = list(config.sweep_values) if config.sweep_name != 'none' else [None]
    schemes = list(schemes or [config.scheme])

    points = []
    for value in values:
        value_config = config if value is None else config.with_sweep_value(value)
        for scheme in schemes:
            scheme_config = value_config.replace(scheme=scheme)
            points.extend(SweepPoint(config=scheme_config, seed=seed, sweep_value=value) for seed in config.seeds)

    return points


def result_row(result):
    """
    CSV row of a completed RunResult.

    A row is feasible when verification found no QoS violation and the run
    did not need relaxed thresholds.
    """
    config = result.config
    feasible = (
        result.robustness is not None and result.robustness.violations == 0 and not result.relaxed)

    return {
        'scenario': config.scenario,
        'scheme': config.scheme,
        'seed': result.seed,
        'sweep_name': config.sweep_name,
        'sweep_value': _format_value(result.sweep_value),
        'ao_iters': result.ao_iters,
        'rate_bpshz': f'{result.rate:.6f}',
        'secondary_snr_db': f'{result.secondary_snr_db:.4f}',
        'feasible': 'true' if feasible else 'false',
        'runtime_s': f'{result.runtime_s:.3f}'}


def failed_row(point, runtime):
    """
    CSV row of a run that raised; rate and SNR stay empty.
    """
    return {
        'scenario': point.config.scenario,
        'scheme': point.config.scheme,
        'seed': point.seed,
        'sweep_name': point.config.sweep_name,
        'sweep_value': _format_value(point.sweep_value),
        'ao_iters': '',
        'rate_bpshz': '',
        'secondary_snr_db': '',
        'feasible': 'false',
        'runtime_s': f'{runtime:.3f}'}


def run_point(point, *, client, output_dir):
    """
    Optimize, verify and store one sweep point.

    Exceptions from the controllers and the solver client are caught and
    reported in the outcome, so a failing point never stops the sweep and
    nothing unpicklable crosses a process boundary.

    Args:
        point: SweepPoint instance.
        client: ConicSolverClient instance.
        output_dir: Directory that receives the traces/ subdirectory.

    Returns:
        PointOutcome instance.
    """
    started = time.perf_counter()
    label = f'{point.config.scenario}/{point.config.scheme} seed {point.seed}'

    try:
        result = AlternatingController.run(
            point.config, client=client, seed=point.seed, sweep_value=point.sweep_value)
    except (BaseController.ControllerError, ConicSolverError) as exc:
        logger.warning(f'Run {label} failed: {exc}')
        return PointOutcome(
            row=failed_row(point, time.perf_counter() - started), trace_path=None,
            error=f'{type(exc).__name__}: {exc}', passed=False)

    result.robustness = verify_robustness(result)
    result.base_path = Path(output_dir)
    path = result.set_storage_data()

    return PointOutcome(row=result_row(result), trace_path=str(path), error=None, passed=result.robustness.passed)


def write_rows(path, rows):
    """
    Write `rows` (dicts keyed by CSV_COLUMNS) to a new CSV file at `path`.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, 'w', newline='') as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)


def run_sweep(config, *, client, output_dir, schemes=None, workers=None, csv_name='results.csv'):
    """
    Run every point of a sweep and write the results table.

    Args:
        config: RunConfig instance.
        client: ConicSolverClient instance.
        output_dir: Directory for the CSV file and the traces/ subdirectory.
        schemes: Optional list of schemes to compare (default config.scheme).
        workers: Process count (default config.workers); 1 runs in-process.
        csv_name: File name of the results table within `output_dir`.

    Returns:
        List of PointOutcome instances, in the order of sweep_points().
    """
    points = sweep_points(config, schemes=schemes)
    workers = config.workers if workers is None else workers
    job = functools.partial(run_point, client=client, output_dir=str(output_dir))

    logger.info(f'Sweep {config.sweep_name}: {len(points)} run(s) on {workers} worker(s)')

    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(job, points))
    else:
        outcomes = [job(point) for point in points]

    for outcome in outcomes:
        row = outcome.row
        logger.info(
            f"{row['scenario']},{row['scheme']},{row['seed']},{row['sweep_value'] or '-'}: "
            f"rate {row['rate_bpshz'] or 'n/a'}, feasible {row['feasible']}")

    csv_path = Path(output_dir) / csv_name
    write_rows(csv_path, [outcome.row for outcome in outcomes])
    logger.info(f'Wrote {len(outcomes)} row(s) to {csv_path}')

    return outcomes
