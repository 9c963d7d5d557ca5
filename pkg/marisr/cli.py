"""
Command-line scripts for marisr.

This file defines the commands of the `marisr` console script. Broadly, these
scripts can do the following:

    * Optimize one configuration for one or more seeds (`run`).
    * Sweep one parameter axis over a list of values (`sweep`).
    * Re-check saved results against sampled channel errors (`verify`).
    * Run development reports (style checks/unit tests).

Each script tries to be a courteous command-line citizen, implementing exit
codes and responding to `marisr --help` in useful ways. The experiment commands
exit with 0 only when every run completed and every verification passed.

Attributes:
    RESULTS_CSV: File name of the results table written by `run` and `sweep`.
"""

import click
import os
import sys
from flask.cli import FlaskGroup
from subprocess import call
from marisr import app
from marisr.models.run import SCHEMES, SWEEP_AXES, InvalidConfig, RunConfig, RunResult
from marisr.utils import RunConfigFileError, load_run_config

RESULTS_CSV = 'results.csv'


def load_config(config_path=None, **overrides):
    """
    Layer an optional TOML run file over app.config and build a RunConfig.

    Args:
        config_path: Optional path to a TOML run configuration file.
        overrides: RunConfig field values from the command line; None values
            are ignored.

    Returns:
        Validated RunConfig instance.

    Raises:
        click.ClickException: The file or the resulting values are unusable.
    """
    try:
        if config_path is not None:
            app.config.from_mapping(load_run_config(config_path, known_keys=RunConfig.keys()))
        return RunConfig.from_mapping(app.config, **overrides)
    except (RunConfigFileError, InvalidConfig) as exc:
        raise click.ClickException(str(exc))


def _report(outcomes, output_dir):
    failed = [outcome for outcome in outcomes if outcome.error is not None]
    unverified = [outcome for outcome in outcomes if outcome.error is None and not outcome.passed]

    for outcome in failed:
        print(f"FAILED seed {outcome.row['seed']} ({outcome.row['scheme']}): {outcome.error}")
    for outcome in unverified:
        print(f'UNVERIFIED {outcome.trace_path}')

    print(f'{len(outcomes)} run(s), {len(failed)} failed, {len(unverified)} unverified. '
          f'Results in {os.path.join(output_dir, RESULTS_CSV)}')

    return 0 if not failed and not unverified else 1


def _common_options(func):
    options = [
        click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                     help='TOML run configuration file.'),
        click.option('--seed', 'seeds', type=int, multiple=True, help='Seed (repeatable).'),
        click.option('--out', 'output_dir', type=click.Path(file_okay=False), help='Output directory.'),
        click.option('--scenario', type=click.Choice(['psr', 'csr']), help='Symbiotic radio scenario.'),
        click.option('--retry-relaxed', is_flag=True, default=None,
                     help='Retry infeasible runs once with the QoS thresholds halved.'),
        click.option('--workers', type=int, help='Number of worker processes.')]

    for option in reversed(options):
        func = option(func)

    return func


@app.cli.command('run')
@_common_options
@click.option('--scheme', type=click.Choice(SCHEMES), help='Optimization scheme.')
def cli_run(config_path, seeds, output_dir, scenario, retry_relaxed, workers, scheme):  # pragma: nocover
    """
    Optimize a single configuration for every configured seed.
    """
    from marisr.sweep import run_sweep

    config = load_config(
        config_path, seeds=seeds or None, output_dir=output_dir, scenario=scenario, scheme=scheme,
        retry_relaxed=retry_relaxed, workers=workers, sweep_name='none')

    outcomes = run_sweep(
        config, client=app.solver_client, output_dir=config.output_dir, csv_name=RESULTS_CSV)

    sys.exit(_report(outcomes, config.output_dir))


@app.cli.command('sweep')
@_common_options
@click.option('--scheme', 'schemes', type=click.Choice(SCHEMES), multiple=True,
              help='Scheme to compare (repeatable; default from config).')
@click.option('--axis', type=click.Choice(list(SWEEP_AXES)), help='Parameter to sweep.')
@click.option('--values', help='Comma-separated sweep values.')
def cli_sweep(config_path, seeds, output_dir, scenario, retry_relaxed, workers, schemes, axis,
              values):  # pragma: nocover
    """
    Sweep one parameter axis and write one CSV row per value, scheme and seed.
    """
    from marisr.sweep import run_sweep

    try:
        sweep_values = None if values is None else [float(v) for v in values.split(',') if v.strip()]
    except ValueError:
        raise click.BadParameter(f'Not a list of numbers: {values}', param_hint='--values')

    config = load_config(
        config_path, seeds=seeds or None, output_dir=output_dir, scenario=scenario,
        retry_relaxed=retry_relaxed, workers=workers, sweep_name=axis, sweep_values=sweep_values)

    outcomes = run_sweep(
        config, client=app.solver_client, output_dir=config.output_dir, schemes=schemes or None,
        csv_name=RESULTS_CSV)

    sys.exit(_report(outcomes, config.output_dir))


@app.cli.command('verify')
@click.argument('trace_files', nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--samples', type=int, help='Number of sampled perturbations per file.')
def cli_verify(trace_files, samples):  # pragma: nocover
    """
    Re-sample channel errors for each saved TRACE_FILES result.
    """
    from marisr.controllers.alternating import verify_robustness

    retcode = 0
    for path in trace_files:
        report = verify_robustness(RunResult.load(path), samples)
        status = 'PASSED' if report.passed else 'FAILED'
        print(
            f'{status} {path}: {report.samples} samples, min rate {report.min_sampled_rate:.6f} '
            f'vs bound {report.reported_bound:.6f}, {report.violations} violation(s)')
        if not report.passed:
            retcode = 1

    sys.exit(retcode)


@app.cli.command('lint')
def cli_lint():  # pragma: nocover
    """
    Lint the Python code using flake8.
    """
    retcode = call(['flake8'])

    if retcode == 0:
        print('No style problems found.')

    sys.exit(retcode)


@app.cli.command('test', context_settings={'ignore_unknown_options': True})
@click.argument('pytest_args', nargs=-1, type=click.UNPROCESSED)
def cli_test(pytest_args):  # pragma: nocover
    """
    Run the unit tests.

    If PYTEST_ARGS is provided, they will be passed to the test runner.
    """
    os.environ['MARISR_CONFIG'] = 'configs/test.py'

    sys.exit(call(['pytest', *pytest_args]))


def main():  # pragma: nocover
    """
    Main entrypoint for the marisr console script.
    """
    group = FlaskGroup(create_app=lambda: app, add_default_commands=False, add_version_option=False)

    return group.main(prog_name='marisr')
