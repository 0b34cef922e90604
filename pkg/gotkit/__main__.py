#!/usr/bin/env python

from __future__ import annotations

import io
import logging
import os
import shutil
import sys
import textwrap

import click
import yaml

from .commands.selfcheck import INJECTIONS, SUITES
from .exceptions import ValidationError
from .info import __version__

log = logging.getLogger(__name__)

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_SELFCHECK = 3


class ColorFormatter(logging.Formatter):
    colors = {
        'CRITICAL': 'red',
        'ERROR': 'red',
        'WARNING': 'yellow',
        'DEBUG': 'blue',
    }

    text_wrapper = textwrap.TextWrapper(
        width=shutil.get_terminal_size(fallback=(0, 0)).columns,
        replace_whitespace=False,
        break_long_words=False,
        break_on_hyphens=False,
        initial_indent=' ' * 11,
        subsequent_indent=' ' * 11,
    )

    def format(self, record):
        message = super().format(record)
        prefix = f'{record.levelname:<8}-  '
        if record.levelname in self.colors:
            prefix = click.style(prefix, fg=self.colors[record.levelname])
        if self.text_wrapper.width:
            # Only wrap text if a terminal width was detected
            msg = '\n'.join(self.text_wrapper.fill(line) for line in message.splitlines())
            # Prepend prefix after wrapping so that color codes don't affect length
            return prefix + msg[11:]
        return prefix + message


class State:
    """Maintain logging level and the global experiment overrides."""

    def __init__(self, log_name='gotkit', level=logging.INFO):
        self.logger = logging.getLogger(log_name)
        # Don't restrict level on logger; use handler
        self.logger.setLevel(1)
        self.logger.propagate = False

        self.stream = logging.StreamHandler()
        self.stream.setFormatter(ColorFormatter())
        self.stream.setLevel(level)
        self.stream.name = 'GotkitStreamHandler'
        self.logger.addHandler(self.stream)

        self.seed = None
        self.out = None

    def __del__(self):
        self.logger.removeHandler(self.stream)


def add_options(*opts):
    def inner(f):
        for i in reversed(opts):
            f = i(f)
        return f

    return inner


def verbose_option(f):
    def callback(ctx, param, value):
        state = ctx.ensure_object(State)
        if value:
            state.stream.setLevel(logging.DEBUG)

    return click.option(
        '-v',
        '--verbose',
        is_flag=True,
        expose_value=False,
        help='Enable verbose output',
        callback=callback,
    )(f)


def quiet_option(f):
    def callback(ctx, param, value):
        state = ctx.ensure_object(State)
        if value:
            state.stream.setLevel(logging.ERROR)

    return click.option(
        '-q',
        '--quiet',
        is_flag=True,
        expose_value=False,
        help='Silence warnings',
        callback=callback,
    )(f)


def color_option(f):
    def callback(ctx, param, value):
        state = ctx.ensure_object(State)
        if value is False or (
            value is None
            and (
                not sys.stdout.isatty()
                or os.environ.get('NO_COLOR')
                or os.environ.get('TERM') == 'dumb'
            )
        ):
            state.stream.setFormatter(logging.Formatter('%(levelname)-8s-  %(message)s'))

    return click.option(
        '--color/--no-color',
        is_flag=True,
        default=None,
        expose_value=False,
        help="Force enable or disable color and wrapping for the output. Default is auto-detect.",
        callback=callback,
    )(f)


def seed_option(f):
    def callback(ctx, param, value):
        state = ctx.ensure_object(State)
        if value is not None:
            state.seed = value

    return click.option(
        '--seed',
        type=click.IntRange(0, 2 ** 64 - 1),
        default=None,
        expose_value=False,
        help='Master seed of the Monte-Carlo replications (overrides the config).',
        callback=callback,
    )(f)


def out_option(f):
    def callback(ctx, param, value):
        state = ctx.ensure_object(State)
        if value is not None:
            state.out = value

    return click.option(
        '--out',
        type=click.Path(file_okay=False),
        default=None,
        expose_value=False,
        help='Output directory (overrides the config).',
        callback=callback,
    )(f)


common_options = add_options(quiet_option, verbose_option)
experiment_options = add_options(seed_option, out_option)

PYTHON_VERSION = f"{sys.version_info.major}.{sys.version_info.minor}"

PKG_DIR = os.path.dirname(os.path.abspath(__file__))


class GotkitGroup(click.Group):
    """Maps library errors to exit codes: 1 for invalid input, 2 for anything else."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (click.exceptions.ClickException, click.exceptions.Exit, click.exceptions.Abort):
            raise
        except (ValidationError, yaml.YAMLError) as e:
            log.error(str(e))
            ctx.exit(EXIT_VALIDATION)
        except Exception as e:
            log.error(f'{type(e).__name__}: {e}')
            log.debug('Traceback', exc_info=True)
            ctx.exit(EXIT_RUNTIME)


def load_config(path):
    """Validated config with the global --seed and --out applied."""
    from .commands import validate_config

    state = click.get_current_context().ensure_object(State)
    return validate_config(path).with_overrides(seed=state.seed, output=state.out)


config_argument = click.argument('config_file', type=click.Path(dir_okay=False))


@click.group(name='gotkit', cls=GotkitGroup,
             context_settings=dict(help_option_names=['-h', '--help'], max_content_width=120))
@click.version_option(
    __version__,
    '-V',
    '--version',
    message=f'%(prog)s, version %(version)s from { PKG_DIR } (Python { PYTHON_VERSION })',
)
@common_options
@experiment_options
@color_option
def cli():
    """
    gotkit - goal-oriented sampling experiments.
    """


@cli.command(name='validate')
@config_argument
@common_options
def validate_command(config_file):
    """Validate an experiment config"""
    cfg = load_config(config_file)
    log.info(f'{cfg.name}: |S|={cfg.system.n_status}, |D|={cfg.system.source.n_decisions}, '
             f'|V|={cfg.system.n_env}, {len(cfg.policies)} policies')
    click.echo(f'{config_file}: ok')


@cli.command(name='compare')
@config_argument
@click.option('-j', '--workers', type=click.IntRange(1), default=None, help='Run replications on a process pool.')
@common_options
@experiment_options
def compare_command(config_file, workers):
    """Compare the configured policies, exactly and by simulation"""
    from .commands import compare
    from .commands.compare import REPORT_COLUMNS
    from .core.formats import write_csv

    report = compare(load_config(config_file), workers)
    buffer = io.StringIO()
    write_csv(buffer, REPORT_COLUMNS, (row.values() for row in report.rows))
    click.echo(buffer.getvalue(), nl=False)


@cli.command(name='timeseries')
@config_argument
@click.option('-p', '--policy', 'policy_name', required=True, help='Policy name or kind.')
@click.option('--horizon', type=click.IntRange(1), default=None, help='Number of slots (default: config horizon).')
@click.option('--metrics', is_flag=True, help='Append AoI, AoS, VoI, MSE, AoII and UoI columns.')
@common_options
@experiment_options
def timeseries_command(config_file, policy_name, horizon, metrics):
    """Write the per-slot evolution of one policy"""
    from .commands import timeseries

    path = timeseries(load_config(config_file), policy_name, horizon, metrics)
    click.echo(path)


@cli.command(name='solve')
@config_argument
@click.option('-p', '--policy', 'policy_name', required=True, help='Name or kind of an optimal policy.')
@common_options
@experiment_options
def solve_command(config_file, policy_name):
    """Solve the sampling MDP of an optimal policy and save the solution"""
    from .commands import solve

    path = solve(load_config(config_file), policy_name)
    click.echo(path)


@cli.command(name='tensor')
@config_argument
@click.option('--classify', is_flag=True, help='Report the structure of the tensor instead of its entries.')
@common_options
def tensor_command(config_file, classify):
    """Print the configured GoT or its structure report"""
    from .commands import tensor_dump, tensor_report
    from .core.formats import dump_yaml

    cfg = load_config(config_file)
    click.echo(dump_yaml(tensor_report(cfg) if classify else tensor_dump(cfg)), nl=False)


@cli.command(name='sweep')
@config_argument
@click.option('-p', '--policy', 'policy_name', required=True, help='Policy name or kind.')
@click.option('--lambdas', default='0,0.5,1,2,5', show_default=True, help='Comma separated sampling prices.')
@common_options
@experiment_options
def sweep_command(config_file, policy_name, lambdas):
    """Exact loss and sample rate of a policy over sampling prices"""
    from .commands import sweep

    try:
        values = [float(v) for v in lambdas.split(',') if v.strip()]
    except ValueError:
        values = []
    if not values:
        raise ValidationError(f'not a list of numbers: {lambdas!r}', '--lambdas')
    path = sweep(load_config(config_file), policy_name, values)
    click.echo(path)


@cli.command(name='selfcheck')
@click.option('-c', '--config', 'config_file', type=click.Path(dir_okay=False), default=None,
              help='Config to check (default: the shipped reference).')
@click.option('-s', '--suite', 'suites', multiple=True,
              type=click.Choice(SUITES),
              help='Run only these suites (repeatable).')
@click.option('--inject', type=click.Choice(INJECTIONS), default=None, hidden=True)
@click.option('-j', '--workers', type=click.IntRange(1), default=None, help='Run replications on a process pool.')
@common_options
def selfcheck_command(config_file, suites, inject, workers):
    """Run the property suites and print a pass/fail table"""
    from .commands import run_selfcheck, write_table

    results = run_selfcheck(config_file, inject, suites or SUITES, workers)
    buffer = io.StringIO()
    write_table(buffer, results)
    click.echo(buffer.getvalue(), nl=False)
    if not all(r.passed for r in results):
        click.get_current_context().exit(EXIT_SELFCHECK)


if __name__ == '__main__':  # pragma: no cover
    cli()
