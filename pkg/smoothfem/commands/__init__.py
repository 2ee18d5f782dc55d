import functools
import logging
import sys

import click

from smoothfem.config import load_config
from smoothfem.errors import SmoothFemError

logger = logging.getLogger('commands')


def _list(value):
    return value if value else None


def experiment_options(func):
    """Options shared by every experiment command"""
    options = [
        click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='key = value config file'),
        click.option('--out', help='Output directory'),
        click.option('--method', 'methods', help='Comma-separated method list'),
        click.option('--n', 'n', help='Comma-separated, strictly increasing mesh sizes'),
        click.option('--seed', type=int, help='Distortion seed'),
        click.option('--pattern', type=click.Choice(['slash', 'backslash', 'union_jack']),
                     help='Triangulation diagonal pattern'),
        click.option('--parallel/--sequential', default=None, help='Run independent cells on worker threads'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_config(config_path, out, methods, n, seed, pattern, parallel, **extra):
    overrides = {'out': out, 'methods': _list(methods), 'n': _list(n), 'seed': seed,
                 'pattern': pattern, 'parallel': parallel}
    overrides.update(extra)
    return load_config(config_path, overrides)


def handle_errors(func):
    """One `smoothfem-error[CODE]: message` line on stderr and exit status 2"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SmoothFemError as e:
            click.echo(e.to_line(), err=True)
            sys.exit(2)
        except click.ClickException:
            raise
        except Exception as e:
            logger.exception(f"Unexpected failure: {e}")
            click.echo(f"smoothfem-error[INTERNAL]: {e}", err=True)
            sys.exit(1)

    return wrapper


def report_files(files):
    for path in files:
        click.echo(f"wrote {path}")


class CommandLineError(click.ClickException):
    """Click failure printed as one `smoothfem-error[CODE]: message` line"""
    exit_code = 2

    def __init__(self, message, code='USAGE'):
        super().__init__(' '.join(str(message).split()))
        self.code = code

    def show(self, file=None):
        click.echo(f"smoothfem-error[{self.code}]: {self.format_message()}", file=file, err=True)


def _as_command_line_error(e):
    if isinstance(e, CommandLineError):
        return e
    code = 'USAGE' if isinstance(e, click.UsageError) else 'CLI'
    error = CommandLineError(e.format_message(), code)
    error.exit_code = 2 if code == 'USAGE' else e.exit_code
    return error


class SmoothFemGroup(click.Group):
    """Group whose parse and usage errors share the error line format"""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.ClickException as e:
            raise _as_command_line_error(e) from e

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.ClickException as e:
            raise _as_command_line_error(e) from e
