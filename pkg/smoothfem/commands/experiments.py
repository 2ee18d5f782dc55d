import click

from smoothfem.commands import build_config, experiment_options, handle_errors, report_files
from smoothfem.services.experiment_service import ExperimentService


@click.command('projection-errors')
@experiment_options
@click.option('--mesh-kind', type=click.Choice(['tri', 'quad']), help='Element family')
@click.option('--distortion', type=float, help='Interior vertex distortion in [0, 0.5)')
@handle_errors
def projection_errors(mesh_kind, distortion, **options):
    """Best piecewise-constant approximation errors of the reference strain."""
    config = build_config(mesh_kind=mesh_kind, distortion=distortion, **options)
    rows, files = ExperimentService.cmd_projection_errors(config)
    for row in rows:
        click.echo(f"{row['mesh']:<9} N={row['n']:<4} W_h={row['W_h']:.4e} "
                   f"W_1h={row['W_1h']:.4e} W_2h={row['W_2h']:.4e}")
    report_files(files)


@click.command('convergence')
@experiment_options
@click.option('--mesh-kind', type=click.Choice(['tri', 'quad']), help='Element family')
@click.option('--distortion', type=float, help='Interior vertex distortion in [0, 0.5)')
@handle_errors
def convergence(mesh_kind, distortion, **options):
    """Relative energy errors and slopes for each method over the mesh sweep."""
    config = build_config(mesh_kind=mesh_kind, distortion=distortion, **options)
    rows, files = ExperimentService.cmd_convergence(config)
    for row in rows:
        slope = '' if row['slope'] is None else f" slope={row['slope']:.3f}"
        click.echo(f"{row['method']:<9} N={row['n']:<4} E_e={row['relative_error']:.4e}{slope}")
    report_files(files)
