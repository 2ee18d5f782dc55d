import click

from smoothfem.commands import build_config, experiment_options, handle_errors, report_files
from smoothfem.errors import AnalysisError
from smoothfem.services.experiment_service import ExperimentService


@click.command('equivalence-check')
@experiment_options
@click.option('--mesh-kind', type=click.Choice(['tri', 'quad']), help='Element family')
@click.option('--distortion', type=float, help='Interior vertex distortion in [0, 0.5)')
@click.option('--tolerance', 'equivalence_tolerance', type=float, help='Pass threshold on the relative gap')
@handle_errors
def equivalence_check(mesh_kind, distortion, equivalence_tolerance, **options):
    """Compare the two SSE stiffness routes on each mesh of the sweep."""
    config = build_config(mesh_kind=mesh_kind, distortion=distortion,
                          equivalence_tolerance=equivalence_tolerance, **options)
    rows, files = ExperimentService.cmd_equivalence_check(config)
    for row in rows:
        status = 'pass' if row['passed'] else ('FAIL' if row['expected'] else 'differs')
        click.echo(f"{row['mesh']:<9} N={row['n']:<4} gap={row['gap']:.3e} {status}")
    report_files(files)
    failed = [row for row in rows if row['expected'] and not row['passed']]
    if failed:
        raise AnalysisError(f"stiffness routes differ on {len(failed)} mesh(es) where they must agree "
                            f"(first: N={failed[0]['n']}, gap {failed[0]['gap']:.3e})")


@click.command('verify')
@experiment_options
@handle_errors
def verify(methods=None, **options):
    """Rigid-mode, patch and isotropy checks for every method."""
    config = build_config(methods=None, **options)
    selected = [m.strip() for m in methods.split(',')] if methods else None
    rows, files = ExperimentService.cmd_verify(config, selected)
    for row in rows:
        click.echo(f"{row['check']:<13} {row['method']:<9} {row['mesh_kind']:<5} {row['mesh']:<9} "
                   f"{row['value']:.3e} {'pass' if row['passed'] else 'FAIL'}")
    report_files(files)
    failed = [row for row in rows if not row['passed']]
    if failed:
        first = failed[0]
        raise AnalysisError(f"{len(failed)} verification check(s) failed; first: {first['method']} on "
                            f"{first['mesh']} {first['mesh_kind']} mesh violates {first['check']}")
