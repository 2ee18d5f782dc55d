import click

from smoothfem.commands import handle_errors
from smoothfem.config.experiment import DIRICHLET_SIDES, PATTERNS
from smoothfem.services.mesh_service import MeshService
from smoothfem.utils.mesh_io import read_mesh, write_mesh


@click.group('mesh')
def mesh():
    """Write generated meshes to files and inspect mesh files."""


@mesh.command('export')
@click.argument('path', type=click.Path(dir_okay=False, writable=True))
@click.option('--kind', type=click.Choice(['tri', 'quad', 'q9']), default='tri', show_default=True)
@click.option('--n', 'n', type=int, default=4, show_default=True, help='Squares per side')
@click.option('--pattern', type=click.Choice(PATTERNS), default='slash', show_default=True)
@click.option('--distortion', type=float, default=0.0, show_default=True)
@click.option('--seed', type=int, default=1, show_default=True)
@click.option('--dirichlet', type=click.Choice(DIRICHLET_SIDES), default='bottom', show_default=True)
@handle_errors
def export(path, kind, n, pattern, distortion, seed, dirichlet):
    """Generate a grid mesh and write it to PATH."""
    if kind == 'tri':
        generated = MeshService.generate_regular_tri(n, pattern, dirichlet=dirichlet)
    elif kind == 'quad':
        generated = MeshService.generate_regular_quad(n, dirichlet=dirichlet)
    else:
        generated = MeshService.generate_regular_q9(n, dirichlet=dirichlet)
    if distortion > 0:
        generated = MeshService.distort_mesh(generated, distortion, seed)
    write_mesh(generated, path)
    click.echo(f"wrote {path}: {generated.kind}, {generated.n_vertices} vertices, "
               f"{generated.n_elements} elements")


@mesh.command('import')
@click.argument('path', type=click.Path(exists=True, dir_okay=False))
@handle_errors
def import_(path):
    """Read and validate the mesh file at PATH."""
    loaded = read_mesh(path)
    dirichlet = sum(tag == 'D' for tag in loaded.boundary_tags)
    click.echo(f"{loaded.kind} mesh: {loaded.n_vertices} vertices, {loaded.n_elements} elements, "
               f"{len(loaded.boundary_edges)} boundary edges ({dirichlet} Dirichlet), area {loaded.area!r}")
