import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import norm as sparse_norm

from smoothfem.errors import AssemblyError, SolverError
from smoothfem.models import BlockProblem, DofMap, LinearSystem
from smoothfem.services import AssemblyService, MeshService

GRADIENT = [[1.0e-3, 2.0e-3], [-0.5e-3, 1.5e-3]]
EXACT_STRAIN = np.array([1.0e-3, 1.5e-3, 1.5e-3])

TRI_METHODS = ['fem_t3', 'esfem', 'nsfem', 'sse']
QUAD_METHODS = ['fem_plq4', 'fem_blq4', 'csfem', 'esfem', 'sse']
ALL_CASES = [('T3', m) for m in TRI_METHODS] + [('Q4', m) for m in QUAD_METHODS] + [('Q9', 'fem_q9')]


def build(kind, n, **kwargs):
    generator = {'T3': MeshService.generate_regular_tri, 'Q4': MeshService.generate_regular_quad,
                 'Q9': MeshService.generate_regular_q9}[kind]
    return generator(n, **kwargs)


def hand_t3_stiffness(mesh, D):
    """Dense textbook assembly of the constant-strain triangle"""
    K = np.zeros((mesh.n_dofs, mesh.n_dofs))
    for nodes in mesh.elements:
        (x1, y1), (x2, y2), (x3, y3) = mesh.vertices[nodes]
        two_a = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
        B = np.array([
            [y2 - y3, 0, y3 - y1, 0, y1 - y2, 0],
            [0, x3 - x2, 0, x1 - x3, 0, x2 - x1],
            [x3 - x2, y2 - y3, x1 - x3, y3 - y1, x2 - x1, y1 - y2],
        ]) / two_a
        dofs = np.ravel([[2 * v, 2 * v + 1] for v in nodes])
        K[np.ix_(dofs, dofs)] += 0.5 * two_a * B.T @ D @ B
    return K


def test_t3_stiffness_matches_hand_assembly(material):
    mesh = MeshService.generate_regular_tri(2, pattern='union_jack')
    K = AssemblyService.assemble_stiffness(mesh, material, 'fem_t3').K.toarray()
    expected = hand_t3_stiffness(mesh, material.D)
    assert np.abs(K - expected).max() <= 1e-12 * np.abs(expected).max()


@pytest.mark.parametrize('kind, method', ALL_CASES)
def test_load_integrates_body_force(kind, method):
    mesh = build(kind, 1)
    F = AssemblyService.assemble_load(mesh, BlockProblem.block(), method)
    assert F[0::2].sum() == pytest.approx(-1.0 / 3.0, abs=1e-13)
    assert F[1::2].sum() == pytest.approx(2.0 / 3.0, abs=1e-13)


# Vertices of the N=1 grid are (0,0), (1,0), (0,1), (1,1)
CLOSED_FORM_LOADS = {
    'p1': ([-1 / 15, -1 / 60, -1 / 10, -3 / 20], [4 / 15, 1 / 15, 3 / 20, 11 / 60]),
    'bl': ([-1 / 24, -1 / 24, -1 / 8, -1 / 8], [5 / 24, 1 / 8, 5 / 24, 1 / 8]),
}


@pytest.mark.slow
@pytest.mark.parametrize('kind, method, space', [
    ('T3', 'fem_t3', 'p1'), ('T3', 'esfem', 'p1'), ('T3', 'nsfem', 'p1'), ('T3', 'sse', 'p1'),
    ('Q4', 'fem_blq4', 'bl'), ('Q4', 'csfem', 'bl'),
])
def test_load_entries_match_closed_form(kind, method, space):
    mesh = build(kind, 1, pattern='slash') if kind == 'T3' else build(kind, 1)
    F = AssemblyService.assemble_load(mesh, BlockProblem.block(), method)
    fx, fy = CLOSED_FORM_LOADS[space]
    assert np.abs(F[0::2] - fx).max() <= 1e-12
    assert np.abs(F[1::2] - fy).max() <= 1e-12


@pytest.mark.slow
@pytest.mark.parametrize('n', [2, 4, 8])
@pytest.mark.parametrize('shear', [0.3, -0.5])
def test_sse_routes_agree_on_parallelograms(material, n, shear):
    mesh = MeshService.skew_mesh(build('Q4', n), shear)
    smoothing = AssemblyService.assemble_stiffness(mesh, material, 'sse').K
    projection = AssemblyService.assemble_stiffness(mesh, material, 'sse', route='projection').K
    assert sparse_norm(smoothing - projection) <= 1e-10 * sparse_norm(smoothing)


@pytest.mark.parametrize('kind, method', ALL_CASES)
def test_stiffness_is_symmetric_with_rigid_kernel(material, kind, method):
    mesh = build(kind, 3)
    if kind != 'Q9':
        mesh = MeshService.distort_mesh(mesh, 0.2, seed=5)
    K = AssemblyService.assemble_stiffness(mesh, material, method)
    assert K.asymmetry() == 0.0
    modes = AssemblyService.rigid_body_modes(mesh)
    scale = abs(K.K).max()
    assert np.abs(K.K @ modes).max() <= 1e-10 * scale


@pytest.mark.parametrize('kind, method', [case for case in ALL_CASES if case[0] != 'Q9'])
def test_patch_reproduced_on_distorted_mesh(kind, method):
    mesh = MeshService.distort_mesh(build(kind, 4, dirichlet='all'), 0.2, seed=11)
    solution = AssemblyService.solve_method(mesh, BlockProblem.patch(GRADIENT), method)
    exact = (mesh.vertices @ np.asarray(GRADIENT).T).ravel()
    assert np.abs(solution.displacement - exact).max() <= 1e-12
    assert np.abs(solution.strains - EXACT_STRAIN).max() <= 1e-9 * np.abs(EXACT_STRAIN).max()


def test_sse_routes_agree_on_triangles(material, distorted_tri):
    smoothing = AssemblyService.assemble_stiffness(distorted_tri, material, 'sse').K
    projection = AssemblyService.assemble_stiffness(distorted_tri, material, 'sse', route='projection').K
    assert abs(smoothing - projection).max() <= 1e-12 * abs(smoothing).max()


def test_method_must_fit_mesh(tri_mesh, quad_mesh, material):
    with pytest.raises(AssemblyError, match='Q4'):
        AssemblyService.assemble_stiffness(tri_mesh, material, 'csfem')
    with pytest.raises(AssemblyError, match='T3'):
        AssemblyService.assemble_stiffness(quad_mesh, material, 'nsfem')
    with pytest.raises(AssemblyError, match='unknown method'):
        AssemblyService.assemble_stiffness(tri_mesh, material, 'xfem')
    with pytest.raises(AssemblyError, match='route'):
        AssemblyService.strain_operator(tri_mesh, 'sse', route='shortcut')


def test_dirichlet_lifting_moves_load():
    K = sp.csr_matrix(np.array([[2.0, -1.0, 0.0, 0.0], [-1.0, 2.0, -1.0, 0.0],
                                [0.0, -1.0, 2.0, -1.0], [0.0, 0.0, -1.0, 2.0]]))
    dofmap = DofMap(2, [1])
    system = LinearSystem(K, np.zeros(4), 'toy')
    reduced = AssemblyService.apply_dirichlet(system, dofmap, [1.0, 2.0])
    assert reduced.size == 2
    assert np.allclose(reduced.F, [0.0, 1.0])
    u = AssemblyService.solve(reduced)
    assert np.allclose(dofmap.expand(u, [1.0, 2.0]), [1.0 / 3.0, 2.0 / 3.0, 1.0, 2.0])
    with pytest.raises(AssemblyError, match='already reduced'):
        AssemblyService.apply_dirichlet(reduced, dofmap)


def test_fully_constrained_system_solves_to_empty():
    dofmap = DofMap(1, [0])
    reduced = AssemblyService.apply_dirichlet(LinearSystem(sp.identity(2)), dofmap, [0.5, 0.5])
    assert AssemblyService.solve(reduced).size == 0
    with pytest.raises(AssemblyError, match='nothing to solve'):
        AssemblyService.apply_dirichlet(LinearSystem(sp.identity(2)), dofmap, allow_empty=False)


def test_singular_system_raises_solver_error():
    system = LinearSystem(sp.diags([1.0, 0.0, 1.0]), np.ones(3), 'toy')
    with pytest.raises(SolverError):
        AssemblyService.solve(system)


def test_indefinite_system_reports_pivot():
    system = LinearSystem(sp.diags([1.0, -2.0]), np.ones(2), 'toy')
    with pytest.raises(SolverError) as excinfo:
        AssemblyService.solve(system)
    assert excinfo.value.context['smallest_pivot'] < 0
    assert 'smallest eigenvalue' in excinfo.value.message


def test_unconstrained_block_is_rejected():
    mesh = MeshService.generate_regular_tri(2, dirichlet='none')
    with pytest.raises(AssemblyError, match='no Dirichlet'):
        AssemblyService.solve_method(mesh, BlockProblem.block(), 'fem_t3')


def test_solution_reports_statistics(tri_mesh):
    solution = AssemblyService.solve_method(tri_mesh, BlockProblem.block(), 'sse')
    assert solution.n_free == 2 * (tri_mesh.n_vertices - 3)
    assert solution.residual <= 1e-10
    assert solution.smallest_pivot > 0
    assert np.all(solution.displacement[:6] == 0.0)
