import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from smoothfem.errors import LocateError, MeshError, MeshFormatError
from smoothfem.models import Mesh
from smoothfem.services import MeshService
from smoothfem.utils.mesh_io import format_mesh, parse_mesh, read_mesh, write_mesh


@pytest.mark.parametrize('pattern', ['slash', 'backslash', 'union_jack'])
def test_regular_triangulation(pattern):
    mesh = MeshService.generate_regular_tri(2, pattern)
    assert mesh.n_vertices == 9
    assert mesh.n_elements == 8
    assert mesh.n_edges == 16
    assert mesh.area == pytest.approx(1.0)
    assert np.allclose(mesh.element_areas, 0.125)
    assert mesh.dirichlet_vertices.tolist() == [0, 1, 2]


def test_regular_quad_and_q9():
    quad = MeshService.generate_regular_quad(3, dirichlet='all')
    assert (quad.n_vertices, quad.n_elements, quad.n_edges) == (16, 9, 24)
    assert len(quad.dirichlet_vertices) == 12
    q9 = MeshService.generate_regular_q9(2)
    assert (q9.n_vertices, q9.n_elements) == (25, 4)
    # Bottom side carries corners and midside nodes
    assert q9.dirichlet_vertices.tolist() == [0, 1, 2, 3, 4]
    assert q9.area == pytest.approx(1.0)


def test_neighbors_are_symmetric(tri_mesh):
    for e, row in enumerate(tri_mesh.neighbors):
        for f in row:
            if f >= 0:
                assert e in tri_mesh.neighbors[f]


def test_free_mesh_has_no_dirichlet_vertices():
    mesh = MeshService.generate_regular_quad(2, dirichlet='none')
    assert len(mesh.dirichlet_vertices) == 0
    assert set(mesh.boundary_tags) == {'N'}


def test_clockwise_element_rejected():
    vertices = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    with pytest.raises(MeshError, match='nonpositive area'):
        Mesh(vertices, [(0, 2, 1)], 'T3', [(0, 1), (1, 2), (2, 0)], ['D', 'N', 'N'])


def test_nonconvex_quad_rejected():
    vertices = [(0.0, 0.0), (1.0, 0.0), (0.3, 0.3), (0.0, 1.0)]
    with pytest.raises(MeshError, match='not convex'):
        Mesh(vertices, [(0, 1, 2, 3)], 'Q4', [(0, 1), (1, 2), (2, 3), (3, 0)], ['D', 'N', 'N', 'N'])


def test_boundary_must_be_tagged():
    vertices = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    with pytest.raises(MeshError, match='boundary edges'):
        Mesh(vertices, [(0, 1, 2)], 'T3', [(0, 1), (1, 2)], ['D', 'N'])


def test_distortion_is_deterministic():
    mesh = MeshService.generate_regular_quad(4)
    first = MeshService.distort_mesh(mesh, 0.3, seed=7)
    second = MeshService.distort_mesh(mesh, 0.3, seed=7)
    other = MeshService.distort_mesh(mesh, 0.3, seed=8)
    assert np.array_equal(first.vertices, second.vertices)
    assert not np.array_equal(first.vertices, other.vertices)
    boundary = mesh.boundary_vertices
    assert np.array_equal(first.vertices[boundary], mesh.vertices[boundary])
    assert first.area == pytest.approx(1.0, rel=1e-12)


def test_zero_distortion_returns_mesh(quad_mesh):
    assert MeshService.distort_mesh(quad_mesh, 0.0, seed=1) is quad_mesh


def test_q9_cannot_be_distorted():
    with pytest.raises(MeshError):
        MeshService.distort_mesh(MeshService.generate_regular_q9(2), 0.1, seed=1)


@pytest.mark.parametrize('kind', ['edge_based', 'interior', 'node_based', 'elementwise'])
def test_subdivisions_partition_the_domain(distorted_tri, kind):
    subdivision = MeshService.subdivision(distorted_tri, kind)
    assert subdivision.total_area == pytest.approx(1.0, rel=1e-12)
    assert np.all(subdivision.areas > 0)


def test_cell_counts(tri_mesh, quad_mesh):
    assert MeshService.subdivision(tri_mesh, 'edge_based').n_cells == tri_mesh.n_edges
    assert MeshService.subdivision(tri_mesh, 'interior').n_cells == 3 * tri_mesh.n_elements
    assert MeshService.subdivision(tri_mesh, 'node_based').n_cells == tri_mesh.n_vertices
    assert MeshService.subdivision(quad_mesh, 'interior').n_cells == 4 * quad_mesh.n_elements
    assert MeshService.subdivision(quad_mesh, 'subtriangle').n_cells == 4 * quad_mesh.n_elements


def test_triangle_cells_carry_a_third_of_each_element(tri_mesh):
    edge = MeshService.subdivision(tri_mesh, 'edge_based')
    interior = MeshService.subdivision(tri_mesh, 'interior')
    assert np.allclose(interior.areas, 0.125 / 3.0)
    boundary = tri_mesh.edge_elements[:, 2] < 0
    assert np.allclose(edge.areas[boundary], 0.125 / 3.0)
    assert np.allclose(edge.areas[~boundary], 0.25 / 3.0)


def test_overlap_marginals(distorted_quad):
    for fine, coarse in [('subtriangle', 'edge_based'), ('edge_based', 'interior'), ('elementwise', 'node_based')]:
        table = MeshService.mesh_overlaps(distorted_quad, fine, coarse)
        assert table.check_marginals()


def test_overlaps_with_itself_are_diagonal(tri_mesh):
    subdivision = MeshService.subdivision(tri_mesh, 'edge_based')
    table = MeshService.compute_overlaps(subdivision, subdivision)
    assert np.allclose(table.matrix.toarray(), np.diag(subdivision.areas), atol=1e-15)


def test_locate_point(tri_mesh):
    element, natural = MeshService.locate_point(tri_mesh, (0.25, 0.1))
    assert element == 0
    assert np.allclose(natural, [0.3, 0.2])
    with pytest.raises(LocateError):
        MeshService.locate_point(tri_mesh, (1.5, 0.5))


def test_rotate_mesh_keeps_areas(distorted_quad):
    rotated = MeshService.rotate_mesh(distorted_quad, angle=0.4, renumber=1)
    assert np.allclose(np.sort(rotated.element_areas), np.sort(distorted_quad.element_areas))
    assert rotated.elements[0].tolist() == np.roll(distorted_quad.elements[0], -1).tolist()


def test_skew_makes_parallelograms(quad_mesh):
    skewed = MeshService.skew_mesh(quad_mesh, 0.5)
    c = skewed.corner_coords
    assert np.allclose(c[:, 0] + c[:, 2], c[:, 1] + c[:, 3])
    assert skewed.area == pytest.approx(1.0)


def test_mesh_file_round_trip(tmp_path, distorted_tri):
    path = tmp_path / 'block.mesh'
    write_mesh(distorted_tri, str(path))
    loaded = read_mesh(str(path))
    assert np.array_equal(loaded.vertices, distorted_tri.vertices)
    assert np.array_equal(loaded.elements, distorted_tri.elements)
    assert loaded.boundary_tags == distorted_tri.boundary_tags
    assert format_mesh(loaded) == path.read_text()


@pytest.mark.parametrize('text, line', [
    ("mesh T3 3 1 3\nv 0 0 0\nv 1 1 0\nv 2 0 x\n", 4),
    ("mesh T3 3 1 3\nv 0 0 0\nv 1 1 0\nv 2 0 1\ne 0 0 1\n", 5),
    ("mesh T3 3 1 3\nv 0 0 0\nv 5 1 0\n", 3),
    ("mesh T3 3 1 3\nv 0 0 0\nv 1 1 0\nv 2 0 1\ne 0 0 1 2\nb 0 1 X\n", 6),
    ("mesh T3 3 1 3\nq 0 0 0\n", 2),
    ("grid T3 3 1 3\n", 1),
])
def test_malformed_mesh_lines(text, line):
    with pytest.raises(MeshFormatError) as excinfo:
        parse_mesh(text)
    assert excinfo.value.line == line
    assert f"line {line}:" in excinfo.value.message


def test_mesh_file_counts_must_match_header():
    text = "mesh T3 4 1 3\nv 0 0 0\nv 1 1 0\nv 2 0 1\ne 0 0 1 2\nb 0 1 D\nb 1 2 N\nb 2 0 N\n"
    with pytest.raises(MeshFormatError, match='announces 4 vertices'):
        parse_mesh(text)


def test_cache_builds_once_across_threads():
    mesh = MeshService.generate_regular_quad(3)
    calls = []
    barrier = threading.Barrier(8)

    def build():
        calls.append(1)
        return object()

    def worker(_):
        barrier.wait()
        return mesh.cached(('shared',), build)

    with ThreadPoolExecutor(max_workers=8) as pool:
        values = list(pool.map(worker, range(8)))
    assert len(calls) == 1
    assert all(value is values[0] for value in values)
    assert mesh.remember(('shared',), object()) is values[0]


def test_threads_share_one_subdivision():
    mesh = MeshService.generate_regular_tri(4)
    with ThreadPoolExecutor(max_workers=4) as pool:
        found = list(pool.map(lambda _: MeshService.mesh_overlaps(mesh, 'elementwise', 'edge_based'), range(4)))
    assert all(table is found[0] for table in found)
    assert MeshService.subdivision(mesh, 'edge_based') is MeshService.subdivision(mesh, 'edge_based')
