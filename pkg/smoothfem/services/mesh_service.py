import logging

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from smoothfem.config import default
from smoothfem.errors import MeshError, SmoothingError
from smoothfem.models.mesh import Mesh
from smoothfem.models.subdivision import OverlapTable, Subdivision
from smoothfem.utils.geometry import corner_crosses, overlap_area

logger = logging.getLogger('mesh_service')

PATTERNS = ('slash', 'backslash', 'union_jack')
SIDES = ('bottom', 'right', 'top', 'left')


def _dirichlet_sides(dirichlet):
    if dirichlet == 'bottom':
        return {'bottom'}
    if dirichlet == 'all':
        return set(SIDES)
    if dirichlet == 'none':
        return set()
    raise MeshError(f"unknown Dirichlet side selection {dirichlet!r}")


def _grid(n, domain):
    x0, y0, x1, y1 = domain
    if not (x1 > x0 and y1 > y0):
        raise MeshError(f"domain {domain} is not a proper rectangle")
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def _boundary(n, step, dirichlet):
    """Corner-pair boundary edges of an (n*step + 1)^2 grid, walked counterclockwise"""
    sides = _dirichlet_sides(dirichlet)
    width = n * step + 1

    def vid(i, j):
        return j * width + i

    edges = []
    tags = []
    walks = {
        'bottom': [(vid(i, 0), vid(i + step, 0)) for i in range(0, n * step, step)],
        'right': [(vid(n * step, j), vid(n * step, j + step)) for j in range(0, n * step, step)],
        'top': [(vid(i + step, n * step), vid(i, n * step)) for i in range(n * step - step, -1, -step)],
        'left': [(vid(0, j + step), vid(0, j)) for j in range(n * step - step, -1, -step)],
    }
    for side in SIDES:
        for edge in walks[side]:
            edges.append(edge)
            tags.append('D' if side in sides else 'N')
    return edges, tags


def _check_size(n):
    if int(n) != n or n < 1:
        raise MeshError(f"mesh size N must be a positive integer, got {n!r}")
    return int(n)


class MeshService:
    """Mesh generation, auxiliary subdivisions, overlaps and point location."""

    @staticmethod
    def generate_regular_tri(n, pattern=default.PATTERN, domain=default.DOMAIN, dirichlet=default.DIRICHLET):
        """
        N x N grid of squares, each split into two triangles

        Args:
            n: Number of squares per side
            pattern: Diagonal choice: slash, backslash or union_jack
            domain: (x0, y0, x1, y1)
            dirichlet: Which sides are tagged Dirichlet: bottom, all or none

        Returns:
            Mesh: T3 mesh
        """
        n = _check_size(n)
        if pattern not in PATTERNS:
            raise MeshError(f"unknown triangulation pattern {pattern!r}")
        vertices = _grid(n, domain)
        elements = []
        for j in range(n):
            for i in range(n):
                a = j * (n + 1) + i
                b, c, d = a + 1, a + n + 2, a + n + 1
                slash = pattern == 'slash' or (pattern == 'union_jack' and (i + j) % 2 == 0)
                if slash:
                    elements.extend([(a, b, c), (a, c, d)])
                else:
                    elements.extend([(a, b, d), (b, c, d)])
        edges, tags = _boundary(n, 1, dirichlet)
        mesh = Mesh(vertices, elements, 'T3', edges, tags)
        logger.info(f"Generated {pattern} T3 mesh N={n}: {mesh.n_vertices} vertices, {mesh.n_elements} elements")
        return mesh

    @staticmethod
    def generate_regular_quad(n, domain=default.DOMAIN, dirichlet=default.DIRICHLET):
        n = _check_size(n)
        vertices = _grid(n, domain)
        elements = []
        for j in range(n):
            for i in range(n):
                a = j * (n + 1) + i
                elements.append((a, a + 1, a + n + 2, a + n + 1))
        edges, tags = _boundary(n, 1, dirichlet)
        mesh = Mesh(vertices, elements, 'Q4', edges, tags)
        logger.info(f"Generated Q4 mesh N={n}: {mesh.n_vertices} vertices, {mesh.n_elements} elements")
        return mesh

    @staticmethod
    def generate_regular_q9(n, domain=default.DOMAIN, dirichlet=default.DIRICHLET):
        n = _check_size(n)
        width = 2 * n + 1
        vertices = _grid(2 * n, domain)
        elements = []
        for j in range(n):
            for i in range(n):
                I, J = 2 * i, 2 * j

                def vid(di, dj):
                    return (J + dj) * width + I + di

                elements.append((vid(0, 0), vid(2, 0), vid(2, 2), vid(0, 2),
                                 vid(1, 0), vid(2, 1), vid(1, 2), vid(0, 1), vid(1, 1)))
        edges, tags = _boundary(n, 2, dirichlet)
        mesh = Mesh(vertices, elements, 'Q9', edges, tags)
        logger.info(f"Generated Q9 mesh N={n}: {mesh.n_vertices} vertices, {mesh.n_elements} elements")
        return mesh

    @staticmethod
    def _incident_ok(mesh, coords, elements):
        for e in elements:
            polygon = coords[mesh.corners[e]]
            if not np.all(corner_crosses(polygon) > 0):
                return False
        return True

    @staticmethod
    def distort_mesh(mesh, magnitude, seed, retries=default.DISTORTION_RETRIES):
        """
        Move interior vertices by a random fraction of their local edge length

        Vertices are processed in ascending order; each draw is resampled
        until all incident elements stay positive (and convex for quads).
        """
        if not 0 <= magnitude < 0.5:
            raise MeshError(f"distortion magnitude must lie in [0, 0.5), got {magnitude!r}")
        if mesh.kind == 'Q9':
            raise MeshError("Q9 meshes cannot be distorted; distort the Q4 mesh instead")
        if magnitude == 0:
            return mesh

        rng = np.random.default_rng(seed)
        coords = np.array(mesh.vertices, dtype=float)
        boundary = set(mesh.boundary_vertices.tolist())
        nc = mesh.corner_count
        for v in range(mesh.n_vertices):
            if v in boundary:
                continue
            incident = mesh.vertex_elements[v]
            if not incident:
                continue
            neighbors = set()
            for e in incident:
                corners = mesh.corners[e].tolist()
                k = corners.index(v)
                neighbors.update((corners[(k + 1) % nc], corners[(k - 1) % nc]))
            h_local = min(np.linalg.norm(coords[u] - coords[v]) for u in neighbors)
            original = coords[v].copy()
            for attempt in range(retries):
                coords[v] = original + rng.uniform(-magnitude * h_local, magnitude * h_local, size=2)
                if MeshService._incident_ok(mesh, coords, incident):
                    break
                logger.debug(f"Vertex {v}: draw {attempt + 1} inverted an element, resampling")
            else:
                coords[v] = original
                logger.error(f"Distortion failed at vertex {v} after {retries} draws")
                raise MeshError(f"could not move vertex {v} without inverting an element "
                                f"after {retries} draws", vertex=v)
        distorted = mesh.with_vertices(coords)
        logger.info(f"Distorted {mesh.kind} mesh by {magnitude} (seed {seed})")
        return distorted

    @staticmethod
    def skew_mesh(mesh, shear):
        """Affine shear x' = x + shear * y; quads become parallelograms"""
        coords = np.array(mesh.vertices)
        coords[:, 0] = coords[:, 0] + shear * coords[:, 1]
        return mesh.with_vertices(coords)

    @staticmethod
    def rotate_mesh(mesh, angle=0.0, renumber=0):
        """Rigid rotation about the origin and/or cyclic shift of local node numbers"""
        c, s = np.cos(angle), np.sin(angle)
        coords = mesh.vertices @ np.array([[c, -s], [s, c]]).T
        elements = np.array(mesh.elements)
        shift = renumber % mesh.corner_count
        if shift:
            nc = mesh.corner_count
            order = [(k + shift) % nc for k in range(nc)]
            if mesh.kind == 'Q9':
                order += [4 + (k + shift) % 4 for k in range(4)] + [8]
            elements = elements[:, order]
        return Mesh(coords, elements, mesh.kind, mesh.boundary_edges, mesh.boundary_tags)

    @staticmethod
    def _require(mesh, kinds, what):
        if mesh.kind not in kinds:
            raise MeshError(f"{what} needs a {' or '.join(kinds)} mesh, got {mesh.kind}")

    @staticmethod
    def elementwise_subdivision(mesh):
        """One cell per element (quads stored as four center triangles)"""
        coords = mesh.corner_coords
        if mesh.corner_count == 3:
            triangles = coords
            piece_cell = np.arange(mesh.n_elements)
        else:
            centers = mesh.element_centers
            triangles = np.stack([
                np.stack([coords[:, k], coords[:, (k + 1) % 4], centers], axis=1) for k in range(4)
            ], axis=1).reshape(-1, 3, 2)
            piece_cell = np.repeat(np.arange(mesh.n_elements), 4)
        return Subdivision('elementwise', triangles, piece_cell, mesh.n_elements,
                           outlines=list(coords), parents=[(e,) for e in range(mesh.n_elements)],
                           domain_area=mesh.area)

    @staticmethod
    def build_quad_subtriangles(mesh):
        """Four triangles per quad with apex at the corner average"""
        MeshService._require(mesh, ('Q4',), 'quad subtriangles')
        coords = mesh.corner_coords
        centers = mesh.element_centers
        triangles = np.stack([
            np.stack([coords[:, k], coords[:, (k + 1) % 4], centers], axis=1) for k in range(4)
        ], axis=1).reshape(-1, 3, 2)
        parents = [(e, k) for e in range(mesh.n_elements) for k in range(4)]
        return Subdivision('subtriangle', triangles, np.arange(len(triangles)), len(triangles),
                           outlines=list(triangles), parents=parents, domain_area=mesh.area)

    @staticmethod
    def build_edge_subdivision(mesh):
        """One cell per edge joining its endpoints with the adjacent element centers"""
        MeshService._require(mesh, ('T3', 'Q4'), 'edge-based smoothing')
        centers = mesh.element_centers
        vertices = mesh.vertices
        triangles = []
        piece_cell = []
        outlines = []
        parents = []
        for i, ((p, q), (e, _, f, _)) in enumerate(zip(mesh.edges.tolist(), mesh.edge_elements.tolist())):
            P, Q, c1 = vertices[p], vertices[q], centers[e]
            triangles.append((P, Q, c1))
            piece_cell.append(i)
            if f >= 0:
                c2 = centers[f]
                triangles.append((Q, P, c2))
                piece_cell.append(i)
                outlines.append(np.array([P, c2, Q, c1]))
            else:
                outlines.append(np.array([P, Q, c1]))
            parents.append((i, e, f))
        return Subdivision('edge_based', np.array(triangles), piece_cell, mesh.n_edges,
                           outlines=outlines, parents=parents, domain_area=mesh.area)

    @staticmethod
    def build_interior_subdivision(mesh):
        """Per element one cell at each corner joining edge midpoints and the center"""
        MeshService._require(mesh, ('T3', 'Q4'), 'interior subdivision')
        nc = mesh.corner_count
        coords = mesh.corner_coords
        centers = mesh.element_centers
        triangles = []
        outlines = []
        parents = []
        for e in range(mesh.n_elements):
            c = centers[e]
            for k in range(nc):
                v = coords[e, k]
                m_next = 0.5 * (coords[e, k] + coords[e, (k + 1) % nc])
                m_prev = 0.5 * (coords[e, (k - 1) % nc] + coords[e, k])
                triangles.append((v, m_next, c))
                triangles.append((v, c, m_prev))
                outlines.append(np.array([v, m_next, c, m_prev]))
                parents.append((e, k))
        n_cells = nc * mesh.n_elements
        return Subdivision('interior', np.array(triangles), np.repeat(np.arange(n_cells), 2), n_cells,
                           outlines=outlines, parents=parents, domain_area=mesh.area)

    @staticmethod
    def build_node_subdivision(mesh):
        """One cell per vertex made of the interior-subdivision pieces touching it"""
        MeshService._require(mesh, ('T3', 'Q4'), 'node-based smoothing')
        interior = MeshService.build_interior_subdivision(mesh)
        nc = mesh.corner_count
        owner = np.repeat(mesh.corners.ravel(), 2)
        unused = np.setdiff1d(np.arange(mesh.n_vertices), owner)
        if len(unused):
            raise MeshError(f"vertex {unused[0]} belongs to no element", vertex=int(unused[0]))
        order = np.argsort(owner, kind='stable')
        parents = [(v,) for v in range(mesh.n_vertices)]
        logger.debug(f"Node subdivision: {mesh.n_vertices} cells from {nc * mesh.n_elements} corner pieces")
        return Subdivision('node_based', interior.triangles[order], owner[order], mesh.n_vertices,
                           outlines=None, parents=parents, domain_area=mesh.area)

    @staticmethod
    def compute_overlaps(fine, coarse):
        """
        Overlap areas of every fine cell with every coarse cell

        Candidate piece pairs come from a KD-tree over coarse piece
        centroids and a bounding-box test; each pair is clipped exactly.
        """
        fine_tris = fine.triangles
        coarse_tris = coarse.triangles
        fine_centroids = fine_tris.mean(axis=1)
        coarse_centroids = coarse_tris.mean(axis=1)
        fine_radius = np.linalg.norm(fine_tris - fine_centroids[:, None], axis=2).max(axis=1)
        coarse_radius = np.linalg.norm(coarse_tris - coarse_centroids[:, None], axis=2).max(axis=1)
        fine_lo, fine_hi = fine_tris.min(axis=1), fine_tris.max(axis=1)
        coarse_lo, coarse_hi = coarse_tris.min(axis=1), coarse_tris.max(axis=1)
        threshold = 1e-14 * min(fine.areas.min(), coarse.areas.min())

        tree = cKDTree(coarse_centroids)
        candidates = tree.query_ball_point(fine_centroids, r=fine_radius + coarse_radius.max() * (1 + 1e-9))
        fine_list = fine_tris.tolist()
        coarse_list = coarse_tris.tolist()

        rows = []
        cols = []
        data = []
        for i, found in enumerate(candidates):
            for j in sorted(found):
                if np.any(fine_lo[i] > coarse_hi[j]) or np.any(coarse_lo[j] > fine_hi[i]):
                    continue
                area = overlap_area(fine_list[i], coarse_list[j])
                if area > threshold:
                    rows.append(fine.piece_cell[i])
                    cols.append(coarse.piece_cell[j])
                    data.append(area)

        matrix = sp.coo_matrix((data, (rows, cols)), shape=(fine.n_cells, coarse.n_cells)).tocsr()
        matrix.sum_duplicates()
        matrix.data[matrix.data <= threshold] = 0.0
        matrix.eliminate_zeros()
        try:
            table = OverlapTable(matrix, fine, coarse)
        except SmoothingError as e:
            logger.error(f"Overlap table {fine.kind}->{coarse.kind} failed its checks: {e.message}")
            raise
        logger.debug(f"Overlaps {fine.kind}->{coarse.kind}: {matrix.nnz} entries")
        return table

    @staticmethod
    def locate_point(mesh, point):
        """Containing element (lowest index on ties) and natural coordinates"""
        elements, natural = mesh.locator.locate(np.asarray(point, dtype=float).reshape(1, 2))
        return int(elements[0]), natural[0]

    @staticmethod
    def source_kind(mesh):
        """Cells carrying the compatible strain: elements (T3) or subtriangles (Q4)"""
        MeshService._require(mesh, ('T3', 'Q4'), 'strain smoothing')
        return 'elementwise' if mesh.kind == 'T3' else 'subtriangle'

    @staticmethod
    def subdivision(mesh, kind):
        """Build a subdivision once per mesh"""
        builders = {
            'elementwise': MeshService.elementwise_subdivision,
            'subtriangle': MeshService.build_quad_subtriangles,
            'edge_based': MeshService.build_edge_subdivision,
            'interior': MeshService.build_interior_subdivision,
            'node_based': MeshService.build_node_subdivision,
        }
        if kind not in builders:
            raise MeshError(f"unknown subdivision kind {kind!r}")
        key = ('subdivision', kind)
        return mesh.cached(key, lambda: builders[kind](mesh))

    @staticmethod
    def mesh_overlaps(mesh, fine_kind, coarse_kind):
        """Overlap table between two subdivisions of the same mesh, cached"""
        key = ('overlaps', fine_kind, coarse_kind)
        reverse = mesh.cache.get(('overlaps', coarse_kind, fine_kind))
        if reverse is not None:
            return mesh.cached(key, reverse.transpose)
        return mesh.cached(key, lambda: MeshService.compute_overlaps(
            MeshService.subdivision(mesh, fine_kind), MeshService.subdivision(mesh, coarse_kind)))
