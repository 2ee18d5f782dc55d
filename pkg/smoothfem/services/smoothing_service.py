import logging

import numpy as np
import scipy.sparse as sp

from smoothfem.errors import SmoothingError
from smoothfem.models.fields import SmoothingOperator, SseElementField, StrainField
from smoothfem.services.element_service import ElementService
from smoothfem.services.mesh_service import MeshService
from smoothfem.utils.shape import NATURAL_CORNERS, bilinear_basis, det2, jacobians, voigt_b

logger = logging.getLogger('smoothing_service')

# Barycentric coordinates of the T3 Gauss points (2/3 on corner k)
T3_GAUSS = np.full((3, 3), 1.0 / 6.0) + 0.5 * np.eye(3)
Q4_GAUSS = NATURAL_CORNERS / np.sqrt(3.0)


def _element_displacements(mesh, displacement):
    nodes = mesh.corners
    dofs = np.stack([2 * nodes, 2 * nodes + 1], axis=-1).reshape(len(nodes), -1)
    return np.asarray(displacement, dtype=float)[dofs]


class SmoothingService:
    """Piecewise averaging projections and the smoothed strain constructions."""

    @staticmethod
    def build_projection(fine, coarse, overlaps):
        """
        Area-weighted average of fine-cell values over each coarse cell

        Args:
            fine: Source subdivision
            coarse: Target subdivision
            overlaps: OverlapTable between fine and coarse cells

        Returns:
            SmoothingOperator: rows are coarse cells, columns fine cells
        """
        if not (overlaps.fine.matches(fine) and overlaps.coarse.matches(coarse)):
            raise SmoothingError(f"overlap table was built for {overlaps.fine.kind}->{overlaps.coarse.kind}, "
                                 f"not {fine.kind}->{coarse.kind}")
        weights = sp.diags(1.0 / coarse.areas) @ overlaps.matrix.T
        try:
            return SmoothingOperator(weights, fine, coarse)
        except SmoothingError as e:
            logger.error(f"Projection {fine.kind}->{coarse.kind} is not an averaging map: {e.message}")
            raise

    @staticmethod
    def projection(mesh, source_kind, target_kind):
        """Cached projection between two subdivisions of a mesh"""
        key = ('projection', source_kind, target_kind)
        return mesh.cached(key, lambda: SmoothingService.build_projection(
            MeshService.subdivision(mesh, source_kind),
            MeshService.subdivision(mesh, target_kind),
            MeshService.mesh_overlaps(mesh, source_kind, target_kind)))

    @staticmethod
    def apply_projection(op, field):
        return op.apply(field)

    @staticmethod
    def l2_inner(a, b, overlaps=None):
        """L2 inner product of two piecewise-constant fields, possibly on different subdivisions"""
        if a.subdivision.matches(b.subdivision):
            return float(np.sum(a.subdivision.areas * np.sum(a.values * b.values, axis=1)))
        if overlaps is None:
            raise SmoothingError(f"an overlap table is needed to pair {a.subdivision.kind} "
                                 f"with {b.subdivision.kind} fields")
        if overlaps.fine.matches(a.subdivision) and overlaps.coarse.matches(b.subdivision):
            return float(np.sum(a.values * (overlaps.matrix @ b.values)))
        if overlaps.fine.matches(b.subdivision) and overlaps.coarse.matches(a.subdivision):
            return float(np.sum(b.values * (overlaps.matrix @ a.values)))
        raise SmoothingError("overlap table does not connect the two fields")

    @staticmethod
    def compatible_field(mesh, displacement):
        """Compatible strain on elements (T3) or subtriangles (Q4)"""
        ue = _element_displacements(mesh, displacement)
        if mesh.kind == 'T3':
            B, _ = ElementService.t3_matrices(mesh.corner_coords)
            values = np.einsum('mij,mj->mi', B, ue)
        else:
            B, _ = ElementService.q4pl_matrices(mesh.corner_coords)
            values = np.einsum('mkij,mj->mki', B, ue).reshape(-1, 3)
        return StrainField(MeshService.subdivision(mesh, MeshService.source_kind(mesh)), values, 'compatible')

    @staticmethod
    def source_areas(mesh):
        """Areas of the cells carrying the compatible strain"""
        if mesh.kind == 'T3':
            return mesh.element_areas
        _, areas = ElementService.q4pl_matrices(mesh.corner_coords)
        return areas.reshape(-1)

    @staticmethod
    def intermediate_stencil(mesh):
        """
        Sparse (edges x source cells) averaging of the two cells meeting at each edge

        For an interior edge the two cells adjacent to it (the elements for
        T3, the subtriangles on the edge for Q4) are area-averaged; a
        boundary edge keeps its own cell value.
        """
        key = ('stencil',)
        if key in mesh.cache:
            return mesh.cache[key]
        areas = SmoothingService.source_areas(mesh)
        nc = mesh.corner_count
        rows, cols, data = [], [], []
        for i, (e, k, f, j) in enumerate(mesh.edge_elements.tolist()):
            own = e if nc == 3 else nc * e + k
            if f < 0:
                rows.append(i)
                cols.append(own)
                data.append(1.0)
                continue
            other = f if nc == 3 else nc * f + j
            total = areas[own] + areas[other]
            rows.extend([i, i])
            cols.extend([own, other])
            data.extend([areas[own] / total, areas[other] / total])
        stencil = sp.csr_matrix((data, (rows, cols)), shape=(mesh.n_edges, len(areas)))
        return mesh.remember(key, stencil)

    @staticmethod
    def _source_values(mesh, field):
        values = field.values if isinstance(field, StrainField) else np.asarray(field, dtype=float)
        values = values.reshape(-1, 3)
        expected = mesh.n_elements * (1 if mesh.kind == 'T3' else 4)
        if len(values) != expected:
            raise SmoothingError(f"expected {expected} source strains, got {len(values)}")
        return values

    @staticmethod
    def sse_intermediate_strains(mesh, field, element):
        """Intermediate smoothed strain on each local edge of one element"""
        if not 0 <= element < mesh.n_elements:
            raise SmoothingError(f"element index {element} out of range", element=element)
        values = SmoothingService._source_values(mesh, field)
        stencil = SmoothingService.intermediate_stencil(mesh)
        return [np.asarray(stencil[edge] @ values).ravel() for edge in mesh.element_edges[element]]

    @staticmethod
    def _interpolation_matrix(kind):
        """Monomial matrix of the Gauss points used to recover interpolants"""
        if kind == 'T3':
            return T3_GAUSS
        return SseElementField.monomials('Q4', Q4_GAUSS)

    @staticmethod
    def sse_gauss_assignment(kind, intermediate, subtriangle_areas=None, element=-1, weights=None):
        """
        Gauss-point values from the intermediate strains and their interpolant

        G_k combines the strains of edges k-1 and k (the two edges at
        corner k): equal halves for T3, subtriangle-area weights for Q4.
        """
        intermediate = np.asarray(intermediate, dtype=float).reshape(-1, 3)
        count = 3 if kind == 'T3' else 4
        if len(intermediate) != count:
            raise SmoothingError(f"{kind} needs {count} intermediate strains, got {len(intermediate)}")
        previous = np.roll(intermediate, 1, axis=0)
        if kind == 'T3':
            gauss = 0.5 * (previous + intermediate)
        else:
            if subtriangle_areas is None:
                raise SmoothingError("Q4 Gauss assignment needs the subtriangle areas")
            a = np.asarray(subtriangle_areas, dtype=float)
            a_prev = np.roll(a, 1)
            gauss = (a_prev[:, None] * previous + a[:, None] * intermediate) / (a_prev + a)[:, None]

        matrix = SmoothingService._interpolation_matrix(kind)
        if abs(np.linalg.det(matrix)) < 1e-12:
            raise SmoothingError("Gauss layout is not unisolvent")
        coefficients = np.linalg.solve(matrix, gauss)
        points = T3_GAUSS if kind == 'T3' else Q4_GAUSS
        if weights is None:
            weights = np.ones(count)
        return SseElementField(kind, element, points, gauss, coefficients, weights)

    @staticmethod
    def gauss_matrix(mesh):
        """Sparse (Gauss points x edges) pair averaging; row nc*e + k is G_k of element e"""
        key = ('gauss_matrix',)
        if key in mesh.cache:
            return mesh.cache[key]
        nc = mesh.corner_count
        if mesh.kind == 'T3':
            weights = np.full((mesh.n_elements, 3, 2), 0.5)
        else:
            a = SmoothingService.source_areas(mesh).reshape(-1, 4)
            a_prev = np.roll(a, 1, axis=1)
            weights = np.stack([a_prev, a], axis=-1) / (a_prev + a)[:, :, None]
        edges = mesh.element_edges
        cols = np.stack([np.roll(edges, 1, axis=1), edges], axis=-1)
        rows = np.repeat(np.arange(nc * mesh.n_elements), 2)
        matrix = sp.csr_matrix((weights.ravel(), (rows, cols.ravel())),
                               shape=(nc * mesh.n_elements, mesh.n_edges))
        return mesh.remember(key, matrix)

    @staticmethod
    def sse_operator(mesh):
        """Linear map from source-cell strains to every element's Gauss values"""
        return (SmoothingService.gauss_matrix(mesh) @ SmoothingService.intermediate_stencil(mesh)).tocsr()

    @staticmethod
    def sse_gauss_weights(mesh):
        """Integration weights of the Gauss values: |T|/3 for T3, det J for Q4"""
        if mesh.kind == 'T3':
            return np.repeat(mesh.element_areas / 3.0, 3)
        _, grads = bilinear_basis(Q4_GAUSS)
        detj = det2(jacobians(mesh.corner_coords[:, None], grads[None]))
        return detj.reshape(-1)

    @staticmethod
    def sse_smooth(mesh, field):
        """Apply the SSE smoothing operator; one SseElementField per element"""
        values = SmoothingService._source_values(mesh, field)
        nc = mesh.corner_count
        kind = 'T3' if mesh.kind == 'T3' else 'Q4'
        gauss = (SmoothingService.sse_operator(mesh) @ values).reshape(-1, nc, 3)
        weights = SmoothingService.sse_gauss_weights(mesh).reshape(-1, nc)
        inverse = np.linalg.inv(SmoothingService._interpolation_matrix(kind))
        points = T3_GAUSS if kind == 'T3' else Q4_GAUSS
        fields = []
        for e in range(mesh.n_elements):
            fields.append(SseElementField(kind, e, points, gauss[e], inverse @ gauss[e], weights[e]))
        return fields

    @staticmethod
    def esfem_field(mesh, displacement):
        """Compatible strain averaged over the edge-based cells"""
        compatible = SmoothingService.compatible_field(mesh, displacement)
        op = SmoothingService.projection(mesh, MeshService.source_kind(mesh), 'edge_based')
        return op.apply(compatible)

    @staticmethod
    def nsfem_field(mesh, displacement):
        """Element strains averaged over the node-based cells"""
        if mesh.kind != 'T3':
            raise SmoothingError(f"node-based smoothing needs a T3 mesh, got {mesh.kind}")
        compatible = SmoothingService.compatible_field(mesh, displacement)
        op = SmoothingService.projection(mesh, 'elementwise', 'node_based')
        return op.apply(compatible)

    @staticmethod
    def csfem_matrices(mesh):
        """
        Smoothed strain matrices (m, 4, 3, 8) of the four cells of each bilinear Q4

        Each cell average of the bilinear strain is a boundary integral of
        N_i n over the cell outline, taken with two Gauss points per side.
        """
        if mesh.kind != 'Q4':
            raise SmoothingError(f"cell-based smoothing needs a Q4 mesh, got {mesh.kind}")
        key = ('csfem',)
        if key in mesh.cache:
            return mesh.cache[key]
        coords = mesh.corner_coords
        g = 0.5 / np.sqrt(3.0)
        ts = (0.5 - g, 0.5 + g)
        matrices = np.zeros((mesh.n_elements, 4, 3, 8))
        for k in range(4):
            corner = NATURAL_CORNERS[k]
            outline = np.array([corner, 0.5 * (corner + NATURAL_CORNERS[(k + 1) % 4]),
                                [0.0, 0.0], 0.5 * (corner + NATURAL_CORNERS[(k - 1) % 4])])
            physical = np.einsum('cn,mnd->mcd', bilinear_basis(outline)[0], coords)
            x, y = physical[..., 0], physical[..., 1]
            area = 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)
            grads = np.zeros((mesh.n_elements, 4, 2))
            for side in range(4):
                a, b = outline[side], outline[(side + 1) % 4]
                d = physical[:, (side + 1) % 4] - physical[:, side]
                mean_n = 0.5 * sum(bilinear_basis(a + t * (b - a))[0][0] for t in ts)
                grads[:, :, 0] += d[:, 1:2] * mean_n[None, :]
                grads[:, :, 1] -= d[:, 0:1] * mean_n[None, :]
            matrices[:, k] = voigt_b(grads / area[:, None, None])
        return mesh.remember(key, matrices)

    @staticmethod
    def csfem_field(mesh, displacement):
        """Bilinear compatible strain averaged over each of the four cells per element"""
        matrices = SmoothingService.csfem_matrices(mesh)
        ue = _element_displacements(mesh, displacement)
        values = np.einsum('mkij,mj->mki', matrices, ue).reshape(-1, 3)
        return StrainField(MeshService.subdivision(mesh, 'interior'), values, 'cell_smoothed')

    @staticmethod
    def sse_representative(mesh, displacement):
        """Piecewise-constant SSE strain on the interior cells (two successive projections)"""
        compatible = SmoothingService.compatible_field(mesh, displacement)
        p1 = SmoothingService.projection(mesh, MeshService.source_kind(mesh), 'edge_based')
        p2 = SmoothingService.projection(mesh, 'edge_based', 'interior')
        return p2.apply(p1.apply(compatible))

    @staticmethod
    def mixed_fields(mesh, material, displacement):
        """
        Strain and stress fields of the collapsed mixed formulation

        Returns:
            dict: eps1 (edge cells), eps2 (interior cells), sigma2 = D eps2,
            sigma1 = sigma2 averaged back onto the edge cells
        """
        compatible = SmoothingService.compatible_field(mesh, displacement)
        p1 = SmoothingService.projection(mesh, MeshService.source_kind(mesh), 'edge_based')
        p2 = SmoothingService.projection(mesh, 'edge_based', 'interior')
        back = SmoothingService.projection(mesh, 'interior', 'edge_based')
        eps1 = p1.apply(compatible)
        eps2 = p2.apply(eps1)
        sigma2 = StrainField(eps2.subdivision, material.stress(eps2.values), 'stress')
        sigma1 = back.apply(sigma2)
        return {'eps1': eps1, 'eps2': eps2, 'sigma1': sigma1, 'sigma2': sigma2}
