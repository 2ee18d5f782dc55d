import logging

import numpy as np

from smoothfem.errors import AnalysisError, LocateError
from smoothfem.models.fields import SseElementField, StrainField
from smoothfem.models.report import ReferenceSolution, _interpolate, _isoparametric_strains
from smoothfem.services.assembly_service import AssemblyService
from smoothfem.services.element_service import ElementService
from smoothfem.services.mesh_service import MeshService
from smoothfem.services.smoothing_service import SmoothingService
from smoothfem.utils.geometry import triangle_areas
from smoothfem.utils.shape import NATURAL_CORNERS, bilinear_basis, det2, jacobians, solve2

logger = logging.getLogger('analysis_service')

SPACES = {'W_h': 'elementwise', 'W_1h': 'edge_based', 'W_2h': 'interior'}
CONSTANT_CELLS = {
    'fem_t3': 'elementwise',
    'fem_plq4': 'subtriangle',
    'esfem': 'edge_based',
    'nsfem': 'node_based',
    'csfem': 'interior',
}


class IntegrationPoints:
    """Quadrature points covering a subdivision, grouped by cell.

    Convex quadrilateral cells use the 3x3 tensor rule through their
    bilinear map (`params` holds the natural coordinates); every other
    cell is integrated piece by piece with the degree-4 triangle rule.
    """

    def __init__(self, subdivision, refinement=1):
        self.subdivision = subdivision
        quad_rule = ElementService.quadrature('quad3x3').refined(refinement)
        tri_rule = ElementService.quadrature('tri_deg4').refined(refinement)

        quad_cells = [i for i in range(subdivision.n_cells) if subdivision.is_quad_cell(i)]
        is_quad = np.zeros(subdivision.n_cells, dtype=bool)
        is_quad[quad_cells] = True

        points, weights, cells, params = [], [], [], []
        if quad_cells:
            outlines = np.array([subdivision.outlines[i] for i in quad_cells])
            values, grads = bilinear_basis(quad_rule.points)
            mapped = np.einsum('pn,cnd->cpd', values, outlines)
            detj = det2(jacobians(outlines[:, None], grads[None]))
            points.append(mapped.reshape(-1, 2))
            weights.append((detj * quad_rule.weights[None, :]).reshape(-1))
            cells.append(np.repeat(quad_cells, len(quad_rule)))
            params.append(np.tile(quad_rule.points, (len(quad_cells), 1)))

        pieces = np.flatnonzero(~is_quad[subdivision.piece_cell])
        if len(pieces):
            triangles = subdivision.triangles[pieces]
            origin = triangles[:, 0]
            e1 = triangles[:, 1] - origin
            e2 = triangles[:, 2] - origin
            ref = tri_rule.points
            mapped = origin[:, None] + ref[None, :, :1] * e1[:, None] + ref[None, :, 1:] * e2[:, None]
            jac = 2.0 * triangle_areas(triangles)
            points.append(mapped.reshape(-1, 2))
            weights.append((jac[:, None] * tri_rule.weights[None, :]).reshape(-1))
            cells.append(np.repeat(subdivision.piece_cell[pieces], len(tri_rule)))
            params.append(np.full((len(pieces) * len(tri_rule), 2), np.nan))

        self.points = np.vstack(points)
        self.weights = np.concatenate(weights)
        self.cells = np.concatenate(cells).astype(int)
        self.params = np.vstack(params)

    def __len__(self):
        return len(self.weights)

    def cell_sums(self, values):
        """Per-cell weighted sums of (P, 3) values"""
        n = self.subdivision.n_cells
        return np.column_stack([np.bincount(self.cells, weights=self.weights * values[:, i], minlength=n)
                                for i in range(values.shape[1])])

    def cell_measure(self):
        return np.bincount(self.cells, weights=self.weights, minlength=self.subdivision.n_cells)


def _integration_points(mesh, kind, refinement):
    key = ('integration_points', kind, refinement)
    return mesh.cached(key, lambda: IntegrationPoints(MeshService.subdivision(mesh, kind), refinement))


def _energy(material, weights, strains):
    return float(np.dot(weights, material.energy_density(strains)))


class AnalysisService:
    """Reference solution, energy norms, error measures and convergence rates."""

    @staticmethod
    def solve_reference(problem, n_ref):
        """
        Biquadratic Q9 displacement solution on an n_ref x n_ref grid

        Returns:
            ReferenceSolution
        """
        if int(n_ref) != n_ref or n_ref < 2:
            raise AnalysisError(f"reference mesh size must be an integer >= 2, got {n_ref!r}")
        mesh = MeshService.generate_regular_q9(int(n_ref), problem.domain, problem.dirichlet)
        solution = AssemblyService.solve_method(mesh, problem, 'fem_q9')
        material = ElementService.dmatrix(problem.E, problem.nu, problem.mode)
        operator = solution.strain_operator
        norm = np.sqrt(_energy(material, operator.weights, operator.strains(solution.displacement)))
        logger.info(f"Reference Q9 N={n_ref}: {mesh.n_vertices} vertices, energy norm {norm:.6e}")
        return ReferenceSolution(problem, mesh, solution.displacement, norm, solution.residual, int(n_ref))

    @staticmethod
    def energy_norm(field, material):
        """Energy norm of a piecewise-constant field or a list of SSE element fields"""
        if isinstance(field, StrainField):
            return float(np.sqrt(_energy(material, field.subdivision.areas, field.values)))
        if isinstance(field, (list, tuple)) and all(isinstance(f, SseElementField) for f in field):
            return float(np.sqrt(sum(f.energy(material) for f in field)))
        raise AnalysisError(f"cannot take the energy norm of {type(field).__name__}")

    @staticmethod
    def sse_coefficients(mesh, displacement):
        """Interpolant coefficients (m, nc, 3) of the smoothed strain on every element"""
        compatible = SmoothingService.compatible_field(mesh, displacement)
        nc = mesh.corner_count
        gauss = (SmoothingService.sse_operator(mesh) @ compatible.values).reshape(-1, nc, 3)
        kind = 'T3' if mesh.kind == 'T3' else 'Q4'
        inverse = np.linalg.inv(SmoothingService._interpolation_matrix(kind))
        return np.einsum('ij,mjd->mid', inverse, gauss)

    @staticmethod
    def _sse_strains(mesh, displacement, points):
        """Smoothed strain at the interior-cell integration points"""
        coefficients = AnalysisService.sse_coefficients(mesh, displacement)
        nc = mesh.corner_count
        elements = points.cells // nc
        corner = points.cells % nc
        if mesh.kind == 'T3':
            coords = mesh.corner_coords[elements]
            jac = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=-1)
            natural = solve2(jac, points.points - coords[:, 0])
            monomials = np.column_stack([1.0 - natural.sum(axis=1), natural])
        else:
            # Interior cell k is the natural quadrant at corner k
            R = NATURAL_CORNERS[corner]
            labels = np.stack([R, 0.5 * (R + NATURAL_CORNERS[(corner + 1) % 4]), np.zeros_like(R),
                               0.5 * (R + NATURAL_CORNERS[(corner - 1) % 4])], axis=1)
            values, _ = bilinear_basis(points.params)
            natural = np.einsum('pn,pnd->pd', values, labels)
            # Cells whose outline is not a convex quad were integrated on their pieces
            pieces = np.flatnonzero(np.isnan(points.params[:, 0]))
            if len(pieces):
                natural[pieces] = mesh.locator.natural_in(points.points[pieces], elements[pieces])
            monomials = SseElementField.monomials('Q4', natural)
        return np.einsum('pj,pjd->pd', monomials, coefficients[elements])

    @staticmethod
    def method_strains(solution, points=None, refinement=1):
        """Integration points of the method's native cells and its strain there"""
        method = solution.method
        mesh = solution.mesh
        operator = solution.strain_operator
        if method in CONSTANT_CELLS or (method == 'sse' and operator.route == 'projection'):
            kind = CONSTANT_CELLS.get(method, 'interior')
            points = points or _integration_points(mesh, kind, refinement)
            values = operator.strains(solution.displacement)
            return points, values[points.cells]
        if method in ('fem_blq4', 'fem_q9'):
            points = points or _integration_points(mesh, 'elementwise', refinement)
            strains = _isoparametric_strains(mesh, points.cells, points.params, solution.displacement)
            return points, strains
        if method == 'sse':
            points = points or _integration_points(mesh, 'interior', refinement)
            return points, AnalysisService._sse_strains(mesh, solution.displacement, points)
        raise AnalysisError(f"no strain representation for method {method!r}")

    @staticmethod
    def energy_error(solution, reference, refinement=1):
        """
        Energy-norm distance between the method strain and the reference strain

        Returns:
            tuple: (absolute error, error relative to the reference energy norm)
        """
        material = ElementService.dmatrix(reference.problem.E, reference.problem.nu, reference.problem.mode)
        points, strains = AnalysisService.method_strains(solution, refinement=refinement)
        try:
            exact = reference.strain_at(points.points)
        except LocateError as e:
            logger.error(f"{solution.method}: reference lookup failed: {e.message}")
            raise
        error = np.sqrt(_energy(material, points.weights, strains - exact))
        return float(error), float(error / reference.energy_norm)

    @staticmethod
    def representative_error(solution, reference, refinement=1):
        """SSE only: error of the piecewise-constant projected strain on the interior cells"""
        if solution.method != 'sse':
            raise AnalysisError("the projected representative exists for sse only")
        mesh = solution.mesh
        material = ElementService.dmatrix(reference.problem.E, reference.problem.nu, reference.problem.mode)
        points = _integration_points(mesh, 'interior', refinement)
        values = SmoothingService.sse_representative(mesh, solution.displacement).values
        error = np.sqrt(_energy(material, points.weights, values[points.cells] - reference.strain_at(points.points)))
        return float(error), float(error / reference.energy_norm)

    @staticmethod
    def projection_error(reference, space, mesh, refinement=1):
        """
        Energy-norm error of the best piecewise-constant fit of the reference strain

        Args:
            reference: ReferenceSolution
            space: 'W_h' (elements), 'W_1h' (edge cells) or 'W_2h' (interior cells)
            mesh: T3 or Q4 mesh
        """
        if space not in SPACES:
            raise AnalysisError(f"unknown approximation space {space!r}")
        material = ElementService.dmatrix(reference.problem.E, reference.problem.nu, reference.problem.mode)
        points = _integration_points(mesh, SPACES[space], refinement)
        exact = reference.strain_at(points.points)
        averages = points.cell_sums(exact) / points.cell_measure()[:, None]
        error = np.sqrt(_energy(material, points.weights, exact - averages[points.cells]))
        logger.debug(f"Projection error {space} on {mesh}: {error:.6e}")
        return float(error)

    @staticmethod
    def convergence_slope(points, min_points=3):
        """Least-squares slope of log(error) against log(h)"""
        points = list(points)
        if len(points) < min_points:
            raise AnalysisError(f"need at least {min_points} (h, error) points, got {len(points)}")
        h = np.array([p[0] for p in points], dtype=float)
        errors = np.array([p[1] for p in points], dtype=float)
        if np.any(errors <= 0) or np.any(h <= 0):
            raise AnalysisError("mesh sizes and errors must be positive for a log-log fit")
        return float(np.polyfit(np.log(h), np.log(errors), 1)[0])

    @staticmethod
    def probe_displacement(solution, point):
        """Displacement of a method solution at a point, through its own shape functions"""
        mesh = solution.mesh
        point = np.asarray(point, dtype=float).reshape(1, 2)
        element, natural = MeshService.locate_point(mesh, point[0])
        if solution.space != 'pl':
            return _interpolate(mesh, np.array([element]), natural[None], solution.displacement)[0]

        coords = mesh.corner_coords[element]
        center = coords.mean(axis=0)
        nodal = solution.displacement.reshape(-1, 2)[mesh.corners[element]]
        center_value = nodal.mean(axis=0)
        for k in range(4):
            k1 = (k + 1) % 4
            jac = np.column_stack([coords[k1] - coords[k], center - coords[k]])
            l1, l2 = np.linalg.solve(jac, point[0] - coords[k])
            if min(l1, l2, 1.0 - l1 - l2) >= -1e-10:
                return (1.0 - l1 - l2) * nodal[k] + l1 * nodal[k1] + l2 * center_value
        raise AnalysisError(f"point {point[0].tolist()} fell between the subtriangles of element {element}")
