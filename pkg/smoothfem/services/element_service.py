import logging

import numpy as np
from numpy.polynomial.legendre import leggauss

from smoothfem.errors import ElementError
from smoothfem.models.fields import ElementStrainMap
from smoothfem.models.material import MaterialMatrix
from smoothfem.models.quadrature import QuadratureRule
from smoothfem.utils.geometry import corner_crosses
from smoothfem.utils.shape import (bilinear_basis, det2, inverse2, jacobians,
                                   q9_basis, voigt_b)

logger = logging.getLogger('element_service')

# Six-point degree-4 triangle rule (two orbits of three points)
_TRI4_ORBITS = (
    (0.44594849091596488632, 0.22338158967801146570),
    (0.091576213509770743460, 0.10995174365532186764),
)


def _tri3():
    # G_k carries barycentric weight 2/3 on corner k
    points = [(1.0 / 6.0, 1.0 / 6.0), (2.0 / 3.0, 1.0 / 6.0), (1.0 / 6.0, 2.0 / 3.0)]
    return QuadratureRule('tri3', points, [1.0 / 6.0] * 3, 2, 'triangle')


def _tri_deg4():
    points = []
    weights = []
    for a, w in _TRI4_ORBITS:
        b = 1.0 - 2.0 * a
        points.extend([(a, a), (b, a), (a, b)])
        weights.extend([0.5 * w] * 3)
    return QuadratureRule('tri_deg4', points, weights, 4, 'triangle')


def _quad2x2():
    g = 1.0 / np.sqrt(3.0)
    points = [(-g, -g), (g, -g), (g, g), (-g, g)]
    return QuadratureRule('quad2x2', points, [1.0] * 4, 3, 'square')


def _quad3x3():
    x, w = leggauss(3)
    R, S = np.meshgrid(x, x)
    WR, WS = np.meshgrid(w, w)
    points = np.column_stack([R.ravel(), S.ravel()])
    return QuadratureRule('quad3x3', points, (WR * WS).ravel(), 5, 'square')


_RULES = {'tri3': _tri3, 'tri_deg4': _tri_deg4, 'quad2x2': _quad2x2, 'quad3x3': _quad3x3}


def _coords(coords, count):
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (count, 2):
        raise ElementError(f"expected {count} vertex positions, got shape {coords.shape}")
    return coords


class ElementService:
    """Constitutive matrix, element strain maps and quadrature rules."""

    _cache = {}

    @staticmethod
    def dmatrix(E, nu, mode='plane_stress'):
        """
        Plane stress or plane strain constitutive matrix

        Args:
            E: Young's modulus (> 0)
            nu: Poisson's ratio in [0, 0.5)
            mode: 'plane_stress' or 'plane_strain'

        Returns:
            MaterialMatrix
        """
        if not E > 0:
            raise ElementError(f"Young's modulus must be positive, got {E!r}")
        if not 0 <= nu < 0.5:
            raise ElementError(f"Poisson's ratio must lie in [0, 0.5), got {nu!r}")
        if mode == 'plane_stress':
            factor = E / (1.0 - nu * nu)
            D = factor * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])
        elif mode == 'plane_strain':
            factor = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
            D = factor * np.array([[1.0 - nu, nu, 0.0], [nu, 1.0 - nu, 0.0], [0.0, 0.0, 0.5 - nu]])
        else:
            raise ElementError(f"unknown constitutive mode {mode!r}")
        return MaterialMatrix(D, E=E, nu=nu, mode=mode)

    @staticmethod
    def quadrature(kind):
        """Quadrature rule by name: tri3, tri_deg4, quad2x2 or quad3x3"""
        rule = ElementService._cache.get(kind)
        if rule is None:
            if kind not in _RULES:
                raise ElementError(f"unknown quadrature rule {kind!r}")
            rule = ElementService._cache[kind] = _RULES[kind]()
        return rule

    @staticmethod
    def t3_matrices(coords):
        """Vectorized constant-strain matrices (m, 3, 6) and areas (m,) for triangles (m, 3, 2)"""
        x = coords[:, :, 0]
        y = coords[:, :, 1]
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
        dndx = np.stack([b, c], axis=-1) / (2.0 * area)[:, None, None]
        return voigt_b(dndx), area

    @staticmethod
    def t3_strain_map(coords):
        """Constant-strain triangle: one 3x6 matrix"""
        coords = _coords(coords, 3)
        matrices, area = ElementService.t3_matrices(coords[None])
        if area[0] <= 0:
            raise ElementError(f"triangle has nonpositive area {area[0]!r}")
        return ElementStrainMap('T3', matrices, area)

    @staticmethod
    def q4pl_matrices(coords):
        """Vectorized subtriangle matrices (m, 4, 3, 8) and areas (m, 4) for quads (m, 4, 2)"""
        m = len(coords)
        center = coords.mean(axis=1)
        matrices = np.zeros((m, 4, 3, 8))
        areas = np.zeros((m, 4))
        for k in range(4):
            k1 = (k + 1) % 4
            tri = np.stack([coords[:, k], coords[:, k1], center], axis=1)
            B, area = ElementService.t3_matrices(tri)
            matrices[:, k, :, 2 * k:2 * k + 2] += B[:, :, 0:2]
            matrices[:, k, :, 2 * k1:2 * k1 + 2] += B[:, :, 2:4]
            # Center displacement is the corner average
            for i in range(4):
                matrices[:, k, :, 2 * i:2 * i + 2] += 0.25 * B[:, :, 4:6]
            areas[:, k] = area
        return matrices, areas

    @staticmethod
    def q4pl_strain_map(coords):
        """Piecewise-linear Q4: four 3x8 matrices, one per subtriangle (corner k, corner k+1, center)"""
        coords = _coords(coords, 4)
        if not np.all(corner_crosses(coords) > 0):
            raise ElementError("quadrilateral is not convex")
        matrices, areas = ElementService.q4pl_matrices(coords[None])
        return ElementStrainMap('Q4PL', matrices[0], areas[0])

    @staticmethod
    def isoparametric_matrices(coords, natural, basis):
        """Strain matrices (m, P, 3, 2n) and det J (m, P) at natural points"""
        _, grads = basis(natural)
        jac = jacobians(coords[:, None], grads[None])
        detj = det2(jac)
        if np.any(detj <= 0):
            raise ElementError("singular or inverted Jacobian")
        dndx = np.einsum('pnj,mpji->mpni', grads, inverse2(jac))
        return voigt_b(dndx), detj

    @staticmethod
    def q4bl_strain_map(coords, point):
        """Bilinear isoparametric Q4: 3x8 matrix at a natural point"""
        coords = _coords(coords, 4)
        point = np.asarray(point, dtype=float).reshape(1, 2)
        if np.any(np.abs(point) > 1.0 + 1e-12):
            raise ElementError(f"natural point {point[0].tolist()} lies outside the element")
        B, _ = ElementService.isoparametric_matrices(coords[None], point, bilinear_basis)
        return B[0, 0]

    @staticmethod
    def bilinear_jacobian(coords, point):
        _, grads = bilinear_basis(point)
        return jacobians(np.asarray(coords, dtype=float), grads[0])

    @staticmethod
    def q9_shape(point):
        """Nine basis values and their (r, s) gradients"""
        values, grads = q9_basis(np.asarray(point, dtype=float).reshape(1, 2))
        return values[0], grads[0]

    @staticmethod
    def q9_strain_map(coords, point):
        """Biquadratic Q9: 3x18 matrix at a natural point"""
        coords = _coords(coords, 9)
        point = np.asarray(point, dtype=float).reshape(1, 2)
        B, _ = ElementService.isoparametric_matrices(coords[None], point, q9_basis)
        return B[0, 0]

    @staticmethod
    def strain_map(kind, coords):
        """Element strain map at the element's own integration cells or points"""
        if kind == 'T3':
            return ElementService.t3_strain_map(coords)
        if kind == 'Q4PL':
            return ElementService.q4pl_strain_map(coords)
        if kind in ('Q4BL', 'Q9'):
            rule = ElementService.quadrature('quad2x2' if kind == 'Q4BL' else 'quad3x3')
            basis = bilinear_basis if kind == 'Q4BL' else q9_basis
            coords = _coords(coords, 4 if kind == 'Q4BL' else 9)
            B, detj = ElementService.isoparametric_matrices(coords[None], rule.points, basis)
            return ElementStrainMap(kind, B[0], rule.weights * detj[0], points=rule.points)
        raise ElementError(f"unknown element kind {kind!r}")
