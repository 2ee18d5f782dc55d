import numpy as np
import pytest

from smoothfem.errors import ElementError
from smoothfem.models import MaterialMatrix
from smoothfem.services import ElementService

GRADIENT = np.array([[1.0e-3, 2.0e-3], [-0.5e-3, 1.5e-3]])
EXACT_STRAIN = np.array([1.0e-3, 1.5e-3, 1.5e-3])


def linear_displacement(coords):
    return (coords @ GRADIENT.T).ravel()


def test_plane_stress_matrix():
    D = ElementService.dmatrix(1.0e3, 0.2).D
    factor = 1.0e3 / 0.96
    assert D[0, 0] == pytest.approx(factor)
    assert D[0, 1] == pytest.approx(0.2 * factor)
    assert D[2, 2] == pytest.approx(0.4 * factor)
    assert D[0, 2] == 0.0


def test_plane_strain_matrix():
    D = ElementService.dmatrix(1.0e3, 0.25, 'plane_strain').D
    factor = 1.0e3 / (1.25 * 0.5)
    assert D[0, 0] == pytest.approx(0.75 * factor)
    assert D[2, 2] == pytest.approx(0.25 * factor)


@pytest.mark.parametrize('E, nu, mode', [(0.0, 0.2, 'plane_stress'), (1.0, 0.5, 'plane_stress'),
                                         (1.0, -0.1, 'plane_stress'), (1.0, 0.2, 'shell')])
def test_invalid_material(E, nu, mode):
    with pytest.raises(ElementError):
        ElementService.dmatrix(E, nu, mode)


def test_asymmetric_constitutive_matrix_rejected():
    with pytest.raises(ElementError, match='symmetric'):
        MaterialMatrix([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def test_indefinite_constitutive_matrix_rejected():
    with pytest.raises(ElementError, match='positive definite'):
        MaterialMatrix(np.diag([1.0, -1.0, 1.0]))


@pytest.mark.parametrize('rule, domain_measure', [('tri3', 0.5), ('tri_deg4', 0.5), ('quad2x2', 4.0),
                                                  ('quad3x3', 4.0)])
def test_rules_integrate_constants(rule, domain_measure):
    quadrature = ElementService.quadrature(rule)
    assert quadrature.weights.sum() == pytest.approx(domain_measure)
    assert quadrature.measure == domain_measure


def test_triangle_rule_degree_four():
    rule = ElementService.quadrature('tri_deg4')
    # x^2 y^2 over the reference triangle is 2! 2! / 6!
    assert rule.integrate(lambda p: p[:, 0] ** 2 * p[:, 1] ** 2) == pytest.approx(1.0 / 180.0, rel=1e-12)
    assert rule.integrate(lambda p: p[:, 0] ** 4) == pytest.approx(1.0 / 30.0, rel=1e-12)


def test_square_rule_degree_five():
    rule = ElementService.quadrature('quad3x3')
    assert rule.integrate(lambda p: p[:, 0] ** 4 * p[:, 1] ** 4) == pytest.approx(4.0 / 25.0, rel=1e-12)


@pytest.mark.parametrize('factor', [2, 3])
def test_refined_rules_keep_exactness(factor):
    tri = ElementService.quadrature('tri_deg4').refined(factor)
    square = ElementService.quadrature('quad3x3').refined(factor)
    assert tri.integrate(lambda p: p[:, 0] ** 2 * p[:, 1] ** 2) == pytest.approx(1.0 / 180.0, rel=1e-12)
    assert square.integrate(lambda p: p[:, 0] ** 4 * p[:, 1] ** 4) == pytest.approx(4.0 / 25.0, rel=1e-12)


def test_t3_reproduces_linear_field():
    coords = np.array([[0.1, 0.0], [1.2, 0.3], [0.4, 0.9]])
    strain_map = ElementService.t3_strain_map(coords)
    assert strain_map.weights[0] == pytest.approx(0.5 * (1.1 * 0.9 - 0.3 * 0.3))
    assert np.allclose(strain_map.strains(linear_displacement(coords)), EXACT_STRAIN, atol=1e-15)


def test_t3_rigid_rotation_has_no_strain():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    rotation = np.column_stack([-coords[:, 1], coords[:, 0]]).ravel()
    assert np.allclose(ElementService.t3_strain_map(coords).strains(rotation), 0.0, atol=1e-15)


def test_degenerate_triangle_rejected():
    with pytest.raises(ElementError):
        ElementService.t3_strain_map([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])


QUAD = np.array([[0.0, 0.0], [2.0, 0.2], [2.3, 1.6], [-0.2, 1.1]])
QUAD_AREA = 0.5 * (2.3 * 0.9 + 1.6 * 2.2)


def test_piecewise_linear_quad():
    strain_map = ElementService.q4pl_strain_map(QUAD)
    assert len(strain_map) == 4
    assert strain_map.weights.sum() == pytest.approx(QUAD_AREA)
    assert np.allclose(strain_map.strains(linear_displacement(QUAD)), EXACT_STRAIN, atol=1e-15)


def test_piecewise_linear_rejects_nonconvex():
    with pytest.raises(ElementError, match='not convex'):
        ElementService.q4pl_strain_map([[0.0, 0.0], [1.0, 0.0], [0.3, 0.3], [0.0, 1.0]])


def test_bilinear_quad_strain_and_weights():
    strain_map = ElementService.strain_map('Q4BL', QUAD)
    assert strain_map.weights.sum() == pytest.approx(QUAD_AREA)
    assert np.allclose(strain_map.strains(linear_displacement(QUAD)), EXACT_STRAIN, atol=1e-15)
    with pytest.raises(ElementError):
        ElementService.q4bl_strain_map(QUAD, (1.5, 0.0))


def test_q9_reproduces_quadratic_strain():
    from smoothfem.utils.shape import Q9_NODES
    coords = (Q9_NODES + 1.0) * 0.5
    # u = (x^2, x y): strain (2x, x, y)
    nodal = np.column_stack([coords[:, 0] ** 2, coords[:, 0] * coords[:, 1]]).ravel()
    B = ElementService.q9_strain_map(coords, (0.2, -0.6))
    x, y = 0.6, 0.2
    assert np.allclose(B @ nodal, [2 * x, x, y], atol=1e-14)
