"""Vectorized shape-function bases on the reference triangle and square.

Natural corner order of the square is (-1,-1), (1,-1), (1,1), (-1,1).
Q9 nodes follow the corners with the midsides of edges 0-1, 1-2, 2-3, 3-0
and the center last.
"""
import numpy as np

NATURAL_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])

Q9_NODES = np.array([
    [-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0],
    [0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0],
    [0.0, 0.0],
])

LINEAR_TRIANGLE_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def linear_triangle_basis(points):
    """Values (P, 3) and gradients (P, 3, 2) of the P1 basis at (xi, eta)"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.column_stack([1.0 - points[:, 0] - points[:, 1], points[:, 0], points[:, 1]])
    grads = np.broadcast_to(LINEAR_TRIANGLE_GRADIENTS, (len(points), 3, 2)).copy()
    return values, grads


def bilinear_basis(points):
    """Values (P, 4) and gradients (P, 4, 2) of the Q4 basis"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    r = points[:, :1]
    s = points[:, 1:2]
    ri = NATURAL_CORNERS[:, 0]
    si = NATURAL_CORNERS[:, 1]
    values = 0.25 * (1.0 + r * ri) * (1.0 + s * si)
    grads = np.stack([0.25 * ri * (1.0 + s * si), 0.25 * si * (1.0 + r * ri)], axis=-1)
    return values, grads


def _lagrange3(t):
    values = np.stack([0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)], axis=-1)
    grads = np.stack([t - 0.5, -2.0 * t, t + 0.5], axis=-1)
    return values, grads


def q9_basis(points):
    """Values (P, 9) and gradients (P, 9, 2) of the biquadratic Lagrange basis"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lr, dlr = _lagrange3(points[:, 0])
    ls, dls = _lagrange3(points[:, 1])
    ir = Q9_NODES[:, 0].astype(int) + 1
    js = Q9_NODES[:, 1].astype(int) + 1
    values = lr[:, ir] * ls[:, js]
    grads = np.stack([dlr[:, ir] * ls[:, js], lr[:, ir] * dls[:, js]], axis=-1)
    return values, grads


def basis_for(node_count):
    if node_count == 3:
        return linear_triangle_basis
    if node_count == 4:
        return bilinear_basis
    if node_count == 9:
        return q9_basis
    raise ValueError(f"no basis for {node_count}-node elements")


def jacobians(coords, grads):
    """Jacobians J[..., i, j] = d x_i / d xi_j for nodal coords (..., n, 2)"""
    return np.einsum('...ni,...nj->...ij', coords, grads)


def det2(matrices):
    return matrices[..., 0, 0] * matrices[..., 1, 1] - matrices[..., 0, 1] * matrices[..., 1, 0]


def solve2(matrices, rhs):
    """Solve a stack of 2x2 systems by Cramer's rule"""
    det = det2(matrices)
    x = (matrices[..., 1, 1] * rhs[..., 0] - matrices[..., 0, 1] * rhs[..., 1]) / det
    y = (matrices[..., 0, 0] * rhs[..., 1] - matrices[..., 1, 0] * rhs[..., 0]) / det
    return np.stack([x, y], axis=-1)


def inverse2(matrices):
    det = det2(matrices)
    inv = np.empty_like(matrices)
    inv[..., 0, 0] = matrices[..., 1, 1] / det
    inv[..., 1, 1] = matrices[..., 0, 0] / det
    inv[..., 0, 1] = -matrices[..., 0, 1] / det
    inv[..., 1, 0] = -matrices[..., 1, 0] / det
    return inv


def voigt_b(dndx):
    """Strain-displacement matrices (..., 3, 2n) from physical gradients (..., n, 2)"""
    shape = dndx.shape[:-2]
    n = dndx.shape[-2]
    b = np.zeros(shape + (3, 2 * n))
    b[..., 0, 0::2] = dndx[..., 0]
    b[..., 1, 1::2] = dndx[..., 1]
    b[..., 2, 0::2] = dndx[..., 1]
    b[..., 2, 1::2] = dndx[..., 0]
    return b
