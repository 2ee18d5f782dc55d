import numpy as np
import scipy.sparse as sp

from smoothfem.errors import ElementError, SmoothingError


class ElementStrainMap:
    """Constant strain-displacement matrices of one element.

    `matrices` has shape (cells, 3, 2 * nodes); `weights` holds the measure
    attached to each cell (its area for subtriangles, w * det J at points).
    """

    def __init__(self, kind, matrices, weights, points=None):
        self.kind = kind
        self.matrices = np.array(matrices, dtype=float).reshape(-1, 3, np.shape(matrices)[-1])
        self.weights = np.array(weights, dtype=float).reshape(-1)
        self.points = None if points is None else np.array(points, dtype=float).reshape(-1, 2)
        if len(self.weights) != len(self.matrices):
            raise ElementError("one weight per strain matrix is required")

    def __len__(self):
        return len(self.matrices)

    def strains(self, displacement):
        """Voigt strains (cells, 3) for element nodal displacements"""
        return self.matrices @ np.asarray(displacement, dtype=float)


class StrainField:
    """Per-cell constant Voigt 3-vectors over a subdivision."""

    def __init__(self, subdivision, values, name='strain'):
        values = np.array(values, dtype=float).reshape(-1, 3)
        if len(values) != subdivision.n_cells:
            raise SmoothingError(f"{name} has {len(values)} values for {subdivision.n_cells} cells")
        if not np.all(np.isfinite(values)):
            raise SmoothingError(f"{name} has non-finite entries")
        self.subdivision = subdivision
        self.values = values
        self.name = name

    def __repr__(self):
        return f"<StrainField {self.name} on {self.subdivision.kind} ({len(self.values)} cells)>"

    def __len__(self):
        return len(self.values)

    def transform(self, matrix):
        """Apply a 3x3 matrix to every cell value"""
        return StrainField(self.subdivision, self.values @ np.asarray(matrix).T, self.name)

    def integral(self):
        return self.subdivision.areas @ self.values


class SmoothingOperator:
    """Row-stochastic averaging map from source cells to target cells.

    `matrix` has shape (target cells, source cells) and acts on each Voigt
    component separately; `block()` gives the Kronecker form acting on
    flattened (cells * 3) vectors.
    """

    def __init__(self, matrix, source, target, check=True):
        self.matrix = sp.csr_matrix(matrix)
        self.source = source
        self.target = target
        if self.matrix.shape != (target.n_cells, source.n_cells):
            raise SmoothingError(f"operator shape {self.matrix.shape} does not match "
                                 f"{target.kind} x {source.kind}")
        if check:
            self.check()

    def __repr__(self):
        return f"<SmoothingOperator {self.source.kind}->{self.target.kind} nnz={self.matrix.nnz}>"

    def check(self, tol=1e-12):
        data = self.matrix.data
        if data.size and (data.min() < 0 or data.max() > 1 + tol):
            raise SmoothingError("smoothing weights must lie in [0, 1]")
        sums = np.asarray(self.matrix.sum(axis=1)).ravel()
        gap = np.abs(sums - 1.0)
        if gap.max(initial=0.0) > tol:
            row = int(np.argmax(gap))
            raise SmoothingError(f"smoothing row {row} sums to {sums[row]!r}, expected 1", cell=row)
        return True

    def block(self):
        return sp.kron(self.matrix, sp.identity(3), format='csr')

    def apply(self, field):
        if not self.source.matches(field.subdivision):
            raise SmoothingError(f"field lives on {field.subdivision.kind} cells, "
                                 f"operator expects {self.source.kind}")
        return StrainField(self.target, self.matrix @ field.values, field.name)

    def compose(self, first):
        """This operator applied after `first`"""
        if not first.target.matches(self.source):
            raise SmoothingError(f"cannot chain {first.target.kind} output into {self.source.kind} input")
        return SmoothingOperator(self.matrix @ first.matrix, first.source, self.target)


class SseElementField:
    """Smoothed strain on one element: Gauss values plus their interpolant.

    T3 coefficients multiply barycentric coordinates (l0, l1, l2); Q4
    coefficients multiply (1, r, s, rs) in natural coordinates.
    """

    def __init__(self, kind, element, gauss_points, gauss_values, coefficients, weights):
        self.kind = kind
        self.element = element
        self.gauss_points = np.array(gauss_points, dtype=float)
        self.gauss_values = np.array(gauss_values, dtype=float)
        self.coefficients = np.array(coefficients, dtype=float)
        self.weights = np.array(weights, dtype=float)

        reproduced = self.evaluate(self.gauss_points)
        scale = max(np.abs(self.gauss_values).max(), 1e-300)
        if np.abs(reproduced - self.gauss_values).max() > 1e-13 * scale:
            raise SmoothingError(f"interpolant misses the Gauss values on element {element}",
                                 element=element)

    def __repr__(self):
        return f"<SseElementField {self.kind} element={self.element}>"

    @staticmethod
    def monomials(kind, local):
        local = np.atleast_2d(np.asarray(local, dtype=float))
        if kind == 'T3':
            return local
        r, s = local[:, 0], local[:, 1]
        return np.column_stack([np.ones_like(r), r, s, r * s])

    def evaluate(self, local):
        """Strain at barycentric (T3, shape (P, 3)) or natural (Q4, shape (P, 2)) points"""
        return self.monomials(self.kind, local) @ self.coefficients

    def energy(self, material):
        return float(np.dot(self.weights, material.energy_density(self.gauss_values)))
