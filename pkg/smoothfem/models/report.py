import numpy as np

from smoothfem.utils.shape import basis_for, inverse2, jacobians, voigt_b


def _isoparametric_strains(mesh, elements, natural, displacement):
    """Compatible strain of a displacement field at located points"""
    basis = basis_for(mesh.elements.shape[1])
    _, grads = basis(natural)
    coords = mesh.vertices[mesh.elements[elements]]
    jac = jacobians(coords, grads)
    dndx = np.einsum('pnj,pji->pni', grads, inverse2(jac))
    B = voigt_b(dndx)
    dofs = np.stack([2 * mesh.elements[elements], 2 * mesh.elements[elements] + 1], axis=-1)
    ue = displacement[dofs.reshape(len(elements), -1)]
    return np.einsum('pij,pj->pi', B, ue)


def _interpolate(mesh, elements, natural, displacement):
    basis = basis_for(mesh.elements.shape[1])
    values, _ = basis(natural)
    nodal = displacement.reshape(-1, 2)[mesh.elements[elements]]
    return np.einsum('pn,pnd->pd', values, nodal)


class ReferenceSolution:
    """Fine-mesh displacement solution used as the strain reference."""

    def __init__(self, problem, mesh, displacement, energy_norm, residual, n):
        self.problem = problem
        self.mesh = mesh
        self.displacement = np.asarray(displacement, dtype=float)
        self.energy_norm = float(energy_norm)
        self.residual = float(residual)
        self.n = n

    def __repr__(self):
        return f"<ReferenceSolution {self.mesh.kind} N={self.n} energy={self.energy_norm:.6e}>"

    def strain_at(self, points):
        """Reference strain (P, 3) at physical points"""
        elements, natural = self.mesh.locator.locate(points)
        return _isoparametric_strains(self.mesh, elements, natural, self.displacement)

    def displacement_at(self, points):
        elements, natural = self.mesh.locator.locate(points)
        return _interpolate(self.mesh, elements, natural, self.displacement)


class MethodSolution:
    """Displacement solution of one method on one mesh with solve statistics."""

    def __init__(self, method, mesh, problem, displacement, strain_operator, space,
                 n_free, residual, smallest_pivot, wall_time):
        self.method = method
        self.mesh = mesh
        self.problem = problem
        self.displacement = np.asarray(displacement, dtype=float)
        self.strain_operator = strain_operator
        self.space = space
        self.n_free = n_free
        self.residual = residual
        self.smallest_pivot = smallest_pivot
        self.wall_time = wall_time

    def __repr__(self):
        return f"<MethodSolution {self.method} {self.mesh.kind} dofs={self.n_free}>"

    @property
    def strains(self):
        return self.strain_operator.strains(self.displacement)


class ErrorReport:
    """One row of a convergence study."""

    FIELDS = ('method', 'mesh', 'n', 'h', 'error', 'reference_energy', 'relative_error',
              'probe_error', 'representative_error', 'dofs', 'wall_time')

    def __init__(self, method, n, h, error, reference_energy, dofs, wall_time=0.0, mesh='regular',
                 probe_error=None, representative_error=None):
        self.method = method
        self.mesh = mesh
        self.n = n
        self.h = h
        self.error = float(error)
        self.reference_energy = float(reference_energy)
        self.relative_error = self.error / self.reference_energy if self.reference_energy > 0 else 0.0
        self.probe_error = probe_error
        self.representative_error = representative_error
        self.dofs = dofs
        self.wall_time = wall_time

    def __repr__(self):
        return f"<ErrorReport {self.method} N={self.n} Ee={self.relative_error:.4e}>"

    def to_dict(self):
        """Convert to dictionary"""
        return {name: getattr(self, name) for name in self.FIELDS}
