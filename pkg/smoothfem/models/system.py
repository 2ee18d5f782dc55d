import numpy as np
import scipy.sparse as sp

from smoothfem.errors import AssemblyError


class DofMap:
    """Two displacement dofs per vertex; Dirichlet vertices are constrained."""

    def __init__(self, n_vertices, constrained_vertices):
        self.n_vertices = int(n_vertices)
        vertices = np.unique(np.asarray(constrained_vertices, dtype=int))
        self.constrained = np.sort(np.concatenate([2 * vertices, 2 * vertices + 1])) \
            if len(vertices) else np.zeros(0, dtype=int)
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained] = False
        self.free = np.flatnonzero(mask)
        self.free_index = np.full(self.n_dofs, -1, dtype=int)
        self.free_index[self.free] = np.arange(len(self.free))

    def __repr__(self):
        return f"<DofMap dofs={self.n_dofs} free={self.n_free}>"

    @classmethod
    def for_mesh(cls, mesh):
        return cls(mesh.n_vertices, mesh.dirichlet_vertices)

    @property
    def n_dofs(self):
        return 2 * self.n_vertices

    @property
    def n_free(self):
        return len(self.free)

    def expand(self, free_values, prescribed=None):
        """Full dof vector from free values and prescribed constrained values"""
        full = np.zeros(self.n_dofs)
        if prescribed is not None:
            full[self.constrained] = prescribed
        full[self.free] = free_values
        return full


class LinearSystem:
    """Stiffness matrix and load vector, full or reduced to free dofs."""

    def __init__(self, K, F=None, method=None, dofmap=None, prescribed=None):
        self.K = sp.csr_matrix(K)
        n = self.K.shape[0]
        if self.K.shape != (n, n):
            raise AssemblyError(f"stiffness must be square, got {self.K.shape}")
        self.F = np.zeros(n) if F is None else np.asarray(F, dtype=float)
        if len(self.F) != n:
            raise AssemblyError(f"load vector has {len(self.F)} entries for {n} dofs")
        self.method = method
        self.dofmap = dofmap
        self.prescribed = prescribed

    def __repr__(self):
        return f"<LinearSystem {self.method} n={self.size} nnz={self.K.nnz}>"

    @property
    def size(self):
        return self.K.shape[0]

    @property
    def is_reduced(self):
        return self.dofmap is not None

    def asymmetry(self):
        scale = abs(self.K).max() if self.K.nnz else 1.0
        gap = abs(self.K - self.K.T)
        return (gap.max() if gap.nnz else 0.0) / scale

    def with_load(self, F):
        return LinearSystem(self.K, F, self.method, self.dofmap, self.prescribed)


class StrainOperator:
    """Sparse map from nodal displacements to strains at integration cells.

    Rows come in Voigt triples, one triple per cell or Gauss point;
    `weights` is the measure of each. The stiffness is G^T (W (x) D) G.
    """

    def __init__(self, matrix, weights, method, subdivision=None, route=None):
        self.matrix = sp.csr_matrix(matrix)
        self.weights = np.asarray(weights, dtype=float)
        self.method = method
        self.subdivision = subdivision
        self.route = route
        if self.matrix.shape[0] != 3 * len(self.weights):
            raise AssemblyError(f"{method}: {self.matrix.shape[0]} strain rows for "
                                f"{len(self.weights)} weights")

    def __repr__(self):
        return f"<StrainOperator {self.method} points={len(self.weights)} dofs={self.matrix.shape[1]}>"

    @property
    def n_points(self):
        return len(self.weights)

    def strains(self, displacement):
        return (self.matrix @ displacement).reshape(-1, 3)

    def stiffness(self, material):
        weighted = sp.kron(sp.diags(self.weights), material.D, format='csr')
        K = (self.matrix.T @ weighted @ self.matrix).tocsr()
        # Exact symmetry regardless of summation order
        return ((K + K.T) * 0.5).tocsr()


def block_body_force(points):
    points = np.atleast_2d(points)
    return np.column_stack([-points[:, 1] ** 2, 1.0 - points[:, 0] ** 2])


def zero_vector_field(points):
    return np.zeros((len(np.atleast_2d(points)), 2))


class BlockProblem:
    """Loading, boundary data and material of a plane elasticity problem."""

    def __init__(self, domain, E, nu, mode, body_force=block_body_force, traction=None,
                 prescribed=zero_vector_field, probe=(1.0, 1.0), dirichlet='bottom',
                 exact_strain=None, name='block'):
        self.domain = tuple(float(v) for v in domain)
        self.E = E
        self.nu = nu
        self.mode = mode
        self.body_force = body_force
        self.traction = traction
        self.prescribed = prescribed
        self.probe = tuple(probe)
        self.dirichlet = dirichlet
        self.exact_strain = exact_strain
        self.name = name
        if dirichlet == 'none':
            raise AssemblyError("a problem needs a nonempty Dirichlet boundary")

    def __repr__(self):
        return f"<BlockProblem {self.name} domain={self.domain}>"

    @classmethod
    def block(cls, domain=(0.0, 0.0, 1.0, 1.0), E=1.0e3, nu=0.2, mode='plane_stress',
              probe=(1.0, 1.0), dirichlet='bottom'):
        """Body force (-y^2, 1 - x^2), zero traction, clamped Dirichlet side"""
        return cls(domain, E, nu, mode, probe=probe, dirichlet=dirichlet, name='block')

    @classmethod
    def patch(cls, gradient, offset=(0.0, 0.0), domain=(0.0, 0.0, 1.0, 1.0), E=1.0e3, nu=0.2,
              mode='plane_stress', probe=(1.0, 1.0)):
        """Linear displacement u = offset + gradient @ x prescribed on the whole boundary"""
        gradient = np.asarray(gradient, dtype=float).reshape(2, 2)
        offset = np.asarray(offset, dtype=float)

        def prescribed(points):
            return offset + np.atleast_2d(points) @ gradient.T

        strain = np.array([gradient[0, 0], gradient[1, 1], gradient[0, 1] + gradient[1, 0]])

        def exact_strain(points):
            return np.tile(strain, (len(np.atleast_2d(points)), 1))

        return cls(domain, E, nu, mode, body_force=zero_vector_field, prescribed=prescribed,
                   probe=probe, dirichlet='all', exact_strain=exact_strain, name='patch')

    def to_dict(self):
        return {
            'name': self.name,
            'domain': self.domain,
            'E': self.E,
            'nu': self.nu,
            'mode': self.mode,
            'probe': self.probe,
            'dirichlet': self.dirichlet,
        }
