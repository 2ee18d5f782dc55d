import numpy as np

from smoothfem.errors import ElementError


class MaterialMatrix:
    """Constant 3x3 constitutive matrix acting on Voigt strain."""

    def __init__(self, D, E=None, nu=None, mode=None):
        D = np.array(D, dtype=float)
        if D.shape != (3, 3) or not np.all(np.isfinite(D)):
            raise ElementError("constitutive matrix must be a finite 3x3 array")
        scale = np.abs(D).max()
        if np.abs(D - D.T).max() > 1e-12 * scale:
            raise ElementError("constitutive matrix is not symmetric")
        eigenvalues = np.linalg.eigvalsh(D)
        if eigenvalues.min() <= 0:
            raise ElementError(f"constitutive matrix is not positive definite "
                               f"(smallest eigenvalue {eigenvalues.min()!r})")
        D.setflags(write=False)
        self.D = D
        self.E = E
        self.nu = nu
        self.mode = mode

    def __repr__(self):
        return f"<MaterialMatrix {self.mode} E={self.E} nu={self.nu}>"

    def stress(self, strain):
        return np.asarray(strain) @ self.D.T

    def energy_density(self, strain):
        """D eps : eps for each row of a (P, 3) strain array"""
        strain = np.atleast_2d(strain)
        return np.einsum('pi,ij,pj->p', strain, self.D, strain)

    def to_dict(self):
        return {'E': self.E, 'nu': self.nu, 'mode': self.mode, 'D': self.D.tolist()}
