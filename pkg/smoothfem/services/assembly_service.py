import logging
import time

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from smoothfem.errors import AssemblyError, SolverError
from smoothfem.models.report import MethodSolution
from smoothfem.models.system import DofMap, LinearSystem, StrainOperator
from smoothfem.services.element_service import ElementService
from smoothfem.services.mesh_service import MeshService
from smoothfem.services.smoothing_service import SmoothingService
from smoothfem.utils.shape import bilinear_basis, det2, jacobians, linear_triangle_basis, q9_basis

logger = logging.getLogger('assembly_service')

METHOD_KINDS = {
    'fem_t3': ('T3',),
    'fem_plq4': ('Q4',),
    'fem_blq4': ('Q4',),
    'fem_q9': ('Q9',),
    'esfem': ('T3', 'Q4'),
    'nsfem': ('T3',),
    'csfem': ('Q4',),
    'sse': ('T3', 'Q4'),
}
ROUTES = ('smoothing', 'projection')
DENSE_DIAGNOSIS_LIMIT = 3000


def _element_dofs(nodes):
    return np.stack([2 * nodes, 2 * nodes + 1], axis=-1).reshape(len(nodes), -1)


def _blocks_to_csr(blocks, dofs, n_dofs):
    """Stack (c, 3, n) blocks acting on dofs (c, n) into a (3c, n_dofs) matrix"""
    count, _, width = blocks.shape
    rows = np.repeat(np.arange(3 * count), width)
    cols = np.repeat(dofs, 3, axis=0).ravel()
    return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(3 * count, n_dofs))


class AssemblyService:
    """Strain operators, stiffness and load assembly, constraints and the sparse solve."""

    @staticmethod
    def check_method(mesh, method):
        if method not in METHOD_KINDS:
            raise AssemblyError(f"unknown method {method!r}")
        if mesh.kind not in METHOD_KINDS[method]:
            raise AssemblyError(f"{method} runs on {' or '.join(METHOD_KINDS[method])} meshes, "
                                f"not {mesh.kind}")

    @staticmethod
    def displacement_space(mesh, method):
        """p1, pl (piecewise-linear Q4), bl (bilinear Q4) or q9"""
        AssemblyService.check_method(mesh, method)
        if mesh.kind == 'T3':
            return 'p1'
        if method in ('fem_blq4', 'csfem'):
            return 'bl'
        if method == 'fem_q9':
            return 'q9'
        return 'pl'

    @staticmethod
    def compatible_operator(mesh):
        """Compatible strain on elements (T3) or subtriangles (Q4), weighted by area"""
        key = ('compatible_operator',)
        if key in mesh.cache:
            return mesh.cache[key]
        dofs = _element_dofs(mesh.corners)
        if mesh.kind == 'T3':
            blocks, areas = ElementService.t3_matrices(mesh.corner_coords)
        elif mesh.kind == 'Q4':
            blocks, areas = ElementService.q4pl_matrices(mesh.corner_coords)
            blocks = blocks.reshape(-1, 3, 8)
            areas = areas.reshape(-1)
            dofs = np.repeat(dofs, 4, axis=0)
        else:
            raise AssemblyError(f"no piecewise-constant compatible strain on {mesh.kind} meshes")
        subdivision = MeshService.subdivision(mesh, MeshService.source_kind(mesh))
        operator = StrainOperator(_blocks_to_csr(blocks, dofs, mesh.n_dofs), areas,
                                  'fem_t3' if mesh.kind == 'T3' else 'fem_plq4', subdivision)
        return mesh.remember(key, operator)

    @staticmethod
    def _isoparametric_operator(mesh, method, rule_kind, basis):
        rule = ElementService.quadrature(rule_kind)
        coords = mesh.vertices[mesh.elements]
        blocks, detj = ElementService.isoparametric_matrices(coords, rule.points, basis)
        points = len(rule.weights)
        dofs = np.repeat(_element_dofs(mesh.elements), points, axis=0)
        blocks = blocks.reshape(-1, 3, blocks.shape[-1])
        weights = (detj * rule.weights[None, :]).reshape(-1)
        return StrainOperator(_blocks_to_csr(blocks, dofs, mesh.n_dofs), weights, method,
                              MeshService.subdivision(mesh, 'elementwise') if mesh.kind != 'Q9' else None)

    @staticmethod
    def strain_operator(mesh, method, route='smoothing'):
        """
        Sparse map from nodal displacements to the method's strain

        Args:
            mesh: T3, Q4 or Q9 mesh matching the method
            method: fem_t3, fem_plq4, fem_blq4, fem_q9, esfem, nsfem, csfem or sse
            route: for sse, 'smoothing' (Gauss values of the smoothing
                operator) or 'projection' (two successive cell averages)

        Returns:
            StrainOperator
        """
        AssemblyService.check_method(mesh, method)
        if route not in ROUTES:
            raise AssemblyError(f"unknown sse route {route!r}")
        key = ('strain_operator', method, route if method == 'sse' else None)
        if key in mesh.cache:
            return mesh.cache[key]

        if method in ('fem_t3', 'fem_plq4'):
            operator = AssemblyService.compatible_operator(mesh)
        elif method == 'fem_blq4':
            operator = AssemblyService._isoparametric_operator(mesh, method, 'quad2x2', bilinear_basis)
        elif method == 'fem_q9':
            operator = AssemblyService._isoparametric_operator(mesh, method, 'quad3x3', q9_basis)
        elif method == 'csfem':
            matrices = SmoothingService.csfem_matrices(mesh).reshape(-1, 3, 8)
            dofs = np.repeat(_element_dofs(mesh.corners), 4, axis=0)
            interior = MeshService.subdivision(mesh, 'interior')
            operator = StrainOperator(_blocks_to_csr(matrices, dofs, mesh.n_dofs), interior.areas,
                                      method, interior)
        else:
            compatible = AssemblyService.compatible_operator(mesh).matrix
            source = MeshService.source_kind(mesh)
            if method == 'esfem':
                op = SmoothingService.projection(mesh, source, 'edge_based')
                smoothing, weights, cells = op.matrix, op.target.areas, op.target
            elif method == 'nsfem':
                op = SmoothingService.projection(mesh, 'elementwise', 'node_based')
                smoothing, weights, cells = op.matrix, op.target.areas, op.target
            elif route == 'projection':
                p1 = SmoothingService.projection(mesh, source, 'edge_based')
                p2 = SmoothingService.projection(mesh, 'edge_based', 'interior')
                smoothing, weights, cells = p2.matrix @ p1.matrix, p2.target.areas, p2.target
            else:
                smoothing = SmoothingService.sse_operator(mesh)
                weights = SmoothingService.sse_gauss_weights(mesh)
                cells = MeshService.subdivision(mesh, 'interior')
            matrix = sp.kron(smoothing, sp.identity(3), format='csr') @ compatible
            operator = StrainOperator(matrix, weights, method, cells,
                                      route=route if method == 'sse' else None)
        return mesh.remember(key, operator)

    @staticmethod
    def assemble_stiffness(mesh, material, method, route='smoothing'):
        """Global stiffness K = sum over cells of weight * B^T D B"""
        operator = AssemblyService.strain_operator(mesh, method, route)
        K = operator.stiffness(material)
        logger.debug(f"Assembled {method} stiffness on {mesh}: nnz={K.nnz}")
        return LinearSystem(K, None, method)

    @staticmethod
    def assemble_load(mesh, problem, method):
        """
        Consistent load vector of the body force (and traction on Neumann edges)

        Degree-4 triangle quadrature per element or subtriangle; 3x3 Gauss
        on bilinear and biquadratic quads.
        """
        space = AssemblyService.displacement_space(mesh, method)
        F = np.zeros(mesh.n_dofs)
        if space == 'p1':
            AssemblyService._triangle_load(F, mesh.corner_coords, mesh.corners, problem.body_force)
        elif space == 'pl':
            coords = mesh.corner_coords
            centers = mesh.element_centers
            for k in range(4):
                tri = np.stack([coords[:, k], coords[:, (k + 1) % 4], centers], axis=1)
                local = np.zeros((mesh.n_elements, 3, 2))
                AssemblyService._triangle_load(local, tri, None, problem.body_force)
                np.add.at(F, 2 * mesh.corners[:, k], local[:, 0, 0])
                np.add.at(F, 2 * mesh.corners[:, k] + 1, local[:, 0, 1])
                k1 = (k + 1) % 4
                np.add.at(F, 2 * mesh.corners[:, k1], local[:, 1, 0])
                np.add.at(F, 2 * mesh.corners[:, k1] + 1, local[:, 1, 1])
                # Center share goes to the corners equally
                for i in range(4):
                    np.add.at(F, 2 * mesh.corners[:, i], 0.25 * local[:, 2, 0])
                    np.add.at(F, 2 * mesh.corners[:, i] + 1, 0.25 * local[:, 2, 1])
        else:
            basis = bilinear_basis if space == 'bl' else q9_basis
            nodes = mesh.corners if space == 'bl' else mesh.elements
            rule = ElementService.quadrature('quad3x3')
            values, grads = basis(rule.points)
            coords = mesh.vertices[nodes]
            points = np.einsum('pn,mnd->mpd', values, coords)
            detj = det2(jacobians(coords[:, None], grads[None]))
            force = problem.body_force(points.reshape(-1, 2)).reshape(len(nodes), -1, 2)
            local = np.einsum('mp,pn,mpd->mnd', detj * rule.weights[None, :], values, force)
            np.add.at(F, 2 * nodes, local[..., 0])
            np.add.at(F, 2 * nodes + 1, local[..., 1])

        if problem.traction is not None:
            AssemblyService._traction_load(F, mesh, problem.traction, space)
        return F

    @staticmethod
    def _triangle_load(F, triangles, nodes, body_force):
        rule = ElementService.quadrature('tri_deg4')
        values, _ = linear_triangle_basis(rule.points)
        origin = triangles[:, 0]
        e1 = triangles[:, 1] - origin
        e2 = triangles[:, 2] - origin
        jac = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        points = origin[:, None] + rule.points[None, :, :1] * e1[:, None] + rule.points[None, :, 1:] * e2[:, None]
        force = body_force(points.reshape(-1, 2)).reshape(len(triangles), -1, 2)
        local = np.einsum('m,p,pn,mpd->mnd', jac, rule.weights, values, force)
        if nodes is None:
            F += local
            return
        np.add.at(F, 2 * nodes, local[..., 0])
        np.add.at(F, 2 * nodes + 1, local[..., 1])

    @staticmethod
    def _traction_load(F, mesh, traction, space):
        x, w = np.polynomial.legendre.leggauss(3)
        t = 0.5 * (x + 1.0)
        for (p, q), tag in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags):
            if tag != 'N':
                continue
            P, Q = mesh.vertices[p], mesh.vertices[q]
            length = np.linalg.norm(Q - P)
            points = P + t[:, None] * (Q - P)
            values = traction(points)
            if space == 'q9':
                mid = mesh.midside_nodes[mesh.edge_index(p, q)]
                shape = np.column_stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)])
                nodes = (p, q, mid)
            else:
                shape = np.column_stack([1 - t, t])
                nodes = (p, q)
            contribution = 0.5 * length * np.einsum('g,gn,gd->nd', w, shape, values)
            for node, (fx, fy) in zip(nodes, contribution):
                F[2 * node] += fx
                F[2 * node + 1] += fy

    @staticmethod
    def mixed_residual(mesh, material, displacement, load, free_dofs):
        """Largest |integral of sigma1 : B v - f(v)| over the free basis vectors"""
        fields = SmoothingService.mixed_fields(mesh, material, displacement)
        source = MeshService.source_kind(mesh)
        overlaps = MeshService.mesh_overlaps(mesh, source, 'edge_based')
        # sigma1 seen from each source cell, weighted by overlap area
        weighted = overlaps.matrix @ fields['sigma1'].values
        internal = AssemblyService.compatible_operator(mesh).matrix.T @ weighted.reshape(-1)
        residual = internal - np.asarray(load, dtype=float)
        return float(np.abs(residual[free_dofs]).max(initial=0.0))

    @staticmethod
    def apply_dirichlet(system, dofmap, prescribed=None, allow_empty=True):
        """
        Symmetric elimination of constrained dofs with lifting of prescribed values

        Returns:
            LinearSystem: over free dofs, carrying the dofmap and prescribed values
        """
        if system.is_reduced:
            raise AssemblyError("system is already reduced")
        if dofmap.n_free == 0 and not allow_empty:
            raise AssemblyError("every dof is constrained; nothing to solve")
        values = np.zeros(len(dofmap.constrained)) if prescribed is None else np.asarray(prescribed, dtype=float)
        K = system.K.tocsr()
        K_ff = K[dofmap.free][:, dofmap.free]
        K_fc = K[dofmap.free][:, dofmap.constrained]
        F = system.F[dofmap.free] - K_fc @ values
        return LinearSystem(K_ff, F, system.method, dofmap, values)

    @staticmethod
    def _diagnose(K, dofmap=None):
        """Describe the softest mode of a small singular system"""
        if K.shape[0] > DENSE_DIAGNOSIS_LIMIT:
            return "system too large for a mode diagnosis"
        eigenvalues, vectors = np.linalg.eigh(K.toarray())
        mode = vectors[:, 0]
        dof = int(np.argmax(np.abs(mode)))
        if dofmap is not None:
            dof = int(dofmap.free[dof])
        return (f"smallest eigenvalue {eigenvalues[0]:.3e}; mode dominated by vertex {dof // 2} "
                f"{'xy'[dof % 2]}-displacement")

    @staticmethod
    def factorize(system):
        """Sparse LU with symmetric minimum-degree ordering and diagonal pivots"""
        K = system.K.tocsc()
        try:
            lu = splu(K, permc_spec='MMD_AT_PLUS_A', diag_pivot_thresh=0.0,
                      options={'SymmetricMode': True})
        except RuntimeError as e:
            message = f"{system.method}: factorization failed ({e}); {AssemblyService._diagnose(K, system.dofmap)}"
            logger.error(message)
            raise SolverError(message)
        pivots = lu.U.diagonal()
        smallest = float(pivots.min())
        if smallest <= 0:
            message = (f"{system.method}: stiffness is not positive definite, smallest pivot {smallest:.3e}; "
                       f"{AssemblyService._diagnose(K, system.dofmap)}")
            logger.error(message)
            raise SolverError(message, smallest_pivot=smallest)
        return lu, smallest

    @staticmethod
    def solve(system, return_info=False):
        """
        Solve K u = F and check the relative residual

        Returns:
            ndarray: free-dof displacements (plus pivot and residual info on request)
        """
        if system.size == 0:
            info = {'smallest_pivot': None, 'residual': 0.0}
            return (np.zeros(0), info) if return_info else np.zeros(0)
        lu, smallest = AssemblyService.factorize(system)
        norm_f = np.linalg.norm(system.F)
        if norm_f == 0:
            u = np.zeros(system.size)
            residual = 0.0
        else:
            u = lu.solve(system.F)
            residual = float(np.linalg.norm(system.K @ u - system.F) / norm_f)
        if residual > 1e-10:
            logger.error(f"{system.method}: residual {residual:.3e} exceeds 1e-10")
            raise SolverError(f"{system.method}: solve residual {residual:.3e} exceeds 1e-10",
                              residual=residual)
        logger.debug(f"Solved {system}: residual {residual:.3e}, smallest pivot {smallest:.3e}")
        info = {'smallest_pivot': smallest, 'residual': residual}
        return (u, info) if return_info else u

    @staticmethod
    def rigid_body_modes(mesh):
        """Columns: x translation, y translation, linearized rotation (-y, x)"""
        modes = np.zeros((mesh.n_dofs, 3))
        modes[0::2, 0] = 1.0
        modes[1::2, 1] = 1.0
        modes[0::2, 2] = -mesh.vertices[:, 1]
        modes[1::2, 2] = mesh.vertices[:, 0]
        return modes

    @staticmethod
    def solve_method(mesh, problem, method, material=None, route='smoothing'):
        """Assemble, constrain, solve; keep the full displacement vector"""
        started = time.perf_counter()
        if material is None:
            material = ElementService.dmatrix(problem.E, problem.nu, problem.mode)
        system = AssemblyService.assemble_stiffness(mesh, material, method, route)
        system = system.with_load(AssemblyService.assemble_load(mesh, problem, method))
        dofmap = DofMap.for_mesh(mesh)
        if len(dofmap.constrained) == 0:
            raise AssemblyError(f"{method}: mesh has no Dirichlet boundary")
        constrained_vertices = dofmap.constrained[0::2] // 2
        prescribed = problem.prescribed(mesh.vertices[constrained_vertices]).reshape(-1)
        reduced = AssemblyService.apply_dirichlet(system, dofmap, prescribed)
        free_values, info = AssemblyService.solve(reduced, return_info=True)
        displacement = dofmap.expand(free_values, prescribed)
        elapsed = time.perf_counter() - started
        logger.info(f"{method} on {mesh}: {dofmap.n_free} free dofs, residual {info['residual']:.2e}, "
                    f"{elapsed:.3f}s")
        return MethodSolution(method, mesh, problem, displacement,
                              AssemblyService.strain_operator(mesh, method, route),
                              AssemblyService.displacement_space(mesh, method),
                              dofmap.n_free, info['residual'], info['smallest_pivot'], elapsed)
