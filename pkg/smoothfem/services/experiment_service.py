import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from jinja2 import Environment, PackageLoader
from scipy.sparse.linalg import norm as sparse_norm

from smoothfem import __version__
from smoothfem.config.experiment import METHODS_BY_KIND
from smoothfem.config.settings import Config
from smoothfem.errors import AnalysisError, ConfigError
from smoothfem.models.report import ErrorReport
from smoothfem.models.system import BlockProblem
from smoothfem.services.analysis_service import SPACES, AnalysisService
from smoothfem.services.assembly_service import AssemblyService
from smoothfem.services.element_service import ElementService
from smoothfem.services.mesh_service import MeshService
from smoothfem.utils.mesh_io import read_mesh
from smoothfem.utils.plotting import convergence_plot
from smoothfem.utils.tables import write_csv

logger = logging.getLogger('experiment_service')

PROJECTION_FIELDS = ('mesh_kind', 'mesh', 'n', 'elements', 'h', 'W_h', 'W_1h', 'W_2h')
# Wall time stays out of the tables so repeated runs write identical files
CONVERGENCE_FIELDS = tuple(f for f in ErrorReport.FIELDS if f != 'wall_time') + ('slope',)
EQUIVALENCE_FIELDS = ('mesh_kind', 'mesh', 'n', 'gap', 'tolerance', 'expected', 'passed')
VERIFY_FIELDS = ('check', 'method', 'mesh_kind', 'mesh', 'value', 'threshold', 'passed')

PATCH_GRADIENT = ((1.0e-3, 2.0e-3), (-0.5e-3, 1.5e-3))
NULLSPACE_TOLERANCE = 1e-10
SPECTRAL_GAP = 1e-8
PATCH_TOLERANCE = 1e-9
ISOTROPY_TOLERANCE = 1e-9
VERIFY_N = 3
VERIFY_DISTORTION = 0.2

_templates = Environment(loader=PackageLoader('smoothfem', 'templates'), keep_trailing_newline=True,
                         trim_blocks=True, lstrip_blocks=True)


class MeshCase:
    """One mesh of a sweep with the size it is reported under."""

    def __init__(self, label, n, mesh):
        self.label = label
        self.n = n
        self.mesh = mesh

    def __repr__(self):
        return f"<MeshCase {self.label} N={self.n} {self.mesh}>"

    @property
    def equivalent_n(self):
        """N for grids; sqrt(N_e / 2) for triangles and sqrt(N_e) for quads read from files"""
        if self.label != 'file':
            return self.n
        per_square = 2.0 if self.mesh.kind == 'T3' else 1.0
        return float(np.sqrt(self.mesh.n_elements / per_square))

    @property
    def h(self):
        return 1.0 / self.equivalent_n


def _run(func, tasks, parallel):
    """Run independent tasks; results come back in task order"""
    if not parallel or Config.THREADS <= 1 or len(tasks) < 2:
        return [func(*task) for task in tasks]
    workers = min(Config.THREADS, len(tasks))
    logger.info(f"Running {len(tasks)} tasks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda task: func(*task), tasks))


def _material(config):
    return ElementService.dmatrix(config.E, config.nu, config.mode)


class ExperimentService:
    """Experiment drivers behind the command line: sweeps, checks and output files."""

    @staticmethod
    def build_problem(config):
        if config.problem == 'patch':
            return BlockProblem.patch(PATCH_GRADIENT, domain=config.domain, E=config.E, nu=config.nu,
                                      mode=config.mode, probe=config.probe)
        return BlockProblem.block(domain=config.domain, E=config.E, nu=config.nu, mode=config.mode,
                                  probe=config.probe, dirichlet=config.dirichlet)

    @staticmethod
    def build_mesh(kind, n, config, dirichlet=None, distortion=None):
        dirichlet = dirichlet or ('all' if config.problem == 'patch' else config.dirichlet)
        if kind in ('tri', 'T3'):
            mesh = MeshService.generate_regular_tri(n, config.pattern, config.domain, dirichlet)
        else:
            mesh = MeshService.generate_regular_quad(n, config.domain, dirichlet)
        magnitude = config.distortion if distortion is None else distortion
        if magnitude > 0:
            mesh = MeshService.distort_mesh(mesh, magnitude, config.seed)
        return mesh

    @staticmethod
    def meshes(config):
        """Mesh sweep of a config: generated grids (possibly distorted) then any mesh files"""
        cases = []
        label = 'distorted' if config.distortion > 0 else 'regular'
        for n in config.n:
            cases.append(MeshCase(label, n, ExperimentService.build_mesh(config.mesh_kind, n, config)))
        for path in config.mesh_files:
            mesh = read_mesh(path)
            if mesh.kind != config.element_kind:
                raise ConfigError(f"mesh file {path!r} holds {mesh.kind} elements, "
                                  f"expected {config.element_kind}", field='mesh_files')
            cases.append(MeshCase('file', mesh.n_elements, mesh))
        return cases

    @staticmethod
    def projection_errors(config, reference=None):
        """Best piecewise-constant approximation errors of the reference strain"""
        problem = ExperimentService.build_problem(config)
        if reference is None:
            reference = AnalysisService.solve_reference(problem, config.reference_n)

        def row(case):
            values = {space: AnalysisService.projection_error(reference, space, case.mesh,
                                                              config.quadrature_refinement)
                      for space in SPACES}
            logger.info(f"Projection errors {config.mesh_kind} {case.label} N={case.n}: "
                        + ', '.join(f"{k}={v:.4e}" for k, v in values.items()))
            return {'mesh_kind': config.mesh_kind, 'mesh': case.label, 'n': case.n,
                    'elements': case.mesh.n_elements, 'h': case.h, **values}

        return _run(row, [(case,) for case in ExperimentService.meshes(config)], config.parallel)

    @staticmethod
    def convergence_cell(method, case, reference, config):
        solution = AssemblyService.solve_method(case.mesh, reference.problem, method)
        error, _ = AnalysisService.energy_error(solution, reference, config.quadrature_refinement)
        representative = None
        if method == 'sse':
            representative = AnalysisService.representative_error(solution, reference,
                                                                  config.quadrature_refinement)[1]
        probe = np.asarray(reference.problem.probe, dtype=float)
        exact = float(reference.displacement_at(probe)[0, 0])
        approx = float(AnalysisService.probe_displacement(solution, probe)[0])
        probe_error = abs(approx - exact) / abs(exact) if exact != 0 else abs(approx - exact)
        return ErrorReport(method, case.n, case.h, error, reference.energy_norm, solution.n_free,
                           wall_time=solution.wall_time, mesh=case.label, probe_error=probe_error,
                           representative_error=representative)

    @staticmethod
    def convergence(config, reference=None):
        """
        Energy errors of every method on every mesh of the sweep

        Returns:
            list: row dicts in config order (methods outer, meshes inner) with
            the slope of the points so far, once two are available
        """
        problem = ExperimentService.build_problem(config)
        if reference is None:
            reference = AnalysisService.solve_reference(problem, config.reference_n)
        cases = ExperimentService.meshes(config)
        tasks = [(method, case, reference, config) for method in config.methods for case in cases]
        reports = _run(ExperimentService.convergence_cell, tasks, config.parallel)

        rows = []
        history = {}
        for report in reports:
            points = history.setdefault(report.method, [])
            points.append((report.h, report.relative_error))
            try:
                slope = AnalysisService.convergence_slope(points, min_points=2)
            except AnalysisError:
                slope = None
            row = report.to_dict()
            row['slope'] = slope
            rows.append(row)
            logger.info(f"{report.method} N={report.n}: E_e={report.relative_error:.4e}")
        return rows

    @staticmethod
    def stiffness_gap(mesh, material):
        """Relative Frobenius distance between the two SSE stiffness routes"""
        smoothing = AssemblyService.assemble_stiffness(mesh, material, 'sse', 'smoothing').K
        projection = AssemblyService.assemble_stiffness(mesh, material, 'sse', 'projection').K
        return float(sparse_norm(smoothing - projection) / sparse_norm(projection))

    @staticmethod
    def is_parallelogram_mesh(mesh, tol=1e-12):
        if mesh.kind == 'T3':
            return True
        c = mesh.corner_coords
        scale = max(float(np.ptp(mesh.vertices, axis=0).max()), 1e-300)
        return bool(np.abs(c[:, 0] + c[:, 2] - c[:, 1] - c[:, 3]).max() <= tol * scale)

    @staticmethod
    def equivalence(config):
        """Stiffness-route gap per mesh; only triangles and parallelograms are expected to pass"""
        material = _material(config)
        rows = []
        for case in ExperimentService.meshes(config):
            gap = ExperimentService.stiffness_gap(case.mesh, material)
            expected = ExperimentService.is_parallelogram_mesh(case.mesh)
            passed = gap <= config.equivalence_tolerance
            if not passed:
                level = logging.ERROR if expected else logging.WARNING
                logger.log(level, f"Equivalence gap {gap:.3e} on {case.label} {config.mesh_kind} N={case.n} "
                                  f"exceeds {config.equivalence_tolerance:.1e}")
            rows.append({'mesh_kind': config.mesh_kind, 'mesh': case.label, 'n': case.n, 'gap': gap,
                         'tolerance': config.equivalence_tolerance, 'expected': expected, 'passed': passed})
        return rows

    @staticmethod
    def nullspace_check(mesh, method, material):
        """Rigid modes in the kernel of the free stiffness and nothing else near it"""
        K = AssemblyService.assemble_stiffness(mesh, material, method).K
        modes = AssemblyService.rigid_body_modes(mesh)
        scale = sparse_norm(K) * np.linalg.norm(modes, axis=0)
        residual = float((np.linalg.norm(K @ modes, axis=0) / scale).max())
        eigenvalues = np.linalg.eigvalsh(K.toarray())
        gap = float(eigenvalues[3] / eigenvalues[-1])
        return [
            {'check': 'rigid_modes', 'method': method, 'value': residual,
             'threshold': NULLSPACE_TOLERANCE, 'passed': residual <= NULLSPACE_TOLERANCE},
            {'check': 'spectral_gap', 'method': method, 'value': gap,
             'threshold': SPECTRAL_GAP, 'passed': gap > SPECTRAL_GAP},
        ]

    @staticmethod
    def patch_check(mesh, method, material, gradient=PATCH_GRADIENT):
        """Linear displacement on the whole boundary must give the exact constant strain"""
        x0, y0 = mesh.vertices.min(axis=0)
        x1, y1 = mesh.vertices.max(axis=0)
        problem = BlockProblem.patch(gradient, domain=(x0, y0, x1, y1), E=material.E, nu=material.nu,
                                     mode=material.mode, probe=((x0 + x1) / 2, (y0 + y1) / 2))
        solution = AssemblyService.solve_method(mesh, problem, method, material)
        strains = solution.strains
        exact = problem.exact_strain(np.zeros((len(strains), 2)))
        error = float(np.abs(strains - exact).max() / np.abs(exact).max())
        return [{'check': 'patch', 'method': method, 'value': error,
                 'threshold': PATCH_TOLERANCE, 'passed': error <= PATCH_TOLERANCE}]

    @staticmethod
    def isotropy_check(mesh, method, material, angle=0.7, renumber=1):
        """Stiffness spectrum unchanged by rotating the mesh and shifting local node numbers"""
        rotated = MeshService.rotate_mesh(mesh, angle, renumber)
        before = np.linalg.eigvalsh(AssemblyService.assemble_stiffness(mesh, material, method).K.toarray())
        after = np.linalg.eigvalsh(AssemblyService.assemble_stiffness(rotated, material, method).K.toarray())
        gap = float(np.abs(before - after).max() / before[-1])
        return [{'check': 'isotropy', 'method': method, 'value': gap,
                 'threshold': ISOTROPY_TOLERANCE, 'passed': gap <= ISOTROPY_TOLERANCE}]

    @staticmethod
    def verify(config, methods=None):
        """Element verification suite on small regular and distorted meshes of both families"""
        material = _material(config)
        known = {m for family in METHODS_BY_KIND.values() for m in family}
        for method in methods or ():
            if method not in known:
                raise ConfigError(f"unknown method {method!r}", field='methods')
        rows = []
        for kind, family in METHODS_BY_KIND.items():
            selected = [m for m in family if methods is None or m in methods]
            if not selected:
                continue
            for label, distortion in (('regular', 0.0), ('distorted', VERIFY_DISTORTION)):
                free = ExperimentService.build_mesh(kind, VERIFY_N, config, 'none', distortion)
                clamped = ExperimentService.build_mesh(kind, VERIFY_N, config, 'all', distortion)
                for method in selected:
                    for check in (ExperimentService.nullspace_check(free, method, material)
                                  + ExperimentService.patch_check(clamped, method, material)
                                  + ExperimentService.isotropy_check(free, method, material)):
                        check.update({'mesh_kind': kind, 'mesh': label})
                        if not check['passed']:
                            logger.error(f"{method} on {label} {kind} mesh failed {check['check']}: "
                                         f"{check['value']:.3e} vs {check['threshold']:.1e}")
                        rows.append(check)
        logger.info(f"Verification: {sum(r['passed'] for r in rows)} of {len(rows)} checks passed")
        return rows

    @staticmethod
    def render_summary(command, config, rows, files):
        template = _templates.get_template('summary.txt.j2')
        return template.render(command=command, version=__version__, config=config.to_dict(),
                               rows=rows, files=files)

    @staticmethod
    def _write(command, config, rows, fields, stem, extra_files=()):
        os.makedirs(config.out, exist_ok=True)
        csv_path = write_csv(rows, fields, os.path.join(config.out, f"{stem}.csv"))
        files = [csv_path, *extra_files]
        summary_path = os.path.join(config.out, f"{stem}_summary.txt")
        with open(summary_path, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(ExperimentService.render_summary(command, config, rows, files))
        return files + [summary_path]

    @staticmethod
    def cmd_projection_errors(config):
        rows = ExperimentService.projection_errors(config)
        stem = f"projection_errors_{config.mesh_kind}"
        return rows, ExperimentService._write('projection-errors', config, rows, PROJECTION_FIELDS, stem)

    @staticmethod
    def cmd_convergence(config):
        rows = ExperimentService.convergence(config)
        stem = f"convergence_{config.mesh_kind}"
        extra = []
        if len({row['n'] for row in rows}) > 1:
            os.makedirs(config.out, exist_ok=True)
            curves = {}
            for row in rows:
                curves.setdefault(row['method'], []).append((row['h'], row['relative_error']))
            extra.append(convergence_plot(curves, os.path.join(config.out, f"{stem}.svg"),
                                          title=f"{config.problem} problem, {config.mesh_kind} meshes"))
        return rows, ExperimentService._write('convergence', config, rows, CONVERGENCE_FIELDS, stem, extra)

    @staticmethod
    def cmd_equivalence_check(config):
        rows = ExperimentService.equivalence(config)
        stem = f"equivalence_{config.mesh_kind}"
        return rows, ExperimentService._write('equivalence-check', config, rows, EQUIVALENCE_FIELDS, stem)

    @staticmethod
    def cmd_verify(config, methods=None):
        rows = ExperimentService.verify(config, methods)
        return rows, ExperimentService._write('verify', config, rows, VERIFY_FIELDS, 'verify')
