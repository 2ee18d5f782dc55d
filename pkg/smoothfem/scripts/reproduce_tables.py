import logging
import os

from smoothfem.config import load_config
from smoothfem.config.experiment import PATTERNS
from smoothfem.services.analysis_service import AnalysisService
from smoothfem.services.experiment_service import (CONVERGENCE_FIELDS, EQUIVALENCE_FIELDS,
                                                   PROJECTION_FIELDS, ExperimentService)
from smoothfem.utils.plotting import convergence_plot
from smoothfem.utils.tables import write_csv

logger = logging.getLogger('reproduce_tables')

DISTORTION = 0.2
PATTERN_FIELDS = ('pattern',) + PROJECTION_FIELDS


def pattern_sweep(base, reference, patterns=PATTERNS):
    """Regular-mesh projection errors for every triangulation pattern"""
    rows = []
    for pattern in patterns:
        config = load_config(overrides={**base, 'mesh_kind': 'tri', 'pattern': pattern, 'distortion': 0.0})
        rows.extend({'pattern': pattern, **row} for row in ExperimentService.projection_errors(config, reference))
    return rows


def reproduce_tables(out='results', reference_n=64, n=(2, 4, 8, 16), seed=1):
    """
    Projection tables, convergence curves and the stiffness-route check for
    both element families, all against one shared Q9 reference. Triangle
    projection errors are also swept over the three diagonal patterns.

    Returns:
        list: paths of the files written
    """
    os.makedirs(out, exist_ok=True)
    n = ','.join(str(v) for v in n)
    base = {'out': out, 'reference_n': reference_n, 'n': n, 'seed': seed}
    problem = ExperimentService.build_problem(load_config(overrides=base))
    reference = AnalysisService.solve_reference(problem, reference_n)
    files = []

    files.append(write_csv(pattern_sweep(base, reference), PATTERN_FIELDS,
                           os.path.join(out, 'projection_patterns_tri.csv')))

    for kind in ('tri', 'quad'):
        projection_rows = []
        for distortion in (0.0, DISTORTION):
            config = load_config(overrides={**base, 'mesh_kind': kind, 'distortion': distortion})
            projection_rows.extend(ExperimentService.projection_errors(config, reference))
        files.append(write_csv(projection_rows, PROJECTION_FIELDS,
                               os.path.join(out, f"projection_errors_{kind}.csv")))

        config = load_config(overrides={**base, 'mesh_kind': kind})
        rows = ExperimentService.convergence(config, reference)
        files.append(write_csv(rows, CONVERGENCE_FIELDS, os.path.join(out, f"convergence_{kind}.csv")))
        curves = {}
        for row in rows:
            curves.setdefault(row['method'], []).append((row['h'], row['relative_error']))
        files.append(convergence_plot(curves, os.path.join(out, f"convergence_{kind}.svg"),
                                      title=f"block problem, {kind} meshes"))

        equivalence_rows = []
        for distortion in (0.0, DISTORTION):
            config = load_config(overrides={**base, 'mesh_kind': kind, 'distortion': distortion})
            equivalence_rows.extend(ExperimentService.equivalence(config))
        files.append(write_csv(equivalence_rows, EQUIVALENCE_FIELDS,
                               os.path.join(out, f"equivalence_{kind}.csv")))

    logger.info(f"Reproduction finished: {len(files)} files in {out}")
    return files
