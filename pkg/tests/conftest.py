import numpy as np
import pytest
from click.testing import CliRunner

from smoothfem.models import BlockProblem
from smoothfem.services import AnalysisService, ElementService, MeshService


@pytest.fixture
def material():
    return ElementService.dmatrix(1.0e3, 0.2, 'plane_stress')


@pytest.fixture
def tri_mesh():
    return MeshService.generate_regular_tri(2)


@pytest.fixture
def quad_mesh():
    return MeshService.generate_regular_quad(2)


@pytest.fixture
def distorted_tri():
    return MeshService.distort_mesh(MeshService.generate_regular_tri(4), 0.2, seed=3)


@pytest.fixture
def distorted_quad():
    return MeshService.distort_mesh(MeshService.generate_regular_quad(4), 0.2, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope='session')
def block_reference():
    """Q9 reference of the clamped block on a 16 x 16 grid"""
    return AnalysisService.solve_reference(BlockProblem.block(), 16)


@pytest.fixture(scope='session')
def patch_reference():
    return AnalysisService.solve_reference(BlockProblem.patch([[1.0e-3, 2.0e-3], [-0.5e-3, 1.5e-3]]), 4)


@pytest.fixture(scope='session')
def fine_block_reference():
    """Q9 reference of the clamped block on the default 64 x 64 grid"""
    return AnalysisService.solve_reference(BlockProblem.block(), 64)
