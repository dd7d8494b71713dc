import pytest
from unittest.mock import Mock

from fraclap.config import Settings
from fraclap.core.assembly import AssemblyConfig
from fraclap.core.mesh import make_domain, make_initial_mesh
from fraclap.core.quadrature.tail import TailConfig
from fraclap.core.utils import solver_manager as solver_manager_module


@pytest.fixture
def lshape():
    return make_domain("lshape")


@pytest.fixture
def unit_square():
    return make_domain("unit_square")


@pytest.fixture
def interval():
    return make_domain("interval")


@pytest.fixture
def lshape_mesh(lshape):
    """Six structured triangles."""
    return make_initial_mesh(lshape, 1.0)


@pytest.fixture
def fine_lshape_mesh(lshape):
    """Twenty-four structured triangles."""
    return make_initial_mesh(lshape, 0.5)


@pytest.fixture
def square_mesh(unit_square):
    return make_initial_mesh(unit_square, 0.25)


@pytest.fixture
def interval_mesh(interval):
    """Eight elements on (-1, 1)."""
    return make_initial_mesh(interval, 0.25)


@pytest.fixture
def small_config():
    return AssemblyConfig(quad_order=4, far_order=2, max_workers=1,
                          tail=TailConfig(angular_nodes=32, order=2, grading_levels=3))


@pytest.fixture
def settings(tmp_path):
    """Real settings with small problem sizes and a temporary output directory."""
    return Settings(
        out=str(tmp_path / "results"),
        s_values="0.5",
        target_h=0.5,
        cap=60,
        max_workers=1,
        quad_order=4,
        tail_angular_nodes=32,
        tail_grading_levels=3,
        fine_sweeps=1,
        time_max=600.0,
    )


@pytest.fixture
def mock_settings():
    """Mock settings for testing."""
    settings = Mock()
    settings.dense_threshold = 50
    settings.solver_tol = 1e-10
    settings.cg_maxiter = 500
    settings.out = "results"
    settings.seed = 0
    settings.log_level = "INFO"
    return settings


@pytest.fixture
def solver_manager(mock_settings):
    """Global solver manager built from mock settings, cleared afterwards."""
    manager = solver_manager_module.reset_solver_manager(mock_settings)
    yield manager
    solver_manager_module._solver_manager = None
