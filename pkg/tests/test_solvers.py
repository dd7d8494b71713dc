import numpy as np
import pytest

from fraclap.core.exceptions import SolverError
from fraclap.core.solvers import CGSolver, CholeskySolver
from fraclap.core.utils.solver_manager import SolverManager


@pytest.fixture
def spd_system():
    rng = np.random.default_rng(7)
    basis = rng.standard_normal((20, 20))
    matrix = basis @ basis.T + 20.0 * np.eye(20)
    load = rng.standard_normal(20)
    return matrix, load


class TestSolverManager:
    def test_solver_by_size(self, mock_settings):
        manager = SolverManager(mock_settings)
        assert isinstance(manager.get_solver_for_size(50), CholeskySolver)
        assert isinstance(manager.get_solver_for_size(51), CGSolver)

    def test_solvers_are_cached(self, mock_settings):
        manager = SolverManager(mock_settings)
        solver = manager.get_solver("CG")
        assert solver is manager.get_solver("cg")
        assert solver.maxiter == 500
        assert solver.get_solver_name() == "cg"

    def test_unknown_solver(self, mock_settings):
        manager = SolverManager(mock_settings)
        with pytest.raises(SolverError):
            manager.get_solver("lu")

    @pytest.mark.parametrize("tol", [0.0, -1e-8])
    def test_tolerance_must_be_positive(self, mock_settings, spd_system, tol):
        manager = SolverManager(mock_settings)
        with pytest.raises(SolverError):
            manager.solve(*spd_system, tol=tol)

    def test_solve_uses_settings_tolerance(self, mock_settings, spd_system):
        matrix, load = spd_system
        result = SolverManager(mock_settings).solve(matrix, load)
        assert result.method == "cholesky"
        assert result.residual < 1e-10
        np.testing.assert_allclose(result.coefficients, np.linalg.solve(matrix, load), rtol=1e-10)


class TestCholeskySolver:
    def test_not_positive_definite(self):
        matrix = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(SolverError) as info:
            CholeskySolver().solve(matrix, np.ones(2), 1e-10)
        diagnostics = info.value.diagnostics
        assert diagnostics["n"] == 2
        assert diagnostics["smallest_eigenvalue"] == pytest.approx(-1.0)
        assert diagnostics["symmetry_error"] == 0.0

    def test_empty_system(self):
        result = CholeskySolver().solve(np.zeros((0, 0)), np.zeros(0), 1e-10)
        assert result.n == 0
        assert len(result.coefficients) == 0


class TestCGSolver:
    def test_converges(self, spd_system):
        matrix, load = spd_system
        result = CGSolver().solve(matrix, load, 1e-12)
        assert result.iterations > 0
        np.testing.assert_allclose(result.coefficients, np.linalg.solve(matrix, load), rtol=1e-8)

    def test_agrees_with_cholesky(self, spd_system):
        matrix, load = spd_system
        direct = CholeskySolver().solve(matrix, load, 1e-12).coefficients
        iterative = CGSolver().solve(matrix, load, 1e-12, initial_guess=np.zeros(20)).coefficients
        np.testing.assert_allclose(iterative, direct, rtol=1e-8, atol=1e-12)

    def test_iteration_limit(self):
        matrix = np.diag(np.arange(1.0, 11.0))
        with pytest.raises(SolverError) as info:
            CGSolver(maxiter=1).solve(matrix, np.ones(10), 1e-12)
        assert info.value.diagnostics["iterations"] == 1
        assert info.value.diagnostics["info"] > 0
