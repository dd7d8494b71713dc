import logging
from typing import Dict, Optional

import numpy as np

from fraclap.config import get_settings
from fraclap.core.exceptions import SolverError
from fraclap.core.solvers.base import BaseSolver
from fraclap.core.solvers.cg import CGSolver
from fraclap.core.solvers.cholesky import CholeskySolver
from fraclap.core.solvers.models import SolveResult

logger = logging.getLogger(__name__)


class SolverManager:
    def __init__(self, settings=None):
        self.settings = settings or get_settings()
        self.dense_threshold = self.settings.dense_threshold
        self._solver_instances: Dict[str, BaseSolver] = {}

    def _initialize_solver(self, solver_name: str) -> BaseSolver:
        """Create a backend on first use"""
        if solver_name not in self._solver_instances:
            if solver_name == "cholesky":
                self._solver_instances[solver_name] = CholeskySolver()
            elif solver_name == "cg":
                self._solver_instances[solver_name] = CGSolver(maxiter=self.settings.cg_maxiter)
            else:
                raise SolverError(f"Unknown solver: {solver_name}")
        return self._solver_instances[solver_name]

    def get_solver(self, solver_name: str) -> BaseSolver:
        return self._initialize_solver(solver_name.lower())

    def get_solver_for_size(self, n: int) -> BaseSolver:
        """Dense factorization up to the threshold, CG beyond"""
        return self._initialize_solver("cholesky" if n <= self.dense_threshold else "cg")

    def get_available_solvers(self) -> list:
        return ["cholesky", "cg"]

    def solve(self, matrix: np.ndarray, load: np.ndarray, tol: Optional[float] = None,
              method: Optional[str] = None) -> SolveResult:
        tol = self.settings.solver_tol if tol is None else tol
        if tol <= 0:
            raise SolverError(f"Solver tolerance must be positive, got {tol}")
        solver = self.get_solver(method) if method else self.get_solver_for_size(len(load))
        result = solver.solve(matrix, load, tol)
        logger.info(f"Solved n={result.n} with {result.method}: residual {result.residual:.2e} "
                    f"in {result.seconds:.2f}s")
        return result


# Global instance
_solver_manager = None


def get_solver_manager() -> SolverManager:
    global _solver_manager
    if _solver_manager is None:
        _solver_manager = SolverManager()
    return _solver_manager


def reset_solver_manager(settings=None) -> SolverManager:
    global _solver_manager
    _solver_manager = SolverManager(settings)
    return _solver_manager
