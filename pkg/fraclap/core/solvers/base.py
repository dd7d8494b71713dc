from abc import ABC, abstractmethod
from typing import Any, Dict

import numpy as np

from fraclap.core.solvers.models import SolveResult


class BaseSolver(ABC):

    def __init__(self):
        self.settings = None

    @abstractmethod
    def solve(self, matrix: np.ndarray, load: np.ndarray, tol: float) -> SolveResult:
        pass

    def get_solver_name(self) -> str:
        return self.__class__.__name__.lower().replace("solver", "")

    @staticmethod
    def relative_residual(matrix: np.ndarray, load: np.ndarray, coefficients: np.ndarray) -> float:
        scale = np.linalg.norm(load)
        if scale == 0.0:
            return float(np.linalg.norm(matrix @ coefficients))
        return float(np.linalg.norm(matrix @ coefficients - load) / scale)

    @staticmethod
    def diagnostics(matrix: np.ndarray) -> Dict[str, Any]:
        """Cheap facts about a matrix that failed to solve."""
        info: Dict[str, Any] = {"n": int(matrix.shape[0])}
        if matrix.size == 0:
            return info
        scale = float(np.abs(matrix).max()) or 1.0
        info["min_diagonal"] = float(np.diag(matrix).min())
        info["symmetry_error"] = float(np.abs(matrix - matrix.T).max() / scale)
        info["finite"] = bool(np.isfinite(matrix).all())
        if matrix.shape[0] <= 2000 and info["finite"]:
            info["smallest_eigenvalue"] = float(np.linalg.eigvalsh(0.5 * (matrix + matrix.T))[0])
        return info
