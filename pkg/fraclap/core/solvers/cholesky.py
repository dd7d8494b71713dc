import logging
import time

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from fraclap.core.exceptions import SolverError
from fraclap.core.solvers.base import BaseSolver
from fraclap.core.solvers.models import SolveResult

logger = logging.getLogger(__name__)


class CholeskySolver(BaseSolver):
    """Dense symmetric positive definite factorization."""

    def solve(self, matrix: np.ndarray, load: np.ndarray, tol: float) -> SolveResult:
        started = time.perf_counter()
        n = len(load)
        if n == 0:
            return SolveResult(coefficients=np.zeros(0), method="cholesky", n=0, residual=0.0)
        try:
            factor = cho_factor(matrix, lower=True, check_finite=True)
        except (LinAlgError, ValueError) as e:
            diagnostics = self.diagnostics(matrix)
            logger.error(f"Cholesky factorization failed for n={n}: {e}; {diagnostics}")
            raise SolverError(f"Stiffness matrix is not positive definite (n={n}): {e}", diagnostics) from e

        coefficients = cho_solve(factor, load)
        residual = self.relative_residual(matrix, load, coefficients)
        if residual > tol:
            logger.warning(f"Cholesky residual {residual:.3e} above tolerance {tol:.1e}")
        return SolveResult(
            coefficients=coefficients,
            method="cholesky",
            n=n,
            residual=residual,
            seconds=time.perf_counter() - started,
        )
