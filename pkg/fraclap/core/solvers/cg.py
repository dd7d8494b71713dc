import logging
import time
from typing import Optional

import numpy as np
from scipy.sparse.linalg import cg

from fraclap.core.exceptions import SolverError
from fraclap.core.solvers.base import BaseSolver
from fraclap.core.solvers.models import SolveResult

logger = logging.getLogger(__name__)


class CGSolver(BaseSolver):
    """Unpreconditioned conjugate gradients on the dense matrix."""

    def __init__(self, maxiter: int = 20000):
        super().__init__()
        self.maxiter = maxiter

    def solve(self, matrix: np.ndarray, load: np.ndarray, tol: float,
              initial_guess: Optional[np.ndarray] = None) -> SolveResult:
        started = time.perf_counter()
        n = len(load)
        if n == 0:
            return SolveResult(coefficients=np.zeros(0), method="cg", n=0, residual=0.0, iterations=0)

        iterations = 0

        def count(_):
            nonlocal iterations
            iterations += 1

        coefficients, info = cg(matrix, load, x0=initial_guess, rtol=tol, atol=0.0,
                                maxiter=self.maxiter, callback=count)
        residual = self.relative_residual(matrix, load, coefficients)
        if info != 0:
            diagnostics = self.diagnostics(matrix)
            diagnostics.update({"iterations": iterations, "residual": residual, "info": int(info)})
            raise SolverError(f"CG did not reach rtol={tol:.1e} in {iterations} iterations", diagnostics)

        logger.debug(f"CG converged in {iterations} iterations, residual {residual:.3e}")
        return SolveResult(
            coefficients=coefficients,
            method="cg",
            n=n,
            residual=residual,
            iterations=iterations,
            seconds=time.perf_counter() - started,
        )
