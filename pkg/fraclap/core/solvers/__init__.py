from .base import BaseSolver
from .cg import CGSolver
from .cholesky import CholeskySolver
from .models import SolveResult
