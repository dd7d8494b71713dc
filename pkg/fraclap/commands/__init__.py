from .audits import run_audits
from .mesh_refine import run_mesh_refine
from .rates import run_rates
from .seminorm import run_seminorm
from .solve import run_solve
