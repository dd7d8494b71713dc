"""Galerkin solutions, closed-form oracles and energy-norm errors."""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.special import gamma

from fraclap.core.assembly.dofs import DofMap
from fraclap.core.assembly.stiffness import StiffnessSystem, lambda_constant
from fraclap.core.exceptions import NestingError, QuadratureError
from fraclap.core.mesh import Mesh
from fraclap.core.utils.solver_manager import get_solver_manager
from fraclap.core.utils.tables import write_table

logger = logging.getLogger(__name__)

NEGATIVE_TOLERANCE = 1e-12
MAX_PRINCIPLE_TOLERANCE = 1e-10
CLOSED_FORM_TOLERANCE = 1e-4


@dataclass
class GalerkinSolution:
    coefficients: np.ndarray
    fingerprint: str
    s: float
    energy: float
    dofmap: DofMap
    source: str = "1"
    mesh: Optional[Mesh] = None
    residual: float = 0.0
    method: str = ""
    lineage: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def n_dofs(self) -> int:
        return len(self.coefficients)

    @property
    def nodal_values(self) -> np.ndarray:
        """Values at every mesh vertex, zero on the boundary."""
        return self.dofmap.extend(self.coefficients)


def solve(system: StiffnessSystem, tol: Optional[float] = None, method: Optional[str] = None) -> GalerkinSolution:
    result = get_solver_manager().solve(system.matrix, system.load, tol=tol, method=method)
    coefficients = np.asarray(result.coefficients, dtype=float)
    energy = float(system.load @ coefficients)

    quadratic = float(coefficients @ system.matrix @ coefficients)
    if abs(quadratic - energy) > 1e-8 * max(abs(energy), 1e-300):
        logger.warning(f"Energy identity off: b.c = {energy:.12g}, c.Ac = {quadratic:.12g}")

    if system.source.strip() == "1" and len(coefficients):
        lowest = float(coefficients.min())
        if lowest < 0.0:
            level = logging.WARNING if lowest > -MAX_PRINCIPLE_TOLERANCE else logging.ERROR
            logger.log(level, f"Maximum principle proxy violated: smallest coefficient {lowest:.3e}")

    mesh = system.mesh
    return GalerkinSolution(
        coefficients=coefficients,
        fingerprint=system.fingerprint,
        s=system.s,
        energy=energy,
        dofmap=system.dofmap,
        source=system.source,
        mesh=mesh,
        residual=result.residual,
        method=result.method,
        lineage=mesh.lineage if mesh is not None else (),
    )


def closed_form_constant(d: int, s: float) -> float:
    """K(d, s) with (-Delta)^s K (1 - |x|^2)_+^s = 1 on the unit ball."""
    if not 0.0 < s < 1.0:
        raise QuadratureError(f"s = {s} outside (0, 1)")
    return gamma(0.5 * d) / (2.0 ** (2.0 * s) * gamma(0.5 * d + s) * gamma(1.0 + s))


def closed_form_ball(d: int, s: float) -> Callable[[np.ndarray], np.ndarray]:
    constant = closed_form_constant(d, s)

    def exact(points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, d)
        return constant * np.clip(1.0 - (points ** 2).sum(axis=1), 0.0, None) ** s

    exact.s = s
    exact.constant = constant
    return exact


def closed_form_energy(d: int, s: float) -> float:
    """<1, u*> for the unit ball."""
    constant = closed_form_constant(d, s)
    return constant * math.pi ** (0.5 * d) * gamma(1.0 + s) / gamma(0.5 * d + 1.0 + s)


def fractional_laplacian_1d(u: Callable[[np.ndarray], np.ndarray], x: float, s: float,
                            second_derivative: float) -> float:
    """(-Delta)^s u(x) for u supported in [-1, 1], by the symmetrized principal value integral.

    Near t = 0 the second difference is replaced by its leading Taylor term.
    """
    ux = float(u(np.array([[x]]))[0])
    near = 1.0 - abs(x)
    far = 1.0 + abs(x)
    tau = 1e-3 * near

    def integrand(t: float) -> float:
        values = u(np.array([[x + t], [x - t]]))
        return (2.0 * ux - values[0] - values[1]) * t ** (-1.0 - 2.0 * s)

    total = -second_derivative * tau ** (2.0 - 2.0 * s) / (2.0 - 2.0 * s)
    total += integrate.quad(integrand, tau, near, limit=200, epsabs=1e-12, epsrel=1e-10)[0]
    if far > near:
        total += integrate.quad(integrand, near, far, limit=200, epsabs=1e-12, epsrel=1e-10)[0]
    total += 2.0 * ux * far ** (-2.0 * s) / (2.0 * s)
    return lambda_constant(1, s) * total


@lru_cache(maxsize=64)
def validate_closed_form_1d(s: float, tolerance: float = CLOSED_FORM_TOLERANCE) -> float:
    """Largest deviation of (-Delta)^s u* from 1 at x in {0, 0.5, -0.5}; raises above tolerance."""
    exact = closed_form_ball(1, s)
    constant = exact.constant
    worst = 0.0
    for x in (0.0, 0.5, -0.5):
        w = 1.0 - x * x
        second = constant * (-2.0 * s * w ** (s - 1.0) + 4.0 * s * (s - 1.0) * x * x * w ** (s - 2.0))
        value = fractional_laplacian_1d(exact, x, s, second)
        worst = max(worst, abs(value - 1.0))
    if worst > tolerance:
        raise QuadratureError(f"Closed form for s={s} fails validation: |(-Delta)^s u - 1| = {worst:.2e}")
    logger.debug(f"Closed form for s={s} validated, deviation {worst:.2e}")
    return worst


def closed_form_1d(s: float, validate: bool = True) -> Callable[[np.ndarray], np.ndarray]:
    """u*(x) = K(s) (1 - x^2)_+^s, the solution of (-Delta)^s u = 1 on (-1, 1)."""
    if validate:
        validate_closed_form_1d(float(s))
    return closed_form_ball(1, s)


def _check_compatible(coarse: GalerkinSolution, fine: GalerkinSolution) -> None:
    if coarse.fingerprint != fine.fingerprint and coarse.fingerprint not in fine.lineage:
        raise NestingError(f"Mesh {fine.fingerprint[:8]} is not a refinement of {coarse.fingerprint[:8]}")
    if coarse.s != fine.s:
        raise NestingError(f"Solutions for different s: {coarse.s} and {fine.s}")
    if coarse.source != fine.source:
        raise NestingError(f"Solutions for different sources: '{coarse.source}' and '{fine.source}'")


def _clamped_root(value: float, what: str) -> float:
    if value < -NEGATIVE_TOLERANCE:
        raise NestingError(f"Negative {what} {value:.3e}: broken nesting or solver failure")
    if value < 0.0:
        logger.warning(f"Clamped negative {what} {value:.3e} to zero")
        value = 0.0
    return math.sqrt(value)


def surrogate_energy_error(coarse: GalerkinSolution, fine: GalerkinSolution) -> float:
    """||u_fine - u_coarse||_a = sqrt(<f, u_fine> - <f, u_coarse>) on nested meshes."""
    _check_compatible(coarse, fine)
    if coarse.fingerprint == fine.fingerprint:
        return 0.0
    return _clamped_root(fine.energy - coarse.energy, "energy difference")


def prolongate(coarse: GalerkinSolution, fine_mesh: Mesh) -> np.ndarray:
    """Nodal values of the coarse solution on every vertex of a refinement.

    Vertices of the coarse mesh keep their numbers and each later vertex is
    the midpoint of the edge recorded as its parents.
    """
    if coarse.mesh is None:
        raise NestingError("Coarse solution carries no mesh")
    if not fine_mesh.is_refinement_of(coarse.mesh):
        raise NestingError(f"Mesh {fine_mesh.fingerprint[:8]} is not a refinement of {coarse.fingerprint[:8]}")
    coarse_values = coarse.nodal_values
    values = np.zeros(fine_mesh.n_vertices)
    n_coarse = len(coarse_values)
    values[:n_coarse] = coarse_values
    for vid in range(n_coarse, fine_mesh.n_vertices):
        a, b = fine_mesh.vertex_parents[vid]
        if a < 0:
            raise NestingError(f"Vertex {vid} of the fine mesh has no parent edge")
        values[vid] = 0.5 * (values[a] + values[b])
    return values


def prolongated_energy_error(coarse: GalerkinSolution, fine: GalerkinSolution, fine_system: StiffnessSystem) -> float:
    """sqrt(e^T A_fine e) with e the fine solution minus the prolongated coarse one."""
    _check_compatible(coarse, fine)
    if fine.mesh is None:
        raise NestingError("Fine solution carries no mesh")
    error = fine.coefficients - fine.dofmap.restrict(prolongate(coarse, fine.mesh))
    return _clamped_root(float(error @ fine_system.matrix @ error), "error energy")


def closed_form_energy_error(solution: GalerkinSolution, exact_energy: float) -> float:
    """Energy error against a known <f, u>, by Galerkin orthogonality."""
    return _clamped_root(exact_energy - solution.energy, "oracle energy difference")


def nodal_deviation(solution: GalerkinSolution, exact: Callable[[np.ndarray], np.ndarray]) -> float:
    if solution.mesh is None:
        raise NestingError("Solution carries no mesh")
    return float(np.abs(exact(solution.mesh.vertices) - solution.nodal_values).max())


def export_solution(solution: GalerkinSolution, path: str, metadata: Optional[Mapping[str, object]] = None) -> str:
    """CSV of vertex coordinates and values, boundary zeros included."""
    if solution.mesh is None:
        raise NestingError("Solution carries no mesh")
    coords = solution.mesh.vertices
    columns = ["x", "u"] if solution.mesh.dim == 1 else ["x", "y", "u"]
    rows = [tuple(float(c) for c in point) + (float(value),) for point, value in zip(coords, solution.nodal_values)]
    header = {"s": solution.s, "fingerprint": solution.fingerprint, "energy": solution.energy}
    header.update(metadata or {})
    return write_table(path, columns, rows, header)
