"""Numerical experiments around fractional Sobolev seminorms.

Each function returns a small table (a frozen dataclass with rows) that the
audit layer turns into pass/fail verdicts and the command layer into CSV.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.special import beta as beta_function
from shapely.ops import polylabel

from fraclap.core.assembly.dofs import BOUNDARY, DofMap
from fraclap.core.assembly.stiffness import AssemblyConfig, assemble_bilinear
from fraclap.core.exceptions import ConfigError, MeshError, SeminormDivergenceError
from fraclap.core.mesh import Mesh, uniform_refine
from fraclap.core.mesh.geometry import Domain
from fraclap.core.quadrature.pairs import energy_pair_matrix
from fraclap.core.quadrature.rules import gauss_jacobi, gauss_legendre
from fraclap.core.quadrature.tail import tail_element_matrices
from fraclap.core.solution import closed_form_constant
from fraclap.core.sobolev.models import ModelFunction, PowerModel
from fraclap.core.sobolev.seminorm import Region, SeminormQuery, evaluate

logger = logging.getLogger(__name__)


def fit_slope(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log y against log x; None with fewer than two usable points."""
    pairs = [(a, b) for a, b in zip(x, y) if a > 0.0 and b > 0.0 and math.isfinite(a) and math.isfinite(b)]
    if len(pairs) < 2:
        return None
    lx, ly = np.log(np.array(pairs)).T
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


@dataclass(frozen=True)
class BBMRow:
    epsilon: float
    seminorm: float
    derivative_norm: float
    ratio: float


def bbm_limit_check(v: ModelFunction, p: float = 2.0, epsilons: Sequence[float] = (0.2, 0.1, 0.05, 0.02),
                    a: float = 0.0, b: float = 1.0, budget: int = 32, max_budget: int = 480,
                    grading_ratio: float = 0.25) -> List[BBMRow]:
    """|v|_{W^(1-eps)_p(a, b)} next to ||v'||_{L^p(a, b)} for a decreasing eps grid.

    The ratio is NaN when v' vanishes.
    """
    derivative = v.derivative_norm(p, a, b)
    rows = []
    for epsilon in epsilons:
        if not 0.0 < epsilon < 1.0:
            raise ConfigError(f"epsilon = {epsilon} outside (0, 1)")
        query = SeminormQuery(target=v, sigma=1.0 - epsilon, p=p, region=Region.interval(a, b),
                              budget=budget, max_budget=max_budget, grading_ratio=grading_ratio)
        value = evaluate(query).value
        ratio = value / derivative if derivative > 0.0 else float("nan")
        logger.info(f"BBM {v.name}: eps={epsilon} seminorm={value:.6g} |v'|={derivative:.6g} ratio={ratio:.4f}")
        rows.append(BBMRow(epsilon, value, derivative, ratio))
    return rows


@dataclass(frozen=True)
class LocalizationResult:
    lhs: float
    patch: float
    zero_order: float
    ratio: Optional[float]

    @property
    def rhs(self) -> float:
        """Patch terms plus zero-order terms with C = 1."""
        return self.patch + self.zero_order

    @property
    def flagged(self) -> bool:
        return self.ratio is None


@dataclass(frozen=True)
class LocalizationForms:
    """Quadratic forms on interior dofs of the full norm, the patch terms and the zero-order terms."""
    full: np.ndarray
    patch: np.ndarray
    zero_order: np.ndarray
    dofmap: DofMap


def _mass_matrix(dim: int, volume: float) -> np.ndarray:
    return volume * (np.ones((dim + 1, dim + 1)) + np.eye(dim + 1)) / ((dim + 1) * (dim + 2))


def localization_forms(mesh: Mesh, s: float, config: AssemblyConfig = AssemblyConfig()) -> LocalizationForms:
    dofmap = DofMap.from_mesh(mesh)
    n = dofmap.n_dofs
    full = assemble_bilinear(mesh, s, config, dofmap)
    patch = np.zeros((n, n))
    zero = np.zeros((n, n))

    arrays = mesh.arrays()
    index = {int(eid): k for k, eid in enumerate(arrays.ids)}

    def scatter(target: np.ndarray, labels, local: np.ndarray) -> None:
        dofs = dofmap.dofs(labels)
        keep = dofs != BOUNDARY
        if keep.any():
            target[np.ix_(dofs[keep], dofs[keep])] += local[np.ix_(keep, keep)]

    pairs = set()
    for eid, element in mesh.elements.items():
        ring1 = set().union(*(mesh.vertex_elements(v) for v in element.vertex_ids))
        pairs.update((min(eid, t), max(eid, t)) for t in ring1)
    for a, b in sorted(pairs):
        union, local = energy_pair_matrix(
            mesh.element_coords(a), mesh.element_coords(b),
            mesh.elements[a].vertex_ids, mesh.elements[b].vertex_ids,
            s, config.quad_order, config.disjoint_depth,
        )
        scatter(patch, union, local if a == b else 2.0 * local)

    tails = tail_element_matrices(mesh, s, config.tail)
    for k in np.flatnonzero(arrays.boundary_elements):
        scatter(patch, arrays.cells[k], tails[k])

    for k, cell in enumerate(arrays.cells):
        volume = abs(arrays.volumes[k])
        scatter(zero, cell, _mass_matrix(mesh.dim, volume) / (s * arrays.h[k] ** (2.0 * s)))

    logger.debug(f"Localization forms on {mesh.n_elements} elements, {len(pairs)} patch pairs")
    return LocalizationForms(full=full, patch=0.5 * (patch + patch.T), zero_order=zero, dofmap=dofmap)


def _localization_values(forms: LocalizationForms, nodal: np.ndarray) -> LocalizationResult:
    c = forms.dofmap.restrict(nodal)
    lhs = float(c @ forms.full @ c)
    patch = float(c @ forms.patch @ c)
    zero = float(c @ forms.zero_order @ c)
    ratio = (lhs - patch) / zero if zero > 0.0 else None
    return LocalizationResult(lhs=lhs, patch=patch, zero_order=zero, ratio=ratio)


def _check_boundary_values(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    nodal = np.asarray(nodal, dtype=float)
    if len(nodal) != mesh.n_vertices:
        raise MeshError(f"Expected {mesh.n_vertices} nodal values, got {len(nodal)}")
    boundary = sorted(mesh.boundary_vertex_ids())
    scale = max(float(np.abs(nodal).max()) if len(nodal) else 0.0, 1.0)
    if boundary and np.abs(nodal[boundary]).max() > 1e-14 * scale:
        raise MeshError("The function must vanish on boundary vertices")
    return nodal


def localization_audit(mesh: Mesh, v: np.ndarray, s: float,
                       config: AssemblyConfig = AssemblyConfig()) -> LocalizationResult:
    """Full norm, patch terms, zero-order terms and the empirical constant for nodal values v.

    The extended star of a boundary element contributes the integral of v^2
    against the complement weight.
    """
    nodal = _check_boundary_values(mesh, v)
    return _localization_values(localization_forms(mesh, s, config), nodal)


@dataclass(frozen=True)
class LocalizationStudy:
    levels: Tuple[int, ...]
    ratios: Tuple[Tuple[float, ...], ...]
    violations: int

    @property
    def level_constants(self) -> Tuple[float, ...]:
        return tuple(max(r) for r in self.ratios)

    @property
    def spread(self) -> float:
        constants = self.level_constants
        return max(constants) / min(constants)


def localization_study(mesh0: Mesh, s: float, levels: int = 4, samples: int = 25, seed: int = 0,
                       sweeps: int = 2, config: AssemblyConfig = AssemblyConfig()) -> LocalizationStudy:
    """Empirical constants for random nodal functions on nested uniform refinements."""
    rng = np.random.default_rng(seed)
    mesh = mesh0
    sizes, per_level, results = [], [], []
    for level in range(levels):
        if level:
            mesh = uniform_refine(mesh, sweeps)
        forms = localization_forms(mesh, s, config)
        level_results = []
        for _ in range(samples):
            nodal = forms.dofmap.extend(rng.uniform(-1.0, 1.0, forms.dofmap.n_dofs))
            level_results.append(_localization_values(forms, nodal))
        ratios = tuple(r.ratio for r in level_results if r.ratio is not None)
        if not ratios:
            raise MeshError(f"No interior dofs at refinement level {level}")
        logger.info(f"Localization level {level}: {mesh.n_elements} elements, ratio* = {max(ratios):.4g}")
        sizes.append(mesh.n_elements)
        per_level.append(ratios)
        results.extend(level_results)

    worst = max(max(r) for r in per_level)
    violations = sum(1 for r in results if r.lhs > r.patch + worst * r.zero_order * (1.0 + 1e-12))
    return LocalizationStudy(levels=tuple(sizes), ratios=tuple(per_level), violations=violations)


@dataclass(frozen=True)
class BlowupRow:
    parameter: float
    value: float
    factor: float
    budget: int
    converged: bool


@dataclass(frozen=True)
class BlowupTable:
    rows: Tuple[BlowupRow, ...]
    slope: Optional[float]
    partial: bool = False


def regularity_blowup(s: float = 0.25, p: float = 2.0, r_grid: Sequence[float] = (0.55, 0.65, 0.70, 0.73),
                      budget: int = 32, max_budget: int = 480, grading_ratio: float = 0.25,
                      tolerance: float = 0.1) -> BlowupTable:
    """|x_+^s|^p in W^r_p near 0 with zero extension to the left, against 1/(1 - p(r - s)).

    A divergent budget escalation ends the table; the rows computed so far are returned.
    """
    threshold = s + 1.0 / p
    model = PowerModel(exponent=s)
    rows: List[BlowupRow] = []
    partial = False
    for r in r_grid:
        if not 0.0 < r < min(threshold, 1.0):
            raise ConfigError(f"r = {r} must lie in (0, min(s + 1/p, 1)) = (0, {min(threshold, 1.0)})")
        factor = 1.0 / (1.0 - p * (r - s))
        query = SeminormQuery(target=model, sigma=r, p=p, region=Region.half_line(0.0, 1.0), budget=budget,
                              max_budget=max_budget, grading_ratio=grading_ratio, tolerance=tolerance)
        try:
            result = evaluate(query)
        except SeminormDivergenceError as e:
            logger.warning(f"Blow-up table stops at r={r}: {e}")
            rows.append(BlowupRow(r, e.last, factor, max_budget, False))
            partial = True
            break
        logger.info(f"Regularity r={r}: seminorm^p={result.integral:.6g}, factor={factor:.4g}, budget={result.budget}")
        rows.append(BlowupRow(r, result.integral, factor, result.budget, True))

    converged = [row for row in rows if row.converged]
    slope = fit_slope([row.factor for row in converged], [row.value for row in converged])
    return BlowupTable(rows=tuple(rows), slope=slope, partial=partial)


def gradient_power_integral(s: float, p: float) -> float:
    """Integral of |u*'|^p over (-1, 1) for the one-dimensional closed form, by weighted quadrature."""
    exponent = (s - 1.0) * p
    if exponent <= -1.0:
        raise ConfigError(f"|u*'|^p is not integrable for p = {p} >= 1/(1 - s) = {1.0 / (1.0 - s)}")
    scale = (2.0 * s * closed_form_constant(1, s)) ** p
    # |x|^p (1 + x)^((s-1)p) against the weight (1 - x)^((s-1)p) on (0, 1), twice by symmetry
    value, _ = integrate.quad(lambda x: x ** p * (1.0 + x) ** exponent, 0.0, 1.0,
                              weight="alg", wvar=(0.0, exponent))
    return 2.0 * scale * value


def gradient_power_exact(s: float, p: float) -> float:
    return (2.0 * s * closed_form_constant(1, s)) ** p * beta_function(0.5 * (p + 1.0), 1.0 - p * (1.0 - s))


def gradient_blowup(s: float = 0.5, p_grid: Sequence[float] = (1.5, 1.8, 1.9, 1.95)) -> BlowupTable:
    """||u*'||_{L^p}^p against 1/(1 - p(1 - s)) as p approaches 1/(1 - s)."""
    rows = []
    for p in p_grid:
        factor = 1.0 / (1.0 - p * (1.0 - s))
        value = gradient_power_integral(s, p)
        logger.info(f"Gradient blow-up p={p}: integral={value:.6g}, factor={factor:.4g}")
        rows.append(BlowupRow(p, value, factor, 0, True))
    return BlowupTable(rows=tuple(rows), slope=fit_slope([r.factor for r in rows], [r.value for r in rows]))


def inradius(domain: Domain) -> float:
    if domain.dim == 1:
        return 0.5 * domain.area
    centre = polylabel(domain.polygon, tolerance=1e-6 * domain.diameter)
    return float(domain.polygon.exterior.distance(centre))


def level_set_length(domain: Domain, t: float) -> float:
    """Length of {x in the domain : dist(x, boundary) = t}."""
    if t <= 0.0:
        return float(domain.polygon.length)
    eroded = domain.polygon.buffer(-t)
    return 0.0 if eroded.is_empty else float(eroded.length)


def distance_power_integral(domain: Domain, alpha: float, order: int = 20, panels: int = 16) -> float:
    """Integral over the domain of dist(x, boundary)^(-alpha), alpha < 1, by the coarea formula.

    The level t runs over (0, inradius): Gauss-Jacobi with weight t^(-alpha)
    on the first panel, Gauss-Legendre on the rest.
    """
    if not alpha < 1.0:
        raise ConfigError(f"alpha = {alpha} must be below 1")
    top = inradius(domain)
    if domain.dim == 1:
        return 2.0 * top ** (1.0 - alpha) / (1.0 - alpha)

    cut = top / panels
    t, w = gauss_jacobi(order, 0.0, -alpha)
    total = cut ** (1.0 - alpha) * sum(wk * level_set_length(domain, cut * tk) for tk, wk in zip(t, w))
    edges = np.linspace(cut, top, panels)
    for left, right in zip(edges[:-1], edges[1:]):
        x, wx = gauss_legendre(order, left, right)
        total += sum(wk * xk ** (-alpha) * level_set_length(domain, xk) for xk, wk in zip(x, wx))
    return float(total)


def distance_power_table(domain: Domain, alphas: Sequence[float] = (0.5, 0.9, 0.99)) -> Dict[float, Tuple[float, float]]:
    """alpha -> (integral, integral times (1 - alpha))."""
    table = {}
    for alpha in alphas:
        value = distance_power_integral(domain, alpha)
        table[alpha] = (value, value * (1.0 - alpha))
        logger.info(f"Distance power alpha={alpha}: {value:.6g}, scaled {value * (1.0 - alpha):.6g}")
    return table
