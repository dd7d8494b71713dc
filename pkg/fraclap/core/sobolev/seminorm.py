"""Gagliardo seminorms

    |v|_{W^sigma_p(R)} = ( Lambda(sigma, d, p) * integral over R x R of |v(x) - v(y)|^p / |x - y|^(d + sigma p) )^(1/p)

Two evaluators are provided. Model functions on an interval use a panel
partition graded geometrically toward every breakpoint, with Gauss-Jacobi
rules absorbing the diagonal singularity; the grading depth (budget) is
doubled until two consecutive values agree. Functions on a mesh reuse the
element-pair rules and the complement weights of the quadrature package.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from fraclap.core.exceptions import QuadratureError, SeminormDivergenceError
from fraclap.core.mesh import Mesh
from fraclap.core.quadrature.pairs import homogeneity_degree, pair_rule
from fraclap.core.quadrature.rules import (
    barycentric_coordinates,
    barycentric_gradients,
    gauss_jacobi,
    gauss_legendre,
    map_rule,
    simplex_rule,
)
from fraclap.core.quadrature.tail import TailConfig, tail_weight
from fraclap.core.sobolev.constants import scaling_constant
from fraclap.core.sobolev.models import ModelFunction

logger = logging.getLogger(__name__)

GRADING_FLOOR = 1e-12

Target = Union[ModelFunction, np.ndarray]


class RegionKind(str, Enum):
    DOMAIN = "domain"
    ZERO_EXTENSION = "zero_extension"
    HALF_LINE = "half_line"
    RING = "ring"


@dataclass(frozen=True)
class Region:
    kind: RegionKind
    bounds: Optional[Tuple[float, float]] = None
    element_ids: Optional[Tuple[int, ...]] = None

    @classmethod
    def interval(cls, a: float, b: float, zero_extension: bool = False) -> "Region":
        return cls(RegionKind.ZERO_EXTENSION if zero_extension else RegionKind.DOMAIN, bounds=(a, b))

    @classmethod
    def half_line(cls, a: float, b: float) -> "Region":
        """Window (a, b) of the half-line (a, inf); the complement is (-inf, a)."""
        return cls(RegionKind.HALF_LINE, bounds=(a, b))

    @classmethod
    def ring(cls, element_ids: Iterable[int]) -> "Region":
        return cls(RegionKind.RING, element_ids=tuple(sorted(element_ids)))


@dataclass
class SeminormQuery:
    target: Target
    sigma: float
    p: float
    region: Region
    budget: int = 32
    max_budget: int = 480
    grading_ratio: float = 0.25
    mesh: Optional[Mesh] = None
    derivative: int = 0
    order: int = 8
    depth: int = 1
    tolerance: float = 0.1
    max_workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise QuadratureError(f"sigma = {self.sigma} outside (0, 1)")
        if self.p <= 1.0:
            raise QuadratureError(f"p = {self.p} must exceed 1")
        if self.derivative not in (0, 1):
            raise QuadratureError(f"Only first derivatives are supported, got {self.derivative}")
        if not 0.0 < self.grading_ratio < 1.0:
            raise QuadratureError(f"Grading ratio {self.grading_ratio} outside (0, 1)")
        if self.budget < 1 or self.max_budget < self.budget:
            raise QuadratureError(f"Bad budgets {self.budget} / {self.max_budget}")
        if self.mesh is None:
            if not isinstance(self.target, ModelFunction) or self.target.dim != 1:
                raise QuadratureError("Without a mesh the target must be a one-dimensional model function")
            if self.region.bounds is None or not self.region.bounds[0] < self.region.bounds[1]:
                raise QuadratureError(f"Interval region needs bounds a < b, got {self.region.bounds}")
        elif isinstance(self.target, np.ndarray) and len(self.target) != self.mesh.n_vertices:
            raise QuadratureError(
                f"Nodal target has {len(self.target)} values for {self.mesh.n_vertices} vertices"
            )

    @property
    def exponent(self) -> float:
        return self.sigma * self.p


@dataclass(frozen=True)
class SeminormResult:
    value: float
    integral: float
    budget: int
    previous: Optional[float] = None

    @property
    def power(self) -> float:
        """value^p, the scaled double integral."""
        return self.integral


def _offsets(half: float, factors: np.ndarray, centre: float) -> np.ndarray:
    """Geometric offsets from centre, cut off above the float resolution at centre."""
    offsets = half * factors
    return offsets[offsets >= GRADING_FLOOR * max(1.0, abs(centre))]


def graded_partition(a: float, b: float, singular: Iterable[float], levels: int, ratio: float) -> np.ndarray:
    """Panel endpoints on [a, b], graded geometrically toward a, b and every singular point inside."""
    cuts = sorted({float(a), float(b), *(float(c) for c in singular if a < c < b)})
    points = set(cuts)
    factors = ratio ** np.arange(levels + 1)
    for left, right in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (right - left)
        points.update(left + _offsets(half, factors, left))
        points.update(right - _offsets(half, factors, right))
    ordered = np.array(sorted(points))
    keep = [0]
    for k in range(1, len(ordered)):
        if ordered[k] - ordered[keep[-1]] > 1e-13 * max(abs(ordered[k]), abs(ordered[keep[-1]])):
            keep.append(k)
    if keep[-1] != len(ordered) - 1:
        keep[-1] = len(ordered) - 1
    return ordered[keep]


def _values(target: ModelFunction, x: np.ndarray, derivative: int) -> np.ndarray:
    if derivative:
        return target.gradient(x[:, None])[:, 0]
    return target(x[:, None])


def _interval_integrand(query: SeminormQuery) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    target, p, exponent = query.target, query.p, 1.0 + query.exponent

    def integrand(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        diff = np.abs(_values(target, x, query.derivative) - _values(target, y, query.derivative))
        distance = np.abs(x - y)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = diff ** p * distance ** (-exponent)
        return np.where(diff > 0.0, values, 0.0)

    return integrand


def _interval_double_integral(query: SeminormQuery, nodes: np.ndarray) -> float:
    integrand = _interval_integrand(query)
    order = query.order
    mu = homogeneity_degree(1, query.sigma, query.p)
    left, width = nodes[:-1], np.diff(nodes)
    n = len(width)

    # identical panels: t = y - x = H tau, x = L + H (1 - tau) xi
    tau, w_tau = gauss_jacobi(order, 1.0, mu)
    xi, w_xi = gauss_legendre(order)
    T, XI = (a.ravel() for a in np.meshgrid(tau, xi, indexing="ij"))
    W = np.outer(w_tau, w_xi).ravel() * T ** (-mu)
    x = left[:, None] + width[:, None] * (1.0 - T)[None] * XI[None]
    y = x + width[:, None] * T[None]
    w = 2.0 * width[:, None] ** 2 * W[None]
    total = float((w * integrand(x.ravel(), y.ravel()).reshape(x.shape)).sum())

    # neighbouring panels sharing c: a = c - x, b = y - c, split along b/h2 = a/h1
    if n > 1:
        rho, w_rho = gauss_jacobi(order, 0.0, 1.0 + mu)
        eta, w_eta = gauss_legendre(order)
        R, E = (a.ravel() for a in np.meshgrid(rho, eta, indexing="ij"))
        W = np.outer(w_rho, w_eta).ravel() * R ** (-mu)
        c = nodes[1:-1][:, None]
        h1, h2 = width[:-1][:, None], width[1:][:, None]
        for a_dist, b_dist in ((h1 * R, h2 * R * E), (h1 * R * E, h2 * R)):
            x = c - a_dist
            y = c + b_dist
            w = 2.0 * h1 * h2 * W[None]
            total += float((w * integrand(x.ravel(), y.ravel()).reshape(x.shape)).sum())

    # separated panels, tensor Gauss rules row by row
    g, wg = gauss_legendre(order)
    for i in range(n - 2):
        j = np.arange(i + 2, n)
        xi_nodes = left[i] + width[i] * g
        yj = left[j][:, None] + width[j][:, None] * g[None]
        x = np.broadcast_to(xi_nodes[None, :, None], (len(j), order, order))
        y = np.broadcast_to(yj[:, None, :], (len(j), order, order))
        w = 2.0 * width[i] * width[j][:, None, None] * np.outer(wg, wg)[None]
        total += float((w * integrand(x.ravel(), y.ravel()).reshape(x.shape)).sum())
    return total


def _interval_extension(query: SeminormQuery, nodes: np.ndarray) -> float:
    """2 * integral over the window of |v|^p times the complement weight."""
    if query.region.kind == RegionKind.DOMAIN:
        return 0.0
    a, b = query.region.bounds
    exponent = query.exponent
    g, wg = gauss_legendre(query.order)
    x = (nodes[:-1, None] + np.diff(nodes)[:, None] * g[None]).ravel()
    w = (np.diff(nodes)[:, None] * wg[None]).ravel()
    weight = (x - a) ** (-exponent)
    if query.region.kind == RegionKind.ZERO_EXTENSION:
        weight = weight + (b - x) ** (-exponent)
    values = np.abs(_values(query.target, x, query.derivative)) ** query.p
    return 2.0 * float(np.dot(w, values * weight / exponent))


def _interval_integral(query: SeminormQuery, levels: int) -> float:
    a, b = query.region.bounds
    singular = query.target.breakpoints
    nodes = graded_partition(a, b, singular, levels, query.grading_ratio)
    return _interval_double_integral(query, nodes) + _interval_extension(query, nodes)


def _interval_seminorm(query: SeminormQuery) -> SeminormResult:
    constant = scaling_constant(query.sigma, 1, query.p)
    budget = query.budget
    previous = constant * _interval_integral(query, budget)
    if budget >= query.max_budget:
        logger.warning(f"Seminorm evaluated once at the maximal budget {budget}, convergence unchecked")
        return SeminormResult(value=max(previous, 0.0) ** (1.0 / query.p), integral=previous, budget=budget)
    while True:
        budget_next = min(2 * budget, query.max_budget)
        current = constant * _interval_integral(query, budget_next)
        change = abs(current - previous)
        logger.debug(f"Seminorm budget {budget} -> {budget_next}: {previous:.10g} -> {current:.10g}")
        if change <= query.tolerance * abs(current) or current == previous:
            return SeminormResult(value=max(current, 0.0) ** (1.0 / query.p), integral=current,
                                  budget=budget_next, previous=previous)
        if budget_next >= query.max_budget:
            raise SeminormDivergenceError(
                f"Seminorm changed by {change / max(abs(current), 1e-300):.1%} at budget {budget_next} "
                f"(sigma={query.sigma}, p={query.p})",
                previous,
                current,
            )
        previous, budget = current, budget_next


def _mesh_evaluator(query: SeminormQuery) -> Callable[[int, np.ndarray], np.ndarray]:
    """Target values (n, k) at points of one element."""
    mesh = query.mesh
    arrays = mesh.arrays()
    index = {int(eid): k for k, eid in enumerate(arrays.ids)}

    if isinstance(query.target, ModelFunction):
        model = query.target
        if query.derivative:
            return lambda eid, pts: model.gradient(pts)
        return lambda eid, pts: model(pts)[:, None]

    nodal = np.asarray(query.target, dtype=float)

    def evaluate(eid: int, pts: np.ndarray) -> np.ndarray:
        cell = arrays.cells[index[eid]]
        coords = arrays.coords[cell]
        if query.derivative:
            grad = nodal[cell] @ barycentric_gradients(coords)
            return np.broadcast_to(grad, (len(pts), mesh.dim))
        return (barycentric_coordinates(coords, pts) @ nodal[cell])[:, None]

    return evaluate


def pair_terms(query: SeminormQuery, pairs: Sequence[Tuple[int, int]]) -> Dict[Tuple[int, int], float]:
    """Unscaled double integrals over T_a x T_b for element-id pairs (a <= b); T_b x T_a is not added."""
    mesh = query.mesh
    evaluate = _mesh_evaluator(query)
    mu = homogeneity_degree(mesh.dim, query.sigma, query.p)
    exponent = mesh.dim + query.exponent

    def one(pair: Tuple[int, int]) -> float:
        a, b = pair
        la, lb = mesh.elements[a].vertex_ids, mesh.elements[b].vertex_ids
        x, y, w = pair_rule(mesh.element_coords(a), mesh.element_coords(b), la, lb, mu, query.order, query.depth)
        diff = evaluate(a, x) - evaluate(b, y)
        values = np.linalg.norm(diff, axis=1) ** query.p * np.linalg.norm(x - y, axis=1) ** (-exponent)
        return float(np.dot(w, values))

    pairs = list(pairs)
    if query.max_workers > 1:
        with ThreadPoolExecutor(max_workers=query.max_workers) as executor:
            values = list(executor.map(one, pairs))
    else:
        values = [one(pair) for pair in pairs]
    return dict(zip(pairs, values))


def tail_terms(query: SeminormQuery, element_ids: Sequence[int],
               config: TailConfig = TailConfig()) -> Dict[int, float]:
    """Unscaled 2 * integral over T of |v|^p times the complement weight of exponent sigma p."""
    mesh = query.mesh
    half = 0.5 * query.exponent
    if not 0.0 < half < 1.0:
        raise QuadratureError(f"sigma * p = {query.exponent} outside (0, 2); no complement weight")
    evaluate = _mesh_evaluator(query)
    rule = simplex_rule(mesh.dim, config.order + 1)
    out = {}
    for eid in element_ids:
        pts, w = map_rule(rule, mesh.element_coords(eid))
        pts, w = pts[0], w[0]
        omega = tail_weight(pts, mesh, half, config)
        values = np.linalg.norm(evaluate(eid, pts), axis=1) ** query.p
        out[eid] = 2.0 * float(np.dot(w, values * omega))
    return out


def _mesh_seminorm(query: SeminormQuery) -> SeminormResult:
    mesh = query.mesh
    kind = query.region.kind
    if kind == RegionKind.RING:
        ids = list(query.region.element_ids or ())
    elif kind in (RegionKind.DOMAIN, RegionKind.ZERO_EXTENSION):
        ids = sorted(mesh.element_ids())
    else:
        raise QuadratureError(f"Region '{kind.value}' needs the interval evaluator")

    pairs = [(a, b) for i, a in enumerate(ids) for b in ids[i:]]
    terms = pair_terms(query, pairs)
    total = sum(v if a == b else 2.0 * v for (a, b), v in terms.items())

    if kind == RegionKind.ZERO_EXTENSION:
        total += sum(tail_terms(query, ids).values())
    elif kind == RegionKind.RING:
        boundary = mesh.boundary_vertex_ids()
        touching = [t for t in ids if boundary.intersection(mesh.elements[t].vertex_ids)]
        if touching:
            total += sum(tail_terms(query, ids).values())

    integral = scaling_constant(query.sigma, mesh.dim, query.p) * total
    return SeminormResult(value=max(integral, 0.0) ** (1.0 / query.p), integral=integral, budget=query.budget)


def evaluate(query: SeminormQuery) -> SeminormResult:
    if query.mesh is None:
        return _interval_seminorm(query)
    return _mesh_seminorm(query)


def seminorm(query: SeminormQuery) -> float:
    return evaluate(query).value
