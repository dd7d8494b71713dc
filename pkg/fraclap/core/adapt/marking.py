import logging
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from fraclap.core.exceptions import ConfigError, MeshError, StarConstantError
from fraclap.core.mesh import Mesh, stars
from fraclap.core.mesh.geometry import signed_boundary_distance
from fraclap.core.quadrature.tail import TailConfig
from fraclap.core.sobolev.constants import optimal_indices, scaling_constant
from fraclap.core.sobolev.models import ModelFunction
from fraclap.core.sobolev.seminorm import Region, SeminormQuery, pair_terms, tail_terms

logger = logging.getLogger(__name__)

DISTANCE_FLOOR = 0.1


@dataclass(frozen=True)
class Indicator:
    element_id: int
    value: float
    marked: bool


def practical_threshold(n_elements: int, theta: float, distance: np.ndarray) -> np.ndarray:
    """theta (#T)^-1 |log #T|^2 dist, natural logarithm."""
    return theta / n_elements * math.log(n_elements) ** 2 * np.asarray(distance, dtype=float)


def practical_indicators(mesh: Mesh, theta: float) -> List[Indicator]:
    """Ratio |T| / threshold per element; an element is marked when the ratio exceeds one.

    The barycentre distance is floored at h_T/10.
    """
    if theta <= 1.0:
        raise ConfigError(f"theta must exceed 1, got {theta}")
    n = mesh.n_elements
    if n < 2:
        raise MeshError(f"The practical rule needs at least two elements, got {n}")
    arrays = mesh.arrays()
    sizes = np.abs(arrays.volumes)
    distance = signed_boundary_distance(mesh.domain, arrays.barycenters)
    distance = np.maximum(distance, DISTANCE_FLOOR * arrays.h)
    ratio = sizes / practical_threshold(n, theta, distance)
    return [Indicator(int(eid), float(r), bool(r > 1.0)) for eid, r in zip(arrays.ids, ratio)]


def mark_practical(mesh: Mesh, theta: float) -> Set[int]:
    return {ind.element_id for ind in practical_indicators(mesh, theta) if ind.marked}


def seminorm_indicators(mesh: Mesh, v: ModelFunction, s: float, epsilon: float, c0: float, delta: float,
                        star_constant: float = 4.0, order: int = 3, max_workers: int = 4,
                        tail: TailConfig = TailConfig()) -> List[Indicator]:
    """E_T = C0 h_T^lambda |v|_{W^(s+1/p-eps)_(p+eps)} on the extended second ring of T.

    With p = 2(d-1)/d = 1 in two dimensions the differentiability exceeds one,
    so the seminorm is taken of the gradient with fractional order s - eps.
    """
    if mesh.dim != 2:
        raise ConfigError("Seminorm marking is available in two dimensions only")
    indices = optimal_indices(mesh.dim, s, epsilon)
    if not 0.0 < epsilon < indices.epsilon_max:
        raise ConfigError(f"epsilon = {epsilon} outside (0, {indices.epsilon_max:.4f})")
    sigma = indices.r - epsilon - 1.0
    if not 0.0 < sigma < 1.0:
        raise ConfigError(f"s - epsilon = {sigma} must lie in (0, 1)")
    integrability = indices.p + epsilon

    query = SeminormQuery(
        target=v, sigma=sigma, p=integrability, region=Region.ring(()), mesh=mesh, derivative=1,
        order=order, depth=1, max_workers=max_workers,
    )
    rings: Dict[int, Tuple[int, ...]] = {}
    for eid in sorted(mesh.element_ids()):
        rings[eid] = tuple(sorted(stars(mesh, eid, star_constant).ring2))

    needed = sorted({(a, b) for ring in rings.values() for i, a in enumerate(ring) for b in ring[i:]})
    terms = pair_terms(query, needed)

    boundary = mesh.boundary_vertex_ids()
    extended = {eid for eid, ring in rings.items()
                if any(boundary.intersection(mesh.elements[t].vertex_ids) for t in ring)}
    tail_elements = sorted({t for eid in extended for t in rings[eid]})
    tails = tail_terms(query, tail_elements, tail) if tail_elements else {}

    constant = scaling_constant(sigma, mesh.dim, integrability)
    arrays = mesh.arrays()
    h = dict(zip((int(i) for i in arrays.ids), arrays.h))

    def indicator(eid: int) -> Indicator:
        ring = rings[eid]
        total = sum(terms[(a, b)] if a == b else 2.0 * terms[(a, b)]
                    for i, a in enumerate(ring) for b in ring[i:])
        if eid in extended:
            total += sum(tails[t] for t in ring)
        value = c0 * h[eid] ** indices.lam * max(constant * total, 0.0) ** (1.0 / integrability)
        return Indicator(eid, float(value), bool(value > delta))

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        indicators = list(executor.map(indicator, sorted(rings)))
    logger.debug(f"Seminorm indicators on {len(indicators)} elements, {len(needed)} pairs, "
                 f"max {max(i.value for i in indicators):.4g}")
    return indicators


def mark_seminorm(mesh: Mesh, v: ModelFunction, s: float, epsilon: float, c0: float, delta: float,
                  **options) -> Set[int]:
    return {ind.element_id for ind in seminorm_indicators(mesh, v, s, epsilon, c0, delta, **options) if ind.marked}


class MarkingStrategy(ABC):
    """One marking rule with the parameter it used at a given GREEDY step."""

    @abstractmethod
    def mark(self, mesh: Mesh, iteration: int) -> Set[int]:
        pass

    @abstractmethod
    def parameter(self, iteration: int) -> float:
        pass

    def get_strategy_name(self) -> str:
        return self.__class__.__name__.lower().replace("marking", "")


class PracticalMarking(MarkingStrategy):
    """Distance-weighted size rule; theta may follow a schedule, the last value repeating."""

    def __init__(self, theta: float = 2.0, schedule: Optional[Sequence[float]] = None):
        self.schedule = list(schedule) if schedule else [theta]
        for value in self.schedule:
            if value <= 1.0:
                raise ConfigError(f"theta must exceed 1, got {value}")

    def parameter(self, iteration: int) -> float:
        return self.schedule[min(iteration, len(self.schedule) - 1)]

    def mark(self, mesh: Mesh, iteration: int) -> Set[int]:
        return mark_practical(mesh, self.parameter(iteration))


class SeminormMarking(MarkingStrategy):

    def __init__(self, model: ModelFunction, s: float, epsilon: float = 0.1, c0: float = 1.0,
                 delta: float = 0.05, grow_star_constant: bool = False, **options):
        self.model = model
        self.s = s
        self.epsilon = epsilon
        self.c0 = c0
        self.delta = delta
        self.grow_star_constant = grow_star_constant
        self.options = options

    def parameter(self, iteration: int) -> float:
        return self.delta

    def mark(self, mesh: Mesh, iteration: int) -> Set[int]:
        try:
            return mark_seminorm(mesh, self.model, self.s, self.epsilon, self.c0, self.delta, **self.options)
        except StarConstantError as e:
            if not self.grow_star_constant:
                raise
            logger.warning(f"Raising the star constant to {e.minimal_constant:.4f} at step {iteration}")
            self.options["star_constant"] = e.minimal_constant * (1.0 + 1e-9)
            return self.mark(mesh, iteration)
