"""Quadrature for double integrals over element pairs with the kernel |x - y|^(-d-2s).

Touching pairs are integrated with a vertex splitting: with the shared vertex
as origin, the product of the two simplices is split into the two regions
where either point is the farther one, and the common radial variable is
integrated in closed form. This is exact for integrands F that are
homogeneous of degree ``mu`` about the shared vertex, which holds for
differences of continuous piecewise linear functions times the kernel.

Identical and shared-edge pairs are reduced to vertex-type pairs by one red
refinement; the self-similar sub-pairs are removed with the exact scaling
factors 1/(1 - 2^-(d+mu)) and 1/(1 - 2^-(3+mu)). Disjoint pairs use tensor
Gauss rules, subdividing the larger element while the pair is close.

Rules are built in a canonical frame (first vertex at the origin, first edge
along the positive x axis with unit length) and cached per similarity class.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from shapely.geometry import Polygon

from fraclap.core.exceptions import NonConformingMeshError, QuadratureError
from fraclap.core.quadrature.rules import (
    _legendre,
    barycentric_coordinates,
    barycentric_gradients,
    map_rule,
    simplex_jacobian,
    simplex_rule,
)

logger = logging.getLogger(__name__)

DISJOINT_ETA = 1.5
KEY_DECIMALS = 9

PairNodes = Tuple[np.ndarray, np.ndarray, np.ndarray]


class PairKind(str, Enum):
    IDENTICAL = "identical"
    SHARED_EDGE = "shared_edge"
    SHARED_ENDPOINT = "shared_endpoint"
    SHARED_VERTEX = "shared_vertex"
    DISJOINT = "disjoint"


@dataclass(frozen=True)
class PairClass:
    kind: PairKind
    shared: Tuple[int, ...]
    local_a: Tuple[int, ...]
    local_b: Tuple[int, ...]


def _labels(element) -> Tuple[int, ...]:
    return tuple(getattr(element, "vertex_ids", element))


def _kind(dim: int, shared_count: int) -> PairKind:
    if shared_count == dim + 1:
        return PairKind.IDENTICAL
    if shared_count == 0:
        return PairKind.DISJOINT
    if shared_count == 1:
        return PairKind.SHARED_ENDPOINT if dim == 1 else PairKind.SHARED_VERTEX
    return PairKind.SHARED_EDGE


def _overlap(coords_a: np.ndarray, coords_b: np.ndarray) -> float:
    if coords_a.shape[1] == 1:
        lo = max(coords_a.min(), coords_b.min())
        hi = min(coords_a.max(), coords_b.max())
        return max(0.0, hi - lo)
    return Polygon(coords_a).intersection(Polygon(coords_b)).area


def classify_pair(elem_a, elem_b, coords_a: Optional[np.ndarray] = None,
                  coords_b: Optional[np.ndarray] = None) -> PairClass:
    """Classify a pair by the vertices it shares.

    When coordinates are given, pairs whose interiors overlap are rejected as
    non-conforming.
    """
    labels_a, labels_b = _labels(elem_a), _labels(elem_b)
    if len(labels_a) != len(labels_b) or len(labels_a) not in (2, 3):
        raise QuadratureError(f"Cannot classify simplices {labels_a} and {labels_b}")
    dim = len(labels_a) - 1
    shared = tuple(v for v in labels_a if v in labels_b)
    kind = _kind(dim, len(shared))

    if coords_a is not None and coords_b is not None and kind != PairKind.IDENTICAL:
        coords_a = np.asarray(coords_a, dtype=float)
        coords_b = np.asarray(coords_b, dtype=float)
        overlap = _overlap(coords_a, coords_b)
        scale = min(simplex_jacobian(coords_a), simplex_jacobian(coords_b))
        if overlap > 1e-10 * scale:
            raise NonConformingMeshError(
                f"Elements {labels_a} and {labels_b} overlap without sharing a full sub-simplex",
                edge=shared or None,
            )
    return PairClass(
        kind=kind,
        shared=shared,
        local_a=tuple(labels_a.index(v) for v in shared),
        local_b=tuple(labels_b.index(v) for v in shared),
    )


def homogeneity_degree(dim: int, s: float, power: float = 2.0) -> float:
    """Degree of |v(x) - v(y)|^p |x - y|^(-d - s p) for piecewise linear v."""
    return power - dim - s * power


def _red(points: np.ndarray, labels: Sequence[Hashable]) -> List[Tuple[np.ndarray, Tuple[Hashable, ...]]]:
    if len(points) == 2:
        p0, p1 = points
        m = 0.5 * (p0 + p1)
        lm = frozenset(labels)
        return [(np.array([p0, m]), (labels[0], lm)), (np.array([m, p1]), (lm, labels[1]))]

    p0, p1, p2 = points
    l0, l1, l2 = labels
    m01, m12, m20 = 0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p2 + p0)
    n01, n12, n20 = frozenset((l0, l1)), frozenset((l1, l2)), frozenset((l2, l0))
    return [
        (np.array([p0, m01, m20]), (l0, n01, n20)),
        (np.array([m01, p1, m12]), (n01, l1, n12)),
        (np.array([m20, m12, p2]), (n20, n12, l2)),
        (np.array([m12, m20, m01]), (n12, n20, n01)),
    ]


def _concat(parts: List[PairNodes], scale: float = 1.0) -> PairNodes:
    xs, ys, ws = zip(*parts)
    return np.concatenate(xs), np.concatenate(ys), scale * np.concatenate(ws)


def _vertex_rule(a: np.ndarray, b: np.ndarray, la, lb, mu: float, order: int) -> PairNodes:
    shared = next(v for v in la if v in lb)
    a = np.roll(a, -list(la).index(shared), axis=0)
    b = np.roll(b, -list(lb).index(shared), axis=0)
    v = a[0]
    dim = a.shape[1]
    g, wg = _legendre(order)

    if dim == 1:
        scale = abs(a[1, 0] - v[0]) * abs(b[1, 0] - v[0]) / (2.0 + mu)
        ray_a = v + np.outer(g, a[1] - v)
        ray_b = v + np.outer(g, b[1] - v)
        x = np.concatenate([np.repeat(a[1:2], order, axis=0), ray_a])
        y = np.concatenate([ray_b, np.repeat(b[1:2], order, axis=0)])
        w = scale * np.concatenate([wg, wg])
        return x, y, w

    eta, t, r = (arr.ravel() for arr in np.meshgrid(g, g, g, indexing="ij"))
    weta, wt, wr = (arr.ravel() for arr in np.meshgrid(wg, wg, wg, indexing="ij"))
    scale = simplex_jacobian(a) * simplex_jacobian(b) / (4.0 + mu)
    edge_a = v + np.outer(1.0 - t, a[1] - v) + np.outer(t, a[2] - v)
    edge_b = v + np.outer(1.0 - r, b[1] - v) + np.outer(r, b[2] - v)
    w = scale * weta * wt * wr * eta
    x = np.concatenate([edge_a, v + eta[:, None] * (edge_a - v)])
    y = np.concatenate([v + eta[:, None] * (edge_b - v), edge_b])
    return x, y, np.concatenate([w, w])


def _too_close(a: np.ndarray, b: np.ndarray) -> bool:
    diam = max(np.ptp(a, axis=0).max(), np.ptp(b, axis=0).max())
    return np.linalg.norm(a.mean(axis=0) - b.mean(axis=0)) < DISJOINT_ETA * diam


def _disjoint_rule(a: np.ndarray, b: np.ndarray, order: int, depth: int) -> PairNodes:
    if depth > 0 and _too_close(a, b):
        dummy = tuple(range(len(a)))
        if simplex_jacobian(a) >= simplex_jacobian(b):
            parts = [_disjoint_rule(child, b, order, depth - 1) for child, _ in _red(a, dummy)]
        else:
            parts = [_disjoint_rule(a, child, order, depth - 1) for child, _ in _red(b, dummy)]
        return _concat(parts)

    rule = simplex_rule(a.shape[1], order)
    xa, wa = map_rule(rule, a)
    yb, wb = map_rule(rule, b)
    n = rule.size
    x = np.repeat(xa[0], n, axis=0)
    y = np.tile(yb[0], (n, 1))
    return x, y, np.outer(wa[0], wb[0]).ravel()


def _pair_nodes(a: np.ndarray, b: np.ndarray, la, lb, mu: float, order: int, depth: int) -> PairNodes:
    dim = a.shape[1]
    kind = _kind(dim, len(set(la) & set(lb)))

    if kind == PairKind.IDENTICAL:
        if dim + mu <= 0:
            raise QuadratureError(f"Integrand degree {mu} is not integrable on identical pairs")
        children = _red(a, la)
        parts = [
            _pair_nodes(ca, cb, lca, lcb, mu, order, depth)
            for i, (ca, lca) in enumerate(children)
            for j, (cb, lcb) in enumerate(children)
            if i != j
        ]
        return _concat(parts, 1.0 / (1.0 - 2.0 ** (-(dim + mu))))

    if kind == PairKind.SHARED_EDGE:
        parts = [
            _pair_nodes(ca, cb, lca, lcb, mu, order, depth)
            for ca, lca in _red(a, la)
            for cb, lcb in _red(b, lb)
            if len(set(lca) & set(lcb)) != 2
        ]
        return _concat(parts, 1.0 / (1.0 - 2.0 ** (-(3.0 + mu))))

    if kind in (PairKind.SHARED_VERTEX, PairKind.SHARED_ENDPOINT):
        return _vertex_rule(a, b, la, lb, mu, order)
    return _disjoint_rule(a, b, order, depth)


@dataclass(frozen=True)
class CanonicalPair:
    """A pair mapped into its canonical frame, x = origin + length * x_c @ rotation.T."""
    kind: PairKind
    coords_a: np.ndarray
    coords_b: np.ndarray
    labels_a: Tuple[int, ...]
    labels_b: Tuple[int, ...]
    origin: np.ndarray
    rotation: np.ndarray
    length: float
    swapped: bool
    key: tuple

    def to_physical(self, points: np.ndarray) -> np.ndarray:
        return self.origin + self.length * points @ self.rotation.T


def canonical_pair(coords_a: np.ndarray, coords_b: np.ndarray, labels_a: Sequence[int],
                   labels_b: Sequence[int]) -> CanonicalPair:
    coords_a = np.asarray(coords_a, dtype=float)
    coords_b = np.asarray(coords_b, dtype=float)
    labels_a, labels_b = tuple(labels_a), tuple(labels_b)
    swapped = tuple(sorted(labels_b)) < tuple(sorted(labels_a))
    if swapped:
        coords_a, coords_b, labels_a, labels_b = coords_b, coords_a, labels_b, labels_a

    dim = coords_a.shape[1]
    shared = [v for v in labels_a if v in labels_b]
    kind = _kind(dim, len(shared))
    n = dim + 1

    if kind == PairKind.SHARED_EDGE:
        k = next(k for k in range(n) if labels_a[k] in shared and labels_a[(k + 1) % n] in shared)
        coords_a, labels_a = np.roll(coords_a, -k, axis=0), labels_a[k:] + labels_a[:k]
    elif kind in (PairKind.SHARED_VERTEX, PairKind.SHARED_ENDPOINT):
        k = labels_a.index(shared[0])
        coords_a, labels_a = np.roll(coords_a, -k, axis=0), labels_a[k:] + labels_a[:k]
    if kind not in (PairKind.IDENTICAL, PairKind.DISJOINT):
        k = labels_b.index(labels_a[0])
        coords_b, labels_b = np.roll(coords_b, -k, axis=0), labels_b[k:] + labels_b[:k]

    origin = coords_a[0]
    edge = coords_a[1] - coords_a[0]
    length = float(np.linalg.norm(edge))
    if dim == 1:
        rotation = np.array([[np.sign(edge[0])]])
    else:
        c, s = edge / length
        rotation = np.array([[c, -s], [s, c]])

    can_a = np.round((coords_a - origin) @ rotation / length, KEY_DECIMALS) + 0.0
    can_b = np.round((coords_b - origin) @ rotation / length, KEY_DECIMALS) + 0.0
    fresh = iter(range(dim + 1, 2 * dim + 2))
    pattern_b = tuple(labels_a.index(v) if v in labels_a else next(fresh) for v in labels_b)
    key = (dim, kind.value, tuple(can_a.ravel()), tuple(can_b.ravel()), pattern_b)
    return CanonicalPair(kind, can_a, can_b, labels_a, labels_b, origin, rotation, length, swapped, key)


@lru_cache(maxsize=4096)
def _canonical_nodes(key: tuple, mu: float, order: int, depth: int) -> PairNodes:
    dim, kind, flat_a, flat_b, pattern_b = key
    a = np.array(flat_a).reshape(-1, dim)
    b = np.array(flat_b).reshape(-1, dim)
    nodes = _pair_nodes(a, b, tuple(range(dim + 1)), pattern_b, mu, order, depth)
    for arr in nodes:
        arr.flags.writeable = False
    logger.debug(f"Built {kind} pair rule with {len(nodes[2])} nodes (mu={mu:.4f}, order={order})")
    return nodes


def pair_rule(coords_a: np.ndarray, coords_b: np.ndarray, labels_a: Sequence[int], labels_b: Sequence[int],
              mu: float, order: int, depth: int = 2) -> PairNodes:
    """Physical nodes (x, y) and weights for integrals over T_a x T_b."""
    pair = canonical_pair(coords_a, coords_b, labels_a, labels_b)
    xc, yc, wc = _canonical_nodes(pair.key, round(float(mu), 12), order, depth)
    x, y = pair.to_physical(xc), pair.to_physical(yc)
    w = wc * pair.length ** (2 * x.shape[1])
    return (y, x, w) if pair.swapped else (x, y, w)


def integrate_pair(coords_a, coords_b, labels_a, labels_b, integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
                   mu: float, order: int, depth: int = 2) -> float:
    x, y, w = pair_rule(coords_a, coords_b, labels_a, labels_b, mu, order, depth)
    return float(np.dot(w, integrand(x, y)))


def _check_s(s: float) -> None:
    if not 0.0 < s < 1.0:
        raise QuadratureError(f"s = {s} outside (0, 1)")


def _interpolate(coords: np.ndarray, labels: Sequence[int], phi: Mapping[int, float], points: np.ndarray) -> np.ndarray:
    values = np.array([phi.get(v, 0.0) for v in labels], dtype=float)
    return barycentric_coordinates(coords, points) @ values


def singular_pair_integral(coords_a: np.ndarray, coords_b: np.ndarray, labels_a: Sequence[int],
                           labels_b: Sequence[int], s: float, phi_i: Mapping[int, float],
                           phi_j: Mapping[int, float], order: int = 5, depth: int = 2) -> float:
    """Integral of (phi_i(x)-phi_i(y))(phi_j(x)-phi_j(y))|x-y|^(-d-2s) over T_a x T_b.

    Shape functions are given by their vertex values; labels missing from a
    mapping are zero. The Lambda(d, s)/2 prefactor is not included.
    """
    _check_s(s)
    coords_a = np.asarray(coords_a, dtype=float)
    coords_b = np.asarray(coords_b, dtype=float)
    dim = coords_a.shape[1]

    def integrand(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        di = _interpolate(coords_a, labels_a, phi_i, x) - _interpolate(coords_b, labels_b, phi_i, y)
        dj = _interpolate(coords_a, labels_a, phi_j, x) - _interpolate(coords_b, labels_b, phi_j, y)
        dist = np.linalg.norm(x - y, axis=1)
        return di * dj * dist ** (-dim - 2.0 * s)

    mu = homogeneity_degree(dim, s)
    return integrate_pair(coords_a, coords_b, labels_a, labels_b, integrand, mu, order, depth)


@lru_cache(maxsize=200000)
def _energy_moments(key: tuple, s: float, order: int, depth: int) -> np.ndarray:
    dim, kind = key[0], PairKind(key[1])
    x, y, w = _canonical_nodes(key, round(homogeneity_degree(dim, s), 12), order, depth)
    kernel = w * np.linalg.norm(x - y, axis=1) ** (-dim - 2.0 * s)
    columns = [x, y] if kind != PairKind.DISJOINT else [x, y, np.ones((len(w), 1))]
    basis = np.hstack(columns)
    moments = (basis * kernel[:, None]).T @ basis
    moments = 0.5 * (moments + moments.T)
    moments.flags.writeable = False
    return moments


def energy_pair_matrix(coords_a: np.ndarray, coords_b: np.ndarray, labels_a: Sequence[int],
                       labels_b: Sequence[int], s: float, order: int = 5,
                       depth: int = 2) -> Tuple[Tuple[int, ...], np.ndarray]:
    """Local matrix of the pair integral for all hat functions living on T_a or T_b.

    Returns the union of vertex labels and M with M[k, l] equal to
    singular_pair_integral for the hats of labels k and l.
    """
    pair = canonical_pair(coords_a, coords_b, labels_a, labels_b)
    dim = pair.coords_a.shape[1]
    moments = _energy_moments(pair.key, s, order, depth)

    union = pair.labels_a + tuple(v for v in pair.labels_b if v not in pair.labels_a)
    grads_a = barycentric_gradients(pair.coords_a)
    grads_b = barycentric_gradients(pair.coords_b)
    lam_b_origin = barycentric_coordinates(pair.coords_b, np.zeros((1, dim)))[0]

    touching = pair.kind != PairKind.DISJOINT
    coeffs = np.zeros((len(union), moments.shape[0]))
    for k, label in enumerate(union):
        if label in pair.labels_a:
            ia = pair.labels_a.index(label)
            coeffs[k, :dim] = grads_a[ia]
            if not touching:
                coeffs[k, 2 * dim] += 1.0 if ia == 0 else 0.0
        if label in pair.labels_b:
            ib = pair.labels_b.index(label)
            coeffs[k, dim:2 * dim] = -grads_b[ib]
            if not touching:
                coeffs[k, 2 * dim] -= lam_b_origin[ib]

    matrix = pair.length ** (dim - 2.0 * s) * coeffs @ moments @ coeffs.T
    return union, 0.5 * (matrix + matrix.T)


def clear_caches() -> None:
    _canonical_nodes.cache_clear()
    _energy_moments.cache_clear()


def cache_info() -> Dict[str, object]:
    return {"nodes": _canonical_nodes.cache_info(), "moments": _energy_moments.cache_info()}
