"""Gauss rules on intervals and simplices.

Reference simplices are [0, 1] and the triangle (0,0), (1,0), (0,1). Triangle
rules are collapsed (Stroud) products of a Gauss-Jacobi rule and a
Gauss-Legendre rule; an n-point rule per direction is exact for degree 2n-1.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.special import roots_jacobi

from fraclap.core.exceptions import QuadratureError

MAX_ORDER = 40


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def size(self) -> int:
        return len(self.weights)

    def barycentric(self) -> np.ndarray:
        """Barycentric coordinates (n, d+1) of the reference nodes."""
        return np.column_stack([1.0 - self.nodes.sum(axis=1), self.nodes])


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    values.flags.writeable = False
    return values


def _check_order(order: int) -> None:
    if not 1 <= order <= MAX_ORDER:
        raise QuadratureError(f"Quadrature order {order} outside the tabulated range [1, {MAX_ORDER}]")


@lru_cache(maxsize=None)
def _legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return _frozen(0.5 * (x + 1.0)), _frozen(0.5 * w)


def gauss_legendre(order: int, a: float = 0.0, b: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    _check_order(order)
    x, w = _legendre(order)
    return a + (b - a) * x, (b - a) * w


@lru_cache(maxsize=None)
def _jacobi(order: int, alpha: float, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_jacobi(order, alpha, beta)
    return _frozen(0.5 * (x + 1.0)), _frozen(w / 2.0 ** (alpha + beta + 1.0))


def gauss_jacobi(order: int, alpha: float, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1] for the weight (1 - t)^alpha t^beta."""
    _check_order(order)
    if alpha <= -1.0 or beta <= -1.0:
        raise QuadratureError(f"Jacobi exponents must exceed -1, got ({alpha}, {beta})")
    return _jacobi(order, float(alpha), float(beta))


def reference_volume(dim: int) -> float:
    return 1.0 / math.factorial(dim)


@lru_cache(maxsize=None)
def simplex_rule(dim: int, order: int) -> QuadratureRule:
    _check_order(order)
    if dim == 1:
        x, w = _legendre(order)
        return QuadratureRule(nodes=x[:, None], weights=w, degree=2 * order - 1)
    if dim != 2:
        raise QuadratureError(f"Simplex rules are implemented for d in (1, 2), got {dim}")

    a, wa = _jacobi(order, 1.0, 0.0)
    b, wb = _legendre(order)
    u1 = np.repeat(a, order)
    u2 = (1.0 - u1) * np.tile(b, order)
    weights = _frozen(np.outer(wa, wb).ravel())
    return QuadratureRule(nodes=_frozen(np.column_stack([u1, u2])), weights=weights, degree=2 * order - 1)


def map_rule(rule: QuadratureRule, vertices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Physical points (m, q, d) and weights (m, q) of a reference rule on m simplices."""
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim == 2:
        vertices = vertices[None]
    lam = rule.barycentric()
    points = np.einsum("qk,mkd->mqd", lam, vertices)
    dim = vertices.shape[-1]
    if dim == 1:
        jac = np.abs(vertices[:, 1, 0] - vertices[:, 0, 0])
    else:
        e1 = vertices[:, 1] - vertices[:, 0]
        e2 = vertices[:, 2] - vertices[:, 0]
        jac = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return points, jac[:, None] * rule.weights[None, :]


def simplex_jacobian(vertices: np.ndarray) -> float:
    """d! times the volume of one simplex."""
    vertices = np.asarray(vertices, dtype=float)
    if vertices.shape[-1] == 1:
        return abs(vertices[1, 0] - vertices[0, 0])
    e1, e2 = vertices[1] - vertices[0], vertices[2] - vertices[0]
    return abs(e1[0] * e2[1] - e1[1] * e2[0])


def barycentric_gradients(vertices: np.ndarray) -> np.ndarray:
    """Gradients (d+1, d) of the barycentric coordinates of a simplex."""
    vertices = np.asarray(vertices, dtype=float)
    edges = (vertices[1:] - vertices[0]).T
    inv = np.linalg.inv(edges)
    return np.vstack([-inv.sum(axis=0), inv])


def barycentric_coordinates(vertices: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates (n, d+1) of points with respect to a simplex."""
    vertices = np.asarray(vertices, dtype=float)
    points = np.atleast_2d(points)
    grads = barycentric_gradients(vertices)
    rel = points - vertices[0]
    lam_tail = rel @ grads[1:].T
    return np.column_stack([1.0 - lam_tail.sum(axis=1), lam_tail])
