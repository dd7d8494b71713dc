"""Complement weights omega(x) = integral over the complement of the domain of |x - y|^(-d-2s).

In two dimensions the complement is split by an auxiliary disk B_R(c) with c
the domain centroid. Outside the disk, omega is integrated along rays from x
that leave the disk at a closed-form distance rho_0. The collar B_R minus the
domain is reduced by the divergence theorem to boundary integrals: polygon
edges contribute incomplete Beta functions, the circle a periodic trapezoid sum.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from scipy.special import beta as beta_function
from scipy.special import betainc

from fraclap.core.exceptions import QuadratureError
from fraclap.core.mesh.geometry import Domain, signed_boundary_distance
from fraclap.core.quadrature.rules import gauss_legendre, map_rule, simplex_rule

logger = logging.getLogger(__name__)

MIN_DISTANCE = 1e-12


@dataclass(frozen=True)
class TailConfig:
    radius_factor: float = 2.0
    angular_nodes: int = 64
    order: int = 3
    grading_levels: int = 6

    @classmethod
    def from_settings(cls, settings) -> "TailConfig":
        return cls(
            radius_factor=settings.tail_radius_factor,
            angular_nodes=settings.tail_angular_nodes,
            order=settings.tail_order,
            grading_levels=settings.tail_grading_levels,
        )


def _as_domain(mesh_or_domain) -> Domain:
    return getattr(mesh_or_domain, "domain", mesh_or_domain)


def _cos_power_integral(phi: np.ndarray, s: float) -> np.ndarray:
    """Integral of cos(t)^(2s) from 0 to phi for |phi| < pi/2."""
    half = 0.5 * beta_function(0.5, s + 0.5)
    return np.sign(phi) * half * betainc(0.5, s + 0.5, np.sin(phi) ** 2)


def _edge_terms(points: np.ndarray, segments: np.ndarray, s: float) -> np.ndarray:
    start = segments[None, :, 0, :]
    end = segments[None, :, 1, :]
    length = np.linalg.norm(segments[:, 1] - segments[:, 0], axis=1)[None, :]
    tangent = (end - start) / length[..., None]
    normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)

    rel_start = start - points[:, None, :]
    rel_end = end - points[:, None, :]
    h = (rel_start * normal).sum(axis=-1)
    tau0 = (rel_start * tangent).sum(axis=-1)
    tau1 = (rel_end * tangent).sum(axis=-1)

    abs_h = np.abs(h)
    safe_h = np.where(abs_h > 0.0, abs_h, 1.0)
    g1 = _cos_power_integral(np.arctan(tau1 / safe_h), s)
    g0 = _cos_power_integral(np.arctan(tau0 / safe_h), s)
    terms = np.sign(h) * safe_h ** (-2.0 * s) * (g1 - g0)
    return np.where(abs_h > 0.0, terms, 0.0).sum(axis=1)


def _circle_terms(points: np.ndarray, centre: np.ndarray, radius: float, s: float, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * math.pi * np.arange(nodes) / nodes
    directions = np.column_stack([np.cos(theta), np.sin(theta)])
    rel = points - centre
    dt = 2.0 * math.pi / nodes

    on_circle = centre + radius * directions
    diff = on_circle[None, :, :] - points[:, None, :]
    flux = (diff * directions[None]).sum(axis=-1) * np.linalg.norm(diff, axis=-1) ** (-2.0 - 2.0 * s)
    circle = flux.sum(axis=1) * radius * dt

    b = rel @ directions.T
    rho0 = -b + np.sqrt(b ** 2 + radius ** 2 - (rel ** 2).sum(axis=1)[:, None])
    far = (rho0 ** (-2.0 * s)).sum(axis=1) * dt / (2.0 * s)
    return circle, far


def tail_weight(points: np.ndarray, mesh, s: float, config: TailConfig = TailConfig()) -> np.ndarray:
    """omega at each point of an (n, d) array; points must lie strictly inside the domain."""
    if not 0.0 < s < 1.0:
        raise QuadratureError(f"s = {s} outside (0, 1)")
    domain = _as_domain(mesh)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    delta = signed_boundary_distance(domain, points)
    if np.any(delta < MIN_DISTANCE):
        worst = points[np.argmin(delta)]
        raise QuadratureError(
            f"Point {tuple(worst)} is within {MIN_DISTANCE} of the boundary or outside; the weight is singular"
        )

    if domain.dim == 1:
        a, b = domain.vertices[0][0], domain.vertices[1][0]
        x = points[:, 0]
        return ((x - a) ** (-2.0 * s) + (b - x) ** (-2.0 * s)) / (2.0 * s)

    centre = domain.centroid
    radius = config.radius_factor * domain.diameter
    edges = _edge_terms(points, domain.segments, s)
    circle, far = _circle_terms(points, centre, radius, s, config.angular_nodes)
    return (edges - circle) / (2.0 * s) + far


def _touches(points: np.ndarray, vertex_mask: Tuple[bool, ...], edge_mask: Tuple[bool, ...],
             reference: np.ndarray) -> bool:
    """Whether a sub-triangle contains a singular reference vertex or part of a singular edge."""
    for k, singular in enumerate(vertex_mask):
        if singular and np.any(np.all(np.isclose(points, reference[k]), axis=1)):
            return True
    for k, singular in enumerate(edge_mask):
        if not singular:
            continue
        p, q = reference[k], reference[(k + 1) % 3]
        tangent = q - p
        normal = np.array([tangent[1], -tangent[0]])
        on_line = np.isclose((points - p) @ normal, 0.0)
        if on_line.sum() >= 2:
            return True
    return False


@lru_cache(maxsize=64)
def graded_reference_rule(vertex_mask: Tuple[bool, ...], edge_mask: Tuple[bool, ...], order: int,
                          levels: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite rule on the reference triangle, red-refined toward singular vertices and edges.

    Returns barycentric coordinates (n, 3) and weights summing to 1/2.
    """
    reference = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    rule = simplex_rule(2, order)
    leaves: List[np.ndarray] = []
    active = [reference]
    for _ in range(levels):
        refined = []
        for tri in active:
            p0, p1, p2 = tri
            m01, m12, m20 = 0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p2 + p0)
            for child in (np.array([p0, m01, m20]), np.array([m01, p1, m12]),
                          np.array([m20, m12, p2]), np.array([m12, m20, m01])):
                if _touches(child, vertex_mask, edge_mask, reference):
                    refined.append(child)
                else:
                    leaves.append(child)
        active = refined
    leaves.extend(active)

    points, weights = map_rule(rule, np.array(leaves))
    points = points.reshape(-1, 2)
    bary = np.column_stack([1.0 - points.sum(axis=1), points])
    bary.flags.writeable = False
    weights = weights.ravel()
    weights.flags.writeable = False
    return bary, weights


def _boundary_pattern(cell_boundary: np.ndarray, facet_on_boundary: np.ndarray) -> Tuple[Tuple[bool, ...], Tuple[bool, ...]]:
    return tuple(bool(v) for v in cell_boundary), tuple(bool(e) for e in facet_on_boundary)


def tail_element_matrices(mesh, s: float, config: TailConfig = TailConfig()) -> np.ndarray:
    """Local matrices (ne, d+1, d+1) of the integrals of lambda_i lambda_j omega over each element.

    Entries pairing two boundary vertices are not used by the assembly and are
    left as computed by the interior rule.
    """
    arrays = mesh.arrays()
    dim = mesh.dim
    ne = len(arrays.ids)
    result = np.zeros((ne, dim + 1, dim + 1))
    boundary = arrays.boundary_elements

    if dim == 1:
        _tail_matrices_1d(mesh, arrays, s, config, result)
        return result

    interior = np.flatnonzero(~boundary)
    if len(interior):
        rule = simplex_rule(2, config.order)
        lam = rule.barycentric()
        pts, w = map_rule(rule, arrays.element_coords[interior])
        omega = tail_weight(pts.reshape(-1, 2), mesh, s, config).reshape(w.shape)
        result[interior] = np.einsum("mq,qi,qj->mij", w * omega, lam, lam)

    boundary_facets = mesh.boundary_edges
    for index in np.flatnonzero(boundary):
        cell = arrays.cells[index]
        on_boundary = arrays.boundary_vertices[cell]
        facets = mesh.facets(tuple(int(v) for v in cell))
        facet_flags = np.array([f in boundary_facets for f in facets])
        vertex_mask, edge_mask = _boundary_pattern(on_boundary, facet_flags)
        lam, weights = graded_reference_rule(vertex_mask, edge_mask, config.order, config.grading_levels)
        coords = arrays.element_coords[index]
        pts = lam @ coords
        jac = 2.0 * abs(arrays.volumes[index])
        inside = ~np.isclose(signed_boundary_distance(mesh.domain, pts), 0.0, atol=MIN_DISTANCE)
        omega = np.zeros(len(pts))
        omega[inside] = tail_weight(pts[inside], mesh, s, config)
        result[index] = np.einsum("q,qi,qj->ij", jac * weights * omega, lam, lam)
    return result


def _endpoint_entries(coords: np.ndarray, end: float, length: float, s: float) -> np.ndarray:
    """Integrals of lambda_i lambda_j |x - end|^(-2s) over an element with a vertex at end.

    With t the distance to end over the length, the interior hat is t and the
    boundary hat 1 - t, so every entry is a Beta function. The boundary-boundary
    entry diverges for s >= 1/2 and is left at zero; the assembly drops it.
    """
    ib = int(np.argmin(np.abs(coords[:, 0] - end)))
    io = 1 - ib
    local = np.zeros((2, 2))
    local[io, io] = beta_function(3.0 - 2.0 * s, 1.0)
    local[io, ib] = local[ib, io] = beta_function(2.0 - 2.0 * s, 2.0)
    if s < 0.5:
        local[ib, ib] = beta_function(1.0 - 2.0 * s, 3.0)
    return local * length ** (1.0 - 2.0 * s)


def _tail_matrices_1d(mesh, arrays, s: float, config: TailConfig, result: np.ndarray) -> None:
    a, b = mesh.domain.vertices[0][0], mesh.domain.vertices[1][0]
    order = config.order + 2
    for index, coords in enumerate(arrays.element_coords):
        left, right = sorted(coords[:, 0])
        length = right - left
        local = np.zeros((2, 2))
        for end, sign in ((a, 1.0), (b, -1.0)):
            if np.isclose(left if sign > 0 else right, end):
                local += _endpoint_entries(coords, end, length, s) / (2.0 * s)
                continue
            x, weights = gauss_legendre(order, left, right)
            values = (sign * (x - end)) ** (-2.0 * s)
            lam = np.column_stack([(coords[1, 0] - x) / (coords[1, 0] - coords[0, 0]),
                                   (x - coords[0, 0]) / (coords[1, 0] - coords[0, 0])])
            local += np.einsum("q,qi,qj->ij", weights * values / (2.0 * s), lam, lam)
        result[index] = local
