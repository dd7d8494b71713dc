"""Domain descriptors and boundary-distance geometry.

A two-dimensional domain is a simple closed polygon given by its counterclockwise
vertex loop; a one-dimensional domain is an interval. Validity and containment
go through shapely, distances are computed segment-wise with numpy.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
import shapely
from shapely.geometry import LinearRing, Polygon
from shapely.geometry.polygon import orient
from shapely.validation import explain_validity

from fraclap.core.exceptions import MeshError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Domain:
    name: str
    dim: int
    vertices: Tuple[Tuple[float, ...], ...]
    polygon: Polygon = field(default=None, compare=False, repr=False)

    @property
    def area(self) -> float:
        if self.dim == 1:
            return self.vertices[1][0] - self.vertices[0][0]
        return float(self.polygon.area)

    @property
    def diameter(self) -> float:
        pts = np.asarray(self.vertices, dtype=float)
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diff ** 2).sum(axis=-1)).max())

    @property
    def centroid(self) -> np.ndarray:
        if self.dim == 1:
            return np.array([0.5 * (self.vertices[0][0] + self.vertices[1][0])])
        c = self.polygon.centroid
        return np.array([c.x, c.y])

    @property
    def segments(self) -> np.ndarray:
        """Boundary segments as an array of shape (m, 2, 2)."""
        if self.dim == 1:
            raise MeshError("an interval has no boundary segments")
        pts = np.asarray(self.vertices, dtype=float)
        return np.stack([pts, np.roll(pts, -1, axis=0)], axis=1)

    @property
    def is_rectilinear(self) -> bool:
        if self.dim == 1:
            return True
        seg = self.segments
        d = seg[:, 1] - seg[:, 0]
        return bool(np.all(np.isclose(d[:, 0], 0.0) | np.isclose(d[:, 1], 0.0)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dim == 1:
            a, b = self.vertices[0][0], self.vertices[1][0]
            return (points[:, 0] > a) & (points[:, 0] < b)
        return shapely.contains_xy(self.polygon, points[:, 0], points[:, 1])


def interval_domain(a: float = -1.0, b: float = 1.0, name: str = "interval") -> Domain:
    if not b > a:
        raise MeshError(f"Interval ({a}, {b}) is empty")
    return Domain(name=name, dim=1, vertices=((float(a),), (float(b),)))


def polygon_domain(points: Sequence[Sequence[float]], name: str = "polygon") -> Domain:
    """Validate a simple polygon and store it counterclockwise."""
    pts = [tuple(float(c) for c in p) for p in points]
    if len(pts) > 1 and np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    if len(pts) < 3:
        raise MeshError(f"Polygon '{name}' needs at least 3 vertices, got {len(pts)}")

    ring = LinearRing(pts)
    if not ring.is_simple:
        raise MeshError(f"Polygon '{name}' is not simple: {explain_validity(Polygon(pts))}")
    polygon = Polygon(pts)
    if not polygon.is_valid or polygon.area <= 0.0:
        raise MeshError(f"Polygon '{name}' is invalid: {explain_validity(polygon)}")

    if not ring.is_ccw:
        logger.info(f"Polygon '{name}' given clockwise, reorienting")
        polygon = orient(polygon, sign=1.0)
        pts = [tuple(c) for c in list(polygon.exterior.coords)[:-1]]
    return Domain(name=name, dim=2, vertices=tuple(pts), polygon=polygon)


def lshape_domain() -> Domain:
    return polygon_domain(
        [(-1.0, -1.0), (0.0, -1.0), (0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (-1.0, 1.0)],
        name="lshape",
    )


def square_domain() -> Domain:
    return polygon_domain([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)], name="square")


def unit_square_domain() -> Domain:
    return polygon_domain([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], name="unit_square")


def disk_polygon_domain(sides: int = 64, radius: float = 1.0) -> Domain:
    if sides < 3:
        raise MeshError(f"A disk polygon needs at least 3 sides, got {sides}")
    angles = 2.0 * math.pi * np.arange(sides) / sides
    pts = np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])
    return polygon_domain(pts.tolist(), name="disk_polygon")


def make_domain(name: str, disk_sides: int = 64) -> Domain:
    name = name.strip().lower().replace("-", "_")
    if name == "lshape":
        return lshape_domain()
    if name == "square":
        return square_domain()
    if name == "unit_square":
        return unit_square_domain()
    if name == "interval":
        return interval_domain()
    if name == "disk_polygon":
        return disk_polygon_domain(disk_sides)
    raise MeshError(f"Unknown domain preset: {name}")


def _segment_projections(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    a = segments[None, :, 0, :]
    ab = segments[None, :, 1, :] - a
    ap = points[:, None, :] - a
    denom = np.maximum((ab ** 2).sum(axis=-1), np.finfo(float).tiny)
    t = np.clip((ap * ab).sum(axis=-1) / denom, 0.0, 1.0)
    return a + t[..., None] * ab


def segment_distances(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Distances of points (n, 2) to segments (m, 2, 2), shape (n, m)."""
    closest = _segment_projections(points, segments)
    return np.sqrt(((points[:, None, :] - closest) ** 2).sum(axis=-1))


def closest_boundary_points(domain: Domain, points: np.ndarray) -> np.ndarray:
    """Nearest boundary point for each of the points (n, d)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if domain.dim == 1:
        a, b = domain.vertices[0][0], domain.vertices[1][0]
        x = points[:, 0]
        return np.where(x - a <= b - x, a, b)[:, None]
    closest = _segment_projections(points, domain.segments)
    dist = ((points[:, None, :] - closest) ** 2).sum(axis=-1)
    return closest[np.arange(len(points)), dist.argmin(axis=1)]


def signed_boundary_distance(domain: Domain, points: np.ndarray) -> np.ndarray:
    """Euclidean distance to the boundary, negative outside the domain."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if domain.dim == 1:
        a, b = domain.vertices[0][0], domain.vertices[1][0]
        x = points[:, 0]
        return np.minimum(x - a, b - x)

    dist = segment_distances(points, domain.segments).min(axis=1)
    inside = shapely.intersects_xy(domain.polygon, points[:, 0], points[:, 1])
    return np.where(inside, dist, -dist)
