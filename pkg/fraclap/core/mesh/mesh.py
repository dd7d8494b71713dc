import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
import shapely
from scipy.spatial import Delaunay

from fraclap.core.exceptions import MeshError, NonConformingMeshError, StarConstantError
from fraclap.core.mesh.geometry import Domain, signed_boundary_distance

logger = logging.getLogger(__name__)

Facet = Tuple[int, ...]


def _key(a: int, b: int) -> Tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Element:
    """A simplex; for triangles the refinement edge joins the first two vertices."""
    vertex_ids: Tuple[int, ...]
    generation: int = 0

    @property
    def refinement_edge(self) -> Tuple[int, int]:
        return (self.vertex_ids[0], self.vertex_ids[1])


@dataclass(frozen=True)
class Star:
    center_element: int
    ring1: FrozenSet[int]
    ring2: FrozenSet[int]
    extended_ball: Optional[Tuple[Tuple[float, ...], float]] = None


@dataclass(frozen=True)
class BoundaryDistance:
    distance: float
    outside: bool


@dataclass(frozen=True)
class MeshArrays:
    """Read-only numpy snapshot of a mesh in element-id order."""
    ids: np.ndarray
    cells: np.ndarray
    coords: np.ndarray
    volumes: np.ndarray
    diameters: np.ndarray
    h: np.ndarray
    barycenters: np.ndarray
    boundary_vertices: np.ndarray
    boundary_elements: np.ndarray

    @property
    def element_coords(self) -> np.ndarray:
        return self.coords[self.cells]


def simplex_volumes(points: np.ndarray) -> np.ndarray:
    """Signed volumes of simplices given as (n, d+1, d) coordinates."""
    if points.shape[-1] == 1:
        return points[:, 1, 0] - points[:, 0, 0]
    e1 = points[:, 1] - points[:, 0]
    e2 = points[:, 2] - points[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def simplex_diameters(points: np.ndarray) -> np.ndarray:
    diff = points[:, :, None, :] - points[:, None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1)).max(axis=(1, 2))


class Mesh:
    """Conforming simplicial mesh with newest-vertex bisection bookkeeping.

    Vertices are append-only: refinement never renumbers, so the vertices of a
    coarse mesh are a prefix of the vertices of every refinement of it. Each
    vertex created by bisection records the endpoints of the edge it splits.
    """

    def __init__(
        self,
        domain: Domain,
        vertices: Sequence[Sequence[float]],
        elements: Iterable[Element],
        vertex_parents: Optional[Sequence[Tuple[int, int]]] = None,
        lineage: Tuple[str, ...] = (),
    ):
        self.domain = domain
        self.dim = domain.dim
        self._vertices: List[Tuple[float, ...]] = [tuple(float(c) for c in v) for v in vertices]
        if vertex_parents is None:
            vertex_parents = [(-1, -1)] * len(self._vertices)
        self.vertex_parents: List[Tuple[int, int]] = [tuple(p) for p in vertex_parents]
        self.elements: Dict[int, Element] = {}
        self.lineage = tuple(lineage)
        self._next_id = 0
        self._facet_elements: Dict[Facet, Set[int]] = {}
        self._vertex_elements: Dict[int, Set[int]] = {}
        self._midpoints: Dict[Tuple[int, int], int] = {}
        self._cache: Dict[str, object] = {}

        for vid, (a, b) in enumerate(self.vertex_parents):
            if a >= 0:
                self._midpoints[_key(a, b)] = vid
        for element in elements:
            self.add_element(element)

    def __repr__(self) -> str:
        return f"Mesh(domain={self.domain.name}, vertices={self.n_vertices}, elements={self.n_elements})"

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def n_vertices(self) -> int:
        return len(self._vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def vertices(self) -> np.ndarray:
        if "vertices" not in self._cache:
            self._cache["vertices"] = np.asarray(self._vertices, dtype=float).reshape(-1, self.dim)
        return self._cache["vertices"]

    def facets(self, vertex_ids: Sequence[int]) -> List[Facet]:
        """Facets in local order; facet k of a triangle is the edge (k, k+1 mod 3)."""
        if self.dim == 1:
            return [(vertex_ids[0],), (vertex_ids[1],)]
        a, b, c = vertex_ids
        return [_key(a, b), _key(b, c), _key(c, a)]

    def add_vertex(self, coords: Sequence[float], parents: Tuple[int, int] = (-1, -1)) -> int:
        self._vertices.append(tuple(float(c) for c in coords))
        self.vertex_parents.append(parents)
        self._invalidate()
        return len(self._vertices) - 1

    def add_element(self, element: Element) -> int:
        eid = self._next_id
        self._next_id += 1
        self.elements[eid] = element
        for facet in self.facets(element.vertex_ids):
            self._facet_elements.setdefault(facet, set()).add(eid)
        for v in element.vertex_ids:
            self._vertex_elements.setdefault(v, set()).add(eid)
        self._invalidate()
        return eid

    def remove_element(self, element_id: int) -> Element:
        element = self.elements.pop(element_id)
        for facet in self.facets(element.vertex_ids):
            owners = self._facet_elements[facet]
            owners.discard(element_id)
            if not owners:
                del self._facet_elements[facet]
        for v in element.vertex_ids:
            self._vertex_elements[v].discard(element_id)
        self._invalidate()
        return element

    def _invalidate(self) -> None:
        self._cache.clear()

    def midpoint_of(self, a: int, b: int) -> int:
        key = _key(a, b)
        if key not in self._midpoints:
            pa, pb = self._vertices[a], self._vertices[b]
            mid = tuple(0.5 * (x + y) for x, y in zip(pa, pb))
            self._midpoints[key] = self.add_vertex(mid, parents=key)
        return self._midpoints[key]

    def facet_elements(self, facet: Facet) -> Set[int]:
        return self._facet_elements.get(facet, set())

    def vertex_elements(self, vertex_id: int) -> Set[int]:
        return self._vertex_elements.get(vertex_id, set())

    def element_ids(self) -> List[int]:
        return list(self.elements)

    def boundary_facets(self) -> List[Facet]:
        return sorted(f for f, owners in self._facet_elements.items() if len(owners) == 1)

    @property
    def boundary_edges(self) -> Set[Facet]:
        return set(self.boundary_facets())

    def boundary_vertex_ids(self) -> Set[int]:
        if "boundary_vertex_ids" not in self._cache:
            self._cache["boundary_vertex_ids"] = {v for f in self.boundary_facets() for v in f}
        return self._cache["boundary_vertex_ids"]

    def interior_vertex_ids(self) -> List[int]:
        boundary = self.boundary_vertex_ids()
        return [v for v in range(self.n_vertices) if v not in boundary and self._vertex_elements.get(v)]

    def element_coords(self, element_id: int) -> np.ndarray:
        return self.vertices[list(self.elements[element_id].vertex_ids)]

    def volume(self, element_id: int) -> float:
        return float(simplex_volumes(self.element_coords(element_id)[None])[0])

    def arrays(self) -> MeshArrays:
        if "arrays" in self._cache:
            return self._cache["arrays"]
        ids = np.fromiter(self.elements, dtype=np.int64, count=len(self.elements))
        cells = np.array([self.elements[i].vertex_ids for i in ids], dtype=np.int64).reshape(-1, self.dim + 1)
        coords = self.vertices
        pts = coords[cells]
        volumes = simplex_volumes(pts)
        boundary = np.zeros(self.n_vertices, dtype=bool)
        boundary[list(self.boundary_vertex_ids())] = True
        arrays = MeshArrays(
            ids=ids,
            cells=cells,
            coords=coords,
            volumes=volumes,
            diameters=simplex_diameters(pts),
            h=np.abs(volumes) ** (1.0 / self.dim),
            barycenters=pts.mean(axis=1),
            boundary_vertices=boundary,
            boundary_elements=boundary[cells].any(axis=1),
        )
        self._cache["arrays"] = arrays
        return arrays

    @property
    def fingerprint(self) -> str:
        if "fingerprint" not in self._cache:
            arrays = self.arrays()
            digest = hashlib.sha1()
            digest.update(self.domain.name.encode("utf-8"))
            digest.update(np.ascontiguousarray(arrays.coords).tobytes())
            digest.update(np.ascontiguousarray(arrays.cells).tobytes())
            self._cache["fingerprint"] = digest.hexdigest()
        return self._cache["fingerprint"]

    def is_refinement_of(self, other: "Mesh") -> bool:
        return self.fingerprint == other.fingerprint or other.fingerprint in self.lineage

    def copy(self) -> "Mesh":
        clone = Mesh.__new__(Mesh)
        clone.domain = self.domain
        clone.dim = self.dim
        clone._vertices = list(self._vertices)
        clone.vertex_parents = list(self.vertex_parents)
        clone.elements = dict(self.elements)
        clone.lineage = self.lineage
        clone._next_id = self._next_id
        clone._facet_elements = {f: set(owners) for f, owners in self._facet_elements.items()}
        clone._vertex_elements = {v: set(owners) for v, owners in self._vertex_elements.items()}
        clone._midpoints = dict(self._midpoints)
        clone._cache = {}
        return clone

    def check_conformity(self) -> None:
        """Raise NonConformingMeshError naming the first offending facet."""
        arrays = self.arrays()
        if np.any(arrays.volumes <= 0.0):
            bad = int(arrays.ids[np.argmin(arrays.volumes)])
            raise NonConformingMeshError(f"Element {bad} has non-positive volume", edge=self.elements[bad].vertex_ids)

        tol = 1e-10 * max(self.domain.diameter, 1.0)
        for facet in sorted(self._facet_elements):
            owners = self._facet_elements[facet]
            if len(owners) > 2:
                raise NonConformingMeshError(f"Facet {facet} is shared by {len(owners)} elements", edge=facet)
            if len(owners) == 1:
                centre = self.vertices[list(facet)].mean(axis=0)
                if abs(signed_boundary_distance(self.domain, centre)[0]) > tol:
                    raise NonConformingMeshError(
                        f"Facet {facet} has a single element but lies inside the domain", edge=facet
                    )

    def is_conforming(self) -> bool:
        try:
            self.check_conformity()
            return True
        except NonConformingMeshError as e:
            logger.warning(f"Mesh is not conforming: {e}")
            return False


def _longest_edge_first(coords: np.ndarray, vids: Tuple[int, ...]) -> Tuple[int, ...]:
    """Orient a triangle counterclockwise and rotate its longest edge to the front."""
    a, b, c = vids
    p = coords[[a, b, c]]
    area = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])
    if area < 0:
        a, b, c = a, c, b
    ordered = (a, b, c)

    def rank(k: int):
        u, v = ordered[k], ordered[(k + 1) % 3]
        length = float(np.linalg.norm(coords[u] - coords[v]))
        return (-round(length, 12), _key(u, v))

    k = min(range(3), key=rank)
    return ordered[k:] + ordered[:k]


def _grid_aligned(domain: Domain, target_h: float) -> bool:
    if not domain.is_rectilinear:
        return False
    pts = np.asarray(domain.vertices)
    steps = (pts - pts.min(axis=0)) / target_h
    return bool(np.allclose(steps, np.round(steps), atol=1e-9))


def _structured_triangles(domain: Domain, target_h: float):
    pts = np.asarray(domain.vertices)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    nx, ny = (int(round(n)) for n in (hi - lo) / target_h)

    index: Dict[Tuple[int, int], int] = {}
    triangles = []
    for j in range(ny):
        for i in range(nx):
            centre = lo + target_h * np.array([i + 0.5, j + 0.5])
            if not shapely.contains_xy(domain.polygon, centre[0], centre[1]):
                continue
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            for corner in corners:
                index.setdefault(corner, -1)
            triangles.append((corners[0], corners[1], corners[2]))
            triangles.append((corners[0], corners[2], corners[3]))

    ordered = sorted(index, key=lambda ij: (ij[1], ij[0]))
    for n, ij in enumerate(ordered):
        index[ij] = n
    coords = np.array([lo + target_h * np.array(ij, dtype=float) for ij in ordered])
    cells = [tuple(index[c] for c in tri) for tri in triangles]
    return coords, cells


def _delaunay_triangles(domain: Domain, target_h: float):
    boundary = []
    for a, b in domain.segments:
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / target_h - 1e-12)))
        boundary.extend(a + (b - a) * k / n for k in range(n))
    boundary = np.array(boundary)

    minx, miny, maxx, maxy = domain.polygon.bounds
    gx = np.arange(minx, maxx + target_h, target_h)
    gy = np.arange(miny, maxy + target_h, target_h)
    lattice = np.array([(x, y) for y in gy for x in gx])
    keep = signed_boundary_distance(domain, lattice) > 0.5 * target_h
    points = np.vstack([boundary, lattice[keep]]) if keep.any() else boundary

    tri = Delaunay(points)
    centres = points[tri.simplices].mean(axis=1)
    inside = shapely.contains_xy(domain.polygon, centres[:, 0], centres[:, 1])
    simplices = tri.simplices[inside]
    areas = np.abs(simplex_volumes(points[simplices]))
    simplices = simplices[areas > 1e-14 * domain.area]

    covered = np.abs(simplex_volumes(points[simplices])).sum()
    if not np.isclose(covered, domain.area, rtol=1e-9):
        raise MeshError(
            f"Triangulation of '{domain.name}' covers area {covered:.12g} instead of {domain.area:.12g}"
        )
    return points, [tuple(int(v) for v in s) for s in simplices]


def make_initial_mesh(domain: Domain, target_h: float) -> Mesh:
    """Conforming initial mesh; every triangle's longest edge is its refinement edge."""
    if target_h <= 0:
        raise MeshError(f"target_h must be positive, got {target_h}")

    if domain.dim == 1:
        a, b = domain.vertices[0][0], domain.vertices[1][0]
        n = max(1, int(math.ceil((b - a) / target_h - 1e-12)))
        coords = [(a + (b - a) * k / n,) for k in range(n + 1)]
        elements = [Element((k, k + 1)) for k in range(n)]
        mesh = Mesh(domain, coords, elements)
    else:
        if _grid_aligned(domain, target_h):
            coords, cells = _structured_triangles(domain, target_h)
        else:
            coords, cells = _delaunay_triangles(domain, target_h)
        elements = [Element(_longest_edge_first(coords, c)) for c in cells]
        mesh = Mesh(domain, coords, elements)

    mesh.check_conformity()
    logger.info(f"Initial mesh of '{domain.name}' with h={target_h}: {mesh.n_elements} elements")
    return mesh


def bisect(mesh: Mesh, element_id: int) -> Tuple[int, int]:
    """Bisect one element in place; the new vertex becomes the newest vertex of both children."""
    if element_id not in mesh.elements:
        raise MeshError(f"Element {element_id} does not exist")
    element = mesh.remove_element(element_id)
    generation = element.generation + 1
    if mesh.dim == 1:
        v0, v1 = element.vertex_ids
        m = mesh.midpoint_of(v0, v1)
        first = Element((v0, m), generation)
        second = Element((m, v1), generation)
    else:
        v0, v1, v2 = element.vertex_ids
        m = mesh.midpoint_of(v0, v1)
        first = Element((v2, v0, m), generation)
        second = Element((v1, v2, m), generation)
    return mesh.add_element(first), mesh.add_element(second)


def _bisect_with_completion(mesh: Mesh, element_id: int) -> None:
    stack = [element_id]
    while stack:
        current = stack[-1]
        if current not in mesh.elements:
            stack.pop()
            continue
        edge = _key(*mesh.elements[current].refinement_edge)
        neighbours = [t for t in mesh.facet_elements(edge) if t != current]
        if not neighbours:
            bisect(mesh, current)
            stack.pop()
            continue
        neighbour = neighbours[0]
        if _key(*mesh.elements[neighbour].refinement_edge) == edge:
            bisect(mesh, current)
            bisect(mesh, neighbour)
            stack.pop()
        else:
            stack.append(neighbour)


def refine(mesh: Mesh, marked: Iterable[int]) -> Mesh:
    """Smallest conforming refinement that bisects every marked element at least once."""
    marked = sorted(set(marked))
    unknown = [t for t in marked if t not in mesh.elements]
    if unknown:
        raise MeshError(f"Marked elements not in mesh: {unknown[:5]}")
    if not marked:
        return mesh.copy()

    refined = mesh.copy()
    refined.lineage = mesh.lineage + (mesh.fingerprint,)
    for element_id in marked:
        if element_id not in refined.elements:
            continue
        if refined.dim == 1:
            bisect(refined, element_id)
        else:
            _bisect_with_completion(refined, element_id)

    logger.debug(f"Refined {len(marked)} marked elements: {mesh.n_elements} -> {refined.n_elements}")
    return refined


def uniform_refine(mesh: Mesh, sweeps: int = 1) -> Mesh:
    for _ in range(sweeps):
        mesh = refine(mesh, mesh.element_ids())
    return mesh


def _containment_constant(mesh: Mesh, element_id: int, ring1: Iterable[int]) -> float:
    arrays = mesh.arrays()
    coords = mesh.element_coords(element_id)
    x_t = coords.mean(axis=0)
    h_t = abs(mesh.volume(element_id)) ** (1.0 / mesh.dim)
    ring_vertices = sorted({v for t in ring1 for v in mesh.elements[t].vertex_ids})
    distances = np.linalg.norm(arrays.coords[ring_vertices] - x_t, axis=1)
    return float(distances.max() / h_t)


def stars(mesh: Mesh, element_id: int, shape_constant: float = 4.0) -> Star:
    if element_id not in mesh.elements:
        raise MeshError(f"Element {element_id} does not exist")
    element = mesh.elements[element_id]
    ring1 = set().union(*(mesh.vertex_elements(v) for v in element.vertex_ids))
    ring2 = set().union(*(mesh.vertex_elements(v) for t in ring1 for v in mesh.elements[t].vertex_ids))

    ball = None
    if mesh.boundary_vertex_ids().intersection(element.vertex_ids):
        needed = _containment_constant(mesh, element_id, ring1)
        if shape_constant < needed:
            raise StarConstantError(
                f"Star constant {shape_constant} too small for element {element_id}, need {needed:.4f}",
                minimal_constant=needed,
            )
        coords = mesh.element_coords(element_id)
        h_t = abs(mesh.volume(element_id)) ** (1.0 / mesh.dim)
        ball = (tuple(coords.mean(axis=0)), shape_constant * h_t)
    return Star(element_id, frozenset(ring1), frozenset(ring2), ball)


def minimal_star_constant(mesh: Mesh) -> float:
    """Smallest C for which every boundary ball B(x_T, C h_T) contains the first ring."""
    boundary = mesh.boundary_vertex_ids()
    best = 0.0
    for element_id, element in mesh.elements.items():
        if boundary.intersection(element.vertex_ids):
            ring1 = set().union(*(mesh.vertex_elements(v) for v in element.vertex_ids))
            best = max(best, _containment_constant(mesh, element_id, ring1))
    return best


def validate_star_constant(mesh: Mesh, shape_constant: float) -> None:
    needed = minimal_star_constant(mesh)
    if shape_constant < needed:
        raise StarConstantError(
            f"Star constant {shape_constant} too small for this mesh, need {needed:.4f}",
            minimal_constant=needed,
        )


def boundary_distance(mesh: Mesh, point: Sequence[float]) -> BoundaryDistance:
    """Distance of a point to the domain boundary.

    Points outside the domain get a negative distance and `outside` set.
    """
    value = float(signed_boundary_distance(mesh.domain, np.asarray(point, dtype=float))[0])
    outside = value < 0
    if outside:
        logger.debug(f"Point {tuple(point)} lies outside '{mesh.domain.name}'")
    return BoundaryDistance(distance=value, outside=outside)


def minimum_angle(mesh: Mesh) -> float:
    """Smallest interior angle in degrees over all triangles."""
    if mesh.dim != 2:
        raise MeshError("minimum_angle is defined for triangle meshes only")
    pts = mesh.arrays().element_coords
    angles = []
    for k in range(3):
        u = pts[:, (k + 1) % 3] - pts[:, k]
        v = pts[:, (k + 2) % 3] - pts[:, k]
        cos = (u * v).sum(axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
    return float(np.min(angles))
