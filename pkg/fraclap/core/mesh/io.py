"""Plain-text mesh format.

    d nv ne
    x [y]                                  (nv lines, 17 significant digits)
    v0 v1 [v2] refinement_edge generation  (ne lines)

The refinement edge is a local edge index (edge k joins local vertices k and
k+1); files written here always use 0. Boundary facets are recomputed on load.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple, Union

import numpy as np

from fraclap.core.exceptions import MeshError, NonConformingMeshError
from fraclap.core.mesh.geometry import Domain, interval_domain, polygon_domain
from fraclap.core.mesh.mesh import Element, Mesh

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def format_mesh(mesh: Mesh) -> str:
    lines = [f"{mesh.dim} {mesh.n_vertices} {mesh.n_elements}"]
    for coords in mesh.vertices:
        lines.append(" ".join(f"{c:.17g}" for c in coords))
    for element in mesh.elements.values():
        ids = " ".join(str(v) for v in element.vertex_ids)
        lines.append(f"{ids} 0 {element.generation}")
    return "\n".join(lines) + "\n"


def save_mesh(mesh: Mesh, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_mesh(mesh), encoding="utf-8")
    logger.info(f"Wrote mesh with {mesh.n_elements} elements to {path}")
    return path


def _boundary_loop(coords: np.ndarray, elements: List[Element]) -> List[int]:
    owners: Dict[Tuple[int, int], int] = {}
    for element in elements:
        a, b, c = element.vertex_ids
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            owners[key] = owners.get(key, 0) + 1

    boundary = sorted(edge for edge, count in owners.items() if count == 1)
    if not boundary:
        raise MeshError("Mesh has no boundary edges")
    neighbours: Dict[int, Set[int]] = {}
    for u, v in boundary:
        neighbours.setdefault(u, set()).add(v)
        neighbours.setdefault(v, set()).add(u)
    for vertex, adjacent in sorted(neighbours.items()):
        if len(adjacent) != 2:
            edge = (vertex, min(adjacent))
            raise NonConformingMeshError(
                f"Boundary vertex {vertex} has {len(adjacent)} boundary neighbours", edge=edge
            )

    start = boundary[0][0]
    loop, previous, current = [start], None, start
    while True:
        nxt = min(v for v in neighbours[current] if v != previous)
        if nxt == start:
            break
        loop.append(nxt)
        previous, current = current, nxt
    if len(loop) != len(boundary):
        missing = next(e for e in boundary if e[0] not in loop or e[1] not in loop)
        raise NonConformingMeshError("Boundary edges do not form a single closed loop", edge=missing)

    corners = []
    n = len(loop)
    for k in range(n):
        p, q, r = coords[loop[k - 1]], coords[loop[k]], coords[loop[(k + 1) % n]]
        cross = (q[0] - p[0]) * (r[1] - q[1]) - (q[1] - p[1]) * (r[0] - q[0])
        if abs(cross) > 1e-12 * max(np.linalg.norm(q - p) * np.linalg.norm(r - q), 1e-300):
            corners.append(loop[k])
    return corners


def infer_domain(coords: np.ndarray, elements: List[Element]) -> Domain:
    if coords.shape[1] == 1:
        return interval_domain(float(coords[:, 0].min()), float(coords[:, 0].max()), name="loaded")
    corners = _boundary_loop(coords, elements)
    return polygon_domain(coords[corners].tolist(), name="loaded")


def parse_mesh(text: str, domain: Optional[Domain] = None, validate: bool = True) -> Mesh:
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    try:
        d, nv, ne = (int(v) for v in rows[0])
    except (IndexError, ValueError) as e:
        raise MeshError(f"Malformed mesh header: {e}") from e
    if d not in (1, 2):
        raise MeshError(f"Unsupported mesh dimension {d}")
    if len(rows) != 1 + nv + ne:
        raise MeshError(f"Expected {nv} vertex and {ne} element lines, got {len(rows) - 1} lines")

    try:
        coords = np.array([[float(c) for c in row] for row in rows[1:1 + nv]], dtype=float)
    except ValueError as e:
        raise MeshError(f"Malformed vertex line: {e}") from e
    if coords.shape != (nv, d) or not np.all(np.isfinite(coords)):
        raise MeshError("Vertex coordinates must be finite and match the dimension")

    elements = []
    for lineno, row in enumerate(rows[1 + nv:], start=2 + nv):
        if len(row) != d + 3:
            raise MeshError(f"Element line {lineno} has {len(row)} fields, expected {d + 3}")
        try:
            ids = tuple(int(v) for v in row[:d + 1])
            edge, generation = int(row[d + 1]), int(row[d + 2])
        except ValueError as e:
            raise MeshError(f"Malformed element line {lineno}: {e}") from e
        if any(v < 0 or v >= nv for v in ids):
            raise MeshError(f"Element line {lineno} references a missing vertex")
        if not 0 <= edge <= (0 if d == 1 else 2):
            raise MeshError(f"Element line {lineno} has invalid refinement edge {edge}")
        elements.append(Element(ids[edge:] + ids[:edge], generation))

    if domain is None:
        domain = infer_domain(coords, elements)
    mesh = Mesh(domain, coords, elements)
    if validate:
        mesh.check_conformity()
    return mesh


def load_mesh(path: PathLike, domain: Optional[Domain] = None, validate: bool = True) -> Mesh:
    path = Path(path)
    if not path.exists():
        raise MeshError(f"Mesh file not found: {path}")
    mesh = parse_mesh(path.read_text(encoding="utf-8"), domain=domain, validate=validate)
    logger.info(f"Loaded mesh with {mesh.n_elements} elements from {path}")
    return mesh
