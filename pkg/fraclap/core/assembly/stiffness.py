"""Dense stiffness assembly for the integral fractional Laplacian.

a(u, v) = Lambda(d, s)/2 * [ sum over element pairs of the double integrals
          + 2 * sum over elements of the integral of u v omega ]

Pairs closer than near_factor times the larger diameter are integrated
element-pair by element-pair with the singular rules of the quadrature
package. All remaining pairs are accumulated in blocks of quadrature points.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.special import gamma

from fraclap.core.assembly.dofs import BOUNDARY, DofMap
from fraclap.core.exceptions import AssemblyError, QuadratureError
from fraclap.core.functions import make_source
from fraclap.core.mesh import Mesh
from fraclap.core.quadrature.pairs import energy_pair_matrix
from fraclap.core.quadrature.rules import map_rule, simplex_rule
from fraclap.core.quadrature.tail import TailConfig, tail_element_matrices

logger = logging.getLogger(__name__)

Source = Union[str, Callable[[np.ndarray], np.ndarray]]


def lambda_constant(d: int, s: float) -> float:
    """Normalizing constant 2^(2s) s Gamma(s + d/2) / (pi^(d/2) Gamma(1 - s))."""
    if not 0.0 < s < 1.0:
        raise QuadratureError(f"s = {s} outside (0, 1)")
    if d < 1:
        raise QuadratureError(f"dimension must be positive, got {d}")
    return 2.0 ** (2.0 * s) * s * gamma(s + 0.5 * d) / (math.pi ** (0.5 * d) * gamma(1.0 - s))


@dataclass(frozen=True)
class AssemblyConfig:
    quad_order: int = 5
    far_order: int = 2
    near_factor: float = 2.0
    disjoint_depth: int = 2
    max_workers: int = 4
    block_size: int = 256
    memory_budget_mb: float = 4096.0
    tail: TailConfig = field(default_factory=TailConfig)

    @classmethod
    def from_settings(cls, settings) -> "AssemblyConfig":
        return cls(
            quad_order=settings.quad_order,
            far_order=settings.far_order,
            near_factor=settings.near_factor,
            disjoint_depth=settings.disjoint_depth,
            max_workers=settings.max_workers,
            block_size=settings.block_size,
            memory_budget_mb=settings.memory_budget_mb,
            tail=TailConfig.from_settings(settings),
        )


@dataclass
class StiffnessSystem:
    matrix: np.ndarray
    load: np.ndarray
    s: float
    fingerprint: str
    dofmap: DofMap
    mesh: Optional[Mesh] = None
    source: str = "1"

    @property
    def n_dofs(self) -> int:
        return len(self.load)

    def symmetry_error(self) -> float:
        scale = np.abs(self.matrix).max() if self.matrix.size else 1.0
        return float(np.abs(self.matrix - self.matrix.T).max() / scale) if self.matrix.size else 0.0


def _check_budget(n: int, config: AssemblyConfig) -> None:
    needed_mb = 8.0 * n * n / 2 ** 20
    if needed_mb > config.memory_budget_mb:
        raise AssemblyError(
            f"A dense {n}x{n} matrix needs {needed_mb:.0f} MB, above the budget of "
            f"{config.memory_budget_mb:.0f} MB; raise memory_budget_mb or lower cap"
        )


def near_pairs(mesh: Mesh, near_factor: float) -> sparse.csr_matrix:
    """Symmetric boolean element adjacency: centroid distance below near_factor times the larger diameter.

    Elements sharing a vertex are always near, and every element is near itself.
    """
    arrays = mesh.arrays()
    ne = len(arrays.ids)
    tree = cKDTree(arrays.barycenters)
    balls = tree.query_ball_point(arrays.barycenters, r=near_factor * arrays.diameters)
    rows = np.repeat(np.arange(ne), [len(b) for b in balls])
    cols = np.concatenate([np.asarray(b, dtype=np.int64) for b in balls]) if ne else np.zeros(0, dtype=np.int64)

    incidence = sparse.csr_matrix(
        (np.ones(arrays.cells.size), (np.repeat(np.arange(ne), arrays.cells.shape[1]), arrays.cells.ravel())),
        shape=(ne, mesh.n_vertices),
    )
    touching = (incidence @ incidence.T).tocoo()

    all_rows = np.concatenate([rows, touching.row])
    all_cols = np.concatenate([cols, touching.col])
    near = sparse.csr_matrix((np.ones(len(all_rows)), (all_rows, all_cols)), shape=(ne, ne))
    return (near + near.T).astype(bool).tocsr()


def _scatter(matrix: np.ndarray, dofs: np.ndarray, local: np.ndarray) -> None:
    keep = dofs != BOUNDARY
    if not keep.any():
        return
    idx = dofs[keep]
    matrix[np.ix_(idx, idx)] += local[np.ix_(keep, keep)]


def _near_contribution(mesh: Mesh, dofmap: DofMap, pairs: np.ndarray, s: float,
                       config: AssemblyConfig) -> List[Tuple[np.ndarray, np.ndarray]]:
    arrays = mesh.arrays()
    out = []
    for a, b in pairs:
        labels_a = tuple(int(v) for v in arrays.cells[a])
        labels_b = tuple(int(v) for v in arrays.cells[b])
        union, local = energy_pair_matrix(
            arrays.coords[arrays.cells[a]], arrays.coords[arrays.cells[b]], labels_a, labels_b,
            s, config.quad_order, config.disjoint_depth,
        )
        factor = 1.0 if a == b else 2.0
        out.append((dofmap.dofs(union), factor * local))
    return out


def _basis_at_points(mesh: Mesh, dofmap: DofMap, order: int) -> Tuple[np.ndarray, np.ndarray, sparse.csr_matrix]:
    arrays = mesh.arrays()
    rule = simplex_rule(mesh.dim, order)
    points, weights = map_rule(rule, arrays.element_coords)
    nq = rule.size
    ne = len(arrays.ids)
    lam = rule.barycentric()

    point_ids = np.repeat(np.arange(ne * nq).reshape(ne, nq)[:, :, None], mesh.dim + 1, axis=2)
    dofs = np.repeat(dofmap.dofs(arrays.cells)[:, None, :], nq, axis=1)
    values = np.broadcast_to(lam[None], dofs.shape)
    keep = dofs != BOUNDARY
    phi = sparse.csr_matrix(
        (values[keep], (point_ids[keep], dofs[keep])),
        shape=(ne * nq, dofmap.n_dofs),
    )
    return points.reshape(-1, mesh.dim), weights.ravel(), phi


def _far_block(args) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    (start, stop, points, weights, phi, phi_t, near, nq, exponent) = args
    rows = slice(start * nq, stop * nq)
    mask = np.repeat(np.repeat(near[start:stop].toarray(), nq, axis=1), nq, axis=0)
    dist = cdist(points[rows], points)
    dist[mask] = 1.0
    kernel = weights[rows, None] * weights[None, :] * dist ** (-exponent)
    kernel[mask] = 0.0

    row_sums = kernel.sum(axis=1)
    block_phi = phi[rows]
    dofs = np.unique(block_phi.indices)
    if len(dofs) == 0:
        return dofs, np.zeros((0, 0)), np.zeros((0, phi.shape[1]))
    local = block_phi[:, dofs].toarray()
    projected = np.asarray(phi_t @ kernel.T).T
    diagonal = 2.0 * local.T @ (row_sums[:, None] * local)
    cross = 2.0 * local.T @ projected
    return dofs, diagonal, cross


def _far_field(mesh: Mesh, dofmap: DofMap, near: sparse.csr_matrix, s: float,
               config: AssemblyConfig, matrix: np.ndarray) -> None:
    points, weights, phi = _basis_at_points(mesh, dofmap, config.far_order)
    nq = simplex_rule(mesh.dim, config.far_order).size
    ne = mesh.n_elements
    per_block = max(1, config.block_size // nq)
    phi_t = phi.T.tocsr()
    exponent = mesh.dim + 2.0 * s
    blocks = [
        (start, min(start + per_block, ne), points, weights, phi, phi_t, near, nq, exponent)
        for start in range(0, ne, per_block)
    ]
    with ThreadPoolExecutor(max_workers=config.max_workers) as executor:
        for dofs, diagonal, cross in executor.map(_far_block, blocks):
            if len(dofs) == 0:
                continue
            matrix[np.ix_(dofs, dofs)] += diagonal
            matrix[dofs, :] -= cross


def assemble_bilinear(mesh: Mesh, s: float, config: AssemblyConfig = AssemblyConfig(),
                      dofmap: Optional[DofMap] = None) -> np.ndarray:
    """Double-integral matrix over interior dofs without the Lambda(d, s)/2 prefactor."""
    if not 0.0 < s < 1.0:
        raise QuadratureError(f"s = {s} outside (0, 1)")
    dofmap = dofmap or DofMap.from_mesh(mesh)
    n = dofmap.n_dofs
    _check_budget(n, config)
    matrix = np.zeros((n, n))
    if n == 0:
        return matrix

    near = near_pairs(mesh, config.near_factor)
    upper = sparse.triu(near).tocoo()
    pairs = np.column_stack([upper.row, upper.col])
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs = pairs[order]
    chunks = np.array_split(pairs, max(1, min(len(pairs), 4 * config.max_workers)))

    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=config.max_workers) as executor:
        results = executor.map(lambda chunk: _near_contribution(mesh, dofmap, chunk, s, config), chunks)
        for chunk_result in results:
            for dofs, local in chunk_result:
                _scatter(matrix, dofs, local)
    logger.debug(f"Near field: {len(pairs)} element pairs in {time.perf_counter() - started:.2f}s")

    started = time.perf_counter()
    _far_field(mesh, dofmap, near, s, config, matrix)
    logger.debug(f"Far field: {time.perf_counter() - started:.2f}s")

    started = time.perf_counter()
    tail = tail_element_matrices(mesh, s, config.tail)
    arrays = mesh.arrays()
    for index in range(len(arrays.ids)):
        _scatter(matrix, dofmap.dofs(arrays.cells[index]), 2.0 * tail[index])
    logger.debug(f"Complement weights: {time.perf_counter() - started:.2f}s")

    return 0.5 * (matrix + matrix.T)


def assemble_load(mesh: Mesh, f: Source, dofmap: DofMap, order: int) -> np.ndarray:
    source = make_source(f) if isinstance(f, str) else f
    arrays = mesh.arrays()
    rule = simplex_rule(mesh.dim, order)
    points, weights = map_rule(rule, arrays.element_coords)
    values = source(points.reshape(-1, mesh.dim)).reshape(weights.shape)
    local = np.einsum("mq,qi->mi", weights * values, rule.barycentric())
    dofs = dofmap.dofs(arrays.cells)
    keep = dofs != BOUNDARY
    load = np.zeros(dofmap.n_dofs)
    np.add.at(load, dofs[keep], local[keep])
    return load


def assemble(mesh: Mesh, s: float, f: Source = "1", config: AssemblyConfig = AssemblyConfig()) -> StiffnessSystem:
    started = time.perf_counter()
    dofmap = DofMap.from_mesh(mesh)
    matrix = assemble_bilinear(mesh, s, config, dofmap)
    matrix *= 0.5 * lambda_constant(mesh.dim, s)
    load = assemble_load(mesh, f, dofmap, config.quad_order)
    logger.info(
        f"Assembled {dofmap.n_dofs} dofs on {mesh.n_elements} elements for s={s} "
        f"in {time.perf_counter() - started:.2f}s"
    )
    source = f if isinstance(f, str) else getattr(f, "expression", repr(f))
    return StiffnessSystem(matrix=matrix, load=load, s=s, fingerprint=mesh.fingerprint, dofmap=dofmap,
                           mesh=mesh, source=source)
