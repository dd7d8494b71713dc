from dataclasses import dataclass

import numpy as np

from fraclap.core.mesh import Mesh

BOUNDARY = -1


@dataclass(frozen=True)
class DofMap:
    """Interior vertices numbered 0..n-1 in vertex order; boundary vertices map to BOUNDARY."""
    vertex_to_dof: np.ndarray
    dof_to_vertex: np.ndarray
    fingerprint: str

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "DofMap":
        interior = np.array(mesh.interior_vertex_ids(), dtype=np.int64)
        vertex_to_dof = np.full(mesh.n_vertices, BOUNDARY, dtype=np.int64)
        vertex_to_dof[interior] = np.arange(len(interior))
        return cls(vertex_to_dof=vertex_to_dof, dof_to_vertex=interior, fingerprint=mesh.fingerprint)

    @property
    def n_dofs(self) -> int:
        return len(self.dof_to_vertex)

    def dofs(self, vertex_ids) -> np.ndarray:
        return self.vertex_to_dof[np.asarray(vertex_ids, dtype=np.int64)]

    def extend(self, coefficients: np.ndarray) -> np.ndarray:
        """Nodal values on all vertices, zero on the boundary."""
        values = np.zeros(len(self.vertex_to_dof))
        values[self.dof_to_vertex] = coefficients
        return values

    def restrict(self, nodal_values: np.ndarray) -> np.ndarray:
        return np.asarray(nodal_values, dtype=float)[self.dof_to_vertex]
