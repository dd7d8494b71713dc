import logging
from typing import Any, Dict, List

import numpy as np

from fraclap.core.assembly import AssemblyConfig, assemble, assemble_bilinear
from fraclap.core.audits.base import AuditResult, BaseAudit
from fraclap.core.exceptions import QuadratureError, SolverError
from fraclap.core.mesh import Mesh, interval_domain, make_domain, make_initial_mesh, polygon_domain
from fraclap.core.solution import validate_closed_form_1d
from fraclap.core.utils.solver_manager import get_solver_manager

logger = logging.getLogger(__name__)


def dilate(mesh: Mesh, factor: float) -> Mesh:
    """The same triangulation of factor * domain."""
    domain = mesh.domain
    if domain.dim == 1:
        scaled = interval_domain(factor * domain.vertices[0][0], factor * domain.vertices[1][0], name=domain.name)
    else:
        scaled = polygon_domain([[factor * c for c in v] for v in domain.vertices], name=domain.name)
    return Mesh(scaled, factor * mesh.vertices, mesh.elements.values(), mesh.vertex_parents)


class StructuralAudit(BaseAudit):
    """Symmetry, Cholesky success and the dilation law of the stiffness matrix."""

    def run(self, settings, **kwargs) -> AuditResult:
        config = AssemblyConfig.from_settings(settings)
        target_h = float(self.thresholds.get("target_h", 0.5))
        t = float(self.thresholds.get("dilation", 2.0))
        sym_tol = float(self.thresholds.get("symmetry_tolerance", 1e-12))
        scale_tol = float(self.thresholds.get("scaling_tolerance", 1e-8))
        cholesky = get_solver_manager().get_solver("cholesky")

        report: Dict[str, Any] = {}
        failures: List[str] = []
        meshes = {
            "interval": make_initial_mesh(make_domain("interval"), 0.25),
            settings.domain: make_initial_mesh(make_domain(settings.domain, settings.disk_sides), target_h),
        }
        for name, mesh in meshes.items():
            for s in settings.s_list:
                key = f"{name}/s={s}"
                system = assemble(mesh, s, config=config)
                symmetry = system.symmetry_error()
                try:
                    cholesky.solve(system.matrix, system.load, settings.solver_tol)
                    positive = True
                except SolverError as e:
                    positive = False
                    failures.append(f"{key}: Cholesky failed: {e}")

                raw = assemble_bilinear(mesh, s, config, system.dofmap)
                scaled = assemble_bilinear(dilate(mesh, t), s, config)
                expected = t ** (mesh.dim - 2.0 * s) * raw
                scaling = float(np.abs(scaled - expected).max() / max(np.abs(expected).max(), 1e-300))

                report[key] = {"dofs": system.n_dofs, "symmetry": symmetry, "positive": positive,
                               "scaling": scaling}
                if symmetry > sym_tol:
                    failures.append(f"{key}: symmetry error {symmetry:.2e}")
                if scaling > scale_tol:
                    failures.append(f"{key}: dilation law off by {scaling:.2e}")

        if failures:
            return AuditResult(success=False, data=report, error="; ".join(failures[:5]))
        return AuditResult(success=True, data=report)


class ClosedFormAudit(BaseAudit):

    def run(self, settings, **kwargs) -> AuditResult:
        tolerance = float(self.thresholds.get("tolerance", 1e-4))
        deviations = {}
        failures = []
        for s in settings.s_list:
            try:
                deviations[s] = validate_closed_form_1d(s, tolerance)
            except QuadratureError as e:
                failures.append(str(e))
        if failures:
            return AuditResult(success=False, data={"deviations": deviations}, error="; ".join(failures))
        return AuditResult(success=True, data={"deviations": deviations})
