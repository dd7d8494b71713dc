import logging
from typing import Any, Dict, List, Optional

import numpy as np

from fraclap.core.adapt import (
    GreedyStop,
    PracticalMarking,
    SeminormMarking,
    equidistribution_ratio,
    grading_statistics,
    greedy,
)
from fraclap.core.audits.base import AuditResult, BaseAudit
from fraclap.core.exceptions import MeshError, NonConformingMeshError
from fraclap.core.mesh import Mesh, make_domain, make_initial_mesh, refine
from fraclap.core.mesh.io import load_mesh
from fraclap.core.sobolev.models import BoundaryLayerModel

logger = logging.getLogger(__name__)


def mesh_invariant_failures(meshes: List[Mesh], tolerance: float) -> List[str]:
    """Conformity and area conservation of every mesh of a sequence."""
    failures = []
    for k, mesh in enumerate(meshes):
        try:
            mesh.check_conformity()
        except NonConformingMeshError as e:
            failures.append(f"mesh {k}: {e}")
        covered = float(np.abs(mesh.arrays().volumes).sum())
        area = mesh.domain.area
        if abs(covered - area) > tolerance * area:
            failures.append(f"mesh {k}: elements cover {covered:.15g} of {area:.15g}")
    return failures


class ConformityAudit(BaseAudit):
    """Newest-vertex bisection keeps meshes conforming and area-preserving."""

    def run(self, settings, **kwargs) -> AuditResult:
        mesh_path: Optional[str] = kwargs.get("mesh_path")
        if mesh_path:
            return self._check_file(mesh_path)

        rng = np.random.default_rng(settings.seed)
        steps = int(self.thresholds.get("steps", 6))
        fraction = float(self.thresholds.get("marked_fraction", 0.2))
        tolerance = float(self.thresholds.get("area_tolerance", 1e-12))
        report: Dict[str, Any] = {}
        failures: List[str] = []
        for name in self.thresholds.get("domains", ["lshape"]):
            mesh = make_initial_mesh(make_domain(name, settings.disk_sides), settings.target_h)
            meshes = [mesh]
            for _ in range(steps):
                ids = sorted(mesh.element_ids())
                count = max(1, int(fraction * len(ids)))
                marked = rng.choice(ids, size=count, replace=False)
                mesh = refine(mesh, (int(t) for t in marked))
                meshes.append(mesh)
            problems = mesh_invariant_failures(meshes, tolerance)
            report[name] = {"elements": [m.n_elements for m in meshes], "failures": problems}
            failures.extend(f"{name} {p}" for p in problems)

        if failures:
            return AuditResult(success=False, data=report, error="; ".join(failures[:5]))
        return AuditResult(success=True, data=report)

    def _check_file(self, path: str) -> AuditResult:
        try:
            mesh = load_mesh(path, validate=False)
            mesh.check_conformity()
        except NonConformingMeshError as e:
            return AuditResult(success=False, data={"mesh": path, "edge": list(e.edge or ())},
                               error=f"Non-conforming mesh {path}: {e}")
        except MeshError as e:
            return AuditResult(success=False, data={"mesh": path}, error=f"Invalid mesh {path}: {e}")
        return AuditResult(success=True, data={"mesh": path, "elements": mesh.n_elements,
                                               "vertices": mesh.n_vertices})


class ComplexityAudit(BaseAudit):
    """GREEDY with the practical rule on the interval and on the configured two-dimensional domain."""

    def run(self, settings, **kwargs) -> AuditResult:
        max_lambda0 = float(self.thresholds.get("max_lambda0", 50.0))
        after = int(self.thresholds.get("explosion_after", 5))
        factor = float(self.thresholds.get("explosion_factor", 2.0))
        tolerance = float(self.thresholds.get("area_tolerance", 1e-10))

        domain_2d = settings.domain if settings.domain != "interval" else "lshape"
        runs = {
            "interval": (make_domain("interval"), int(self.thresholds.get("interval_cap", 2000))),
            domain_2d: (make_domain(domain_2d, settings.disk_sides), settings.cap),
        }
        report: Dict[str, Any] = {}
        failures: List[str] = []
        for name, (domain, cap) in runs.items():
            mesh0 = make_initial_mesh(domain, settings.target_h if domain.dim == 2 else 0.25)
            strategy = PracticalMarking(settings.theta)
            meshes, trace = greedy(mesh0, strategy, GreedyStop(max_elements=cap, time_max=settings.time_max),
                                   hard_cap=settings.hard_cap)
            final = meshes[-1]
            entry: Dict[str, Any] = {
                "steps": len(meshes) - 1,
                "elements": final.n_elements,
                "cumulative_marked": trace.cumulative_marked,
                "lambda0": trace.lambda0,
                "consistent": trace.is_consistent(),
                "stopped_by": trace.stopped_by,
                "equidistribution": equidistribution_ratio(final, settings.theta),
            }
            if not trace.is_consistent():
                failures.append(f"{name}: inconsistent trace")
            if trace.lambda0 is not None and trace.lambda0 > max_lambda0:
                failures.append(f"{name}: Lambda0 = {trace.lambda0:.3f} above {max_lambda0}")
            if trace.lambda0_exploded(after, factor):
                failures.append(f"{name}: running Lambda0 grew by more than {factor}x after step {after}")
            if trace.stopped_by == "empty_marking" and entry["equidistribution"] > self.thresholds.get(
                    "max_equidistribution", 2.0):
                failures.append(f"{name}: equidistribution ratio {entry['equidistribution']:.3f}")
            failures.extend(f"{name} {p}" for p in mesh_invariant_failures(meshes, tolerance))

            if domain.dim == 2 and trace.cumulative_marked:
                stats = grading_statistics(final)
                entry["grading_ratio"] = stats.ratio
                entry["grading_monotone"] = stats.monotone
                if not stats.ratio >= self.thresholds.get("grading_ratio", 8.0):
                    failures.append(f"{name}: grading ratio {stats.ratio:.3f}")
            report[name] = entry

        if failures:
            return AuditResult(success=False, data=report, error="; ".join(failures[:5]))
        return AuditResult(success=True, data=report)


class SeminormMarkingAudit(BaseAudit):
    """GREEDY driven by the seminorm indicator of the boundary layer dist^s."""

    def run(self, settings, **kwargs) -> AuditResult:
        s = float(self.thresholds.get("s", 0.5))
        domain = make_domain("lshape")
        mesh0 = make_initial_mesh(domain, float(self.thresholds.get("target_h", 0.5)))
        strategy = SeminormMarking(
            BoundaryLayerModel(domain, s), s, epsilon=settings.seminorm_epsilon, c0=settings.seminorm_c0,
            delta=settings.seminorm_delta, grow_star_constant=True, star_constant=settings.star_constant,
            max_workers=settings.max_workers,
        )
        stop = GreedyStop(max_elements=int(self.thresholds.get("max_elements", 150)),
                          max_iterations=int(self.thresholds.get("max_iterations", 4)))
        meshes, trace = greedy(mesh0, strategy, stop, hard_cap=settings.hard_cap)
        problems = mesh_invariant_failures(meshes, 1e-10)
        if not trace.is_consistent():
            problems.append("inconsistent trace")
        data = {
            "elements": [m.n_elements for m in meshes],
            "marked": [r.n_marked for r in trace.records],
            "lambda0": trace.lambda0,
            "stopped_by": trace.stopped_by,
            "star_constant": strategy.options.get("star_constant"),
        }
        if problems:
            return AuditResult(success=False, data=data, error="; ".join(problems[:5]))
        return AuditResult(success=True, data=data)
