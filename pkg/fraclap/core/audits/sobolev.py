import logging
import math

from fraclap.core.assembly import AssemblyConfig
from fraclap.core.audits.base import AuditResult, BaseAudit
from fraclap.core.mesh import make_domain, make_initial_mesh
from fraclap.core.sobolev import (
    bbm_limit_check,
    distance_power_integral,
    gradient_blowup,
    localization_study,
    regularity_blowup,
)
from fraclap.core.sobolev.audits import gradient_power_exact
from fraclap.core.sobolev.models import model_registry

logger = logging.getLogger(__name__)


def _slope_ok(slope, target: float, tolerance: float) -> bool:
    return slope is not None and abs(slope - target) <= tolerance


class LocalizationAudit(BaseAudit):
    """Random discrete functions on nested refinements; the empirical constant must stay stable."""

    def run(self, settings, **kwargs) -> AuditResult:
        th = self.thresholds
        mesh0 = make_initial_mesh(make_domain(th.get("domain", "square")), float(th.get("target_h", 1.0)))
        study = localization_study(
            mesh0, float(th.get("s", 0.5)), levels=int(th.get("levels", 4)), samples=int(th.get("samples", 25)),
            seed=settings.seed, sweeps=int(th.get("sweeps", 2)), config=AssemblyConfig.from_settings(settings),
        )
        data = {"elements": list(study.levels), "ratio_star": list(study.level_constants),
                "spread": study.spread, "violations": study.violations}
        max_spread = float(th.get("max_spread", 2.0))
        if study.spread >= max_spread or study.violations:
            return AuditResult(success=False, data=data,
                               error=f"ratio* spread {study.spread:.3f}, {study.violations} violations")
        return AuditResult(success=True, data=data)


class BBMAudit(BaseAudit):

    def run(self, settings, **kwargs) -> AuditResult:
        th = self.thresholds
        p = float(th.get("p", 2.0))
        epsilons = th.get("epsilons", [0.2, 0.1, 0.05, 0.02])
        tolerance = float(th.get("ratio_tolerance", 0.1))
        budget = dict(budget=settings.seminorm_budget, max_budget=settings.seminorm_max_budget,
                      grading_ratio=settings.grading_ratio)

        hat = bbm_limit_check(model_registry.create("hat"), p, epsilons, **budget)
        bump = bbm_limit_check(model_registry.create("bump"), p, epsilons, **budget)
        data = {
            "hat": [[r.epsilon, r.seminorm, r.derivative_norm, r.ratio] for r in hat],
            "bump": [[r.epsilon, r.seminorm, r.derivative_norm, r.ratio] for r in bump],
        }
        failures = []
        if abs(hat[-1].ratio - 1.0) > tolerance:
            failures.append(f"hat ratio {hat[-1].ratio:.4f} at eps={hat[-1].epsilon}")
        gaps = [abs(r.ratio - 1.0) for r in bump]
        if any(b > a for a, b in zip(gaps, gaps[1:])):
            failures.append(f"bump ratios not approaching 1: {[round(r.ratio, 4) for r in bump]}")
        if failures:
            return AuditResult(success=False, data=data, error="; ".join(failures))
        return AuditResult(success=True, data=data)


class RegularityAudit(BaseAudit):

    def run(self, settings, **kwargs) -> AuditResult:
        th = self.thresholds
        table = regularity_blowup(
            float(th.get("s", 0.25)), float(th.get("p", 2.0)), th.get("r_grid", [0.55, 0.65, 0.70, 0.73]),
            budget=settings.seminorm_budget, max_budget=settings.seminorm_max_budget,
            grading_ratio=settings.grading_ratio,
        )
        data = {"rows": [[r.parameter, r.value, r.factor, r.budget, r.converged] for r in table.rows],
                "slope": table.slope, "partial": table.partial}
        if table.partial:
            return AuditResult(success=False, data=data, error="Seminorm budget exhausted, partial table")
        if not _slope_ok(table.slope, float(th.get("slope", 1.0)), float(th.get("slope_tolerance", 0.2))):
            return AuditResult(success=False, data=data, error=f"Fitted blow-up slope {table.slope}")
        return AuditResult(success=True, data=data)


class GradientBlowupAudit(BaseAudit):

    def run(self, settings, **kwargs) -> AuditResult:
        th = self.thresholds
        s = float(th.get("s", 0.5))
        table = gradient_blowup(s, th.get("p_grid", [1.5, 1.8, 1.9, 1.95]))
        exact_errors = [abs(r.value / gradient_power_exact(s, r.parameter) - 1.0) for r in table.rows]
        data = {"rows": [[r.parameter, r.value, r.factor] for r in table.rows], "slope": table.slope,
                "exact_errors": exact_errors}
        failures = []
        if max(exact_errors) > float(th.get("exact_tolerance", 1e-6)):
            failures.append(f"quadrature off the Beta closed form by {max(exact_errors):.2e}")
        if not _slope_ok(table.slope, float(th.get("slope", 1.0)), float(th.get("slope_tolerance", 0.2))):
            failures.append(f"Fitted blow-up slope {table.slope}")
        if failures:
            return AuditResult(success=False, data=data, error="; ".join(failures))
        return AuditResult(success=True, data=data)


class DistancePowerAudit(BaseAudit):

    def run(self, settings, **kwargs) -> AuditResult:
        th = self.thresholds
        domain = make_domain(th.get("domain", "lshape"))
        scaled = {}
        for alpha in th.get("alphas", [0.5, 0.9, 0.99]):
            value = distance_power_integral(domain, alpha)
            scaled[alpha] = value * (1.0 - alpha)
        spread = max(scaled.values()) / min(scaled.values())
        data = {"scaled": scaled, "spread": spread}
        if not math.isfinite(spread) or spread > float(th.get("max_spread", 3.0)):
            return AuditResult(success=False, data=data, error=f"(1 - alpha) integral spread {spread:.3f}")
        return AuditResult(success=True, data=data)
