import logging
from typing import Dict, Optional

from fraclap.commands.output import metadata_header, output_path
from fraclap.core.exceptions import ConfigError
from fraclap.core.mesh import make_domain
from fraclap.core.sobolev import (
    Region,
    SeminormQuery,
    bbm_limit_check,
    distance_power_integral,
    evaluate,
    gradient_blowup,
    regularity_blowup,
)
from fraclap.core.sobolev.models import model_registry
from fraclap.core.utils.tables import write_table

logger = logging.getLogger(__name__)

STUDIES = ("value", "bbm", "regularity", "gradient", "distance")
REGIONS = ("domain", "zero_extension", "half_line")


def parse_parameters(items) -> Dict[str, object]:
    """key=value strings to model parameters; numbers are converted."""
    parameters: Dict[str, object] = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"Model parameter '{item}' is not of the form key=value")
        try:
            parameters[key.strip()] = int(value) if value.strip().lstrip("-").isdigit() else float(value)
        except ValueError:
            parameters[key.strip()] = value.strip()
    return parameters


def _region(kind: str, a: float, b: float) -> Region:
    if kind == "domain":
        return Region.interval(a, b)
    if kind == "zero_extension":
        return Region.interval(a, b, zero_extension=True)
    if kind == "half_line":
        return Region.half_line(a, b)
    raise ConfigError(f"Unknown region '{kind}', expected one of {REGIONS}")


def run_seminorm(settings, study: str = "value", model: str = "power", parameters: Optional[dict] = None,
                 sigma: float = 0.5, p: float = 2.0, region: str = "domain", a: float = 0.0, b: float = 1.0) -> str:
    """Evaluate one seminorm or one of the tabulated studies; returns the CSV path."""
    budget = dict(budget=settings.seminorm_budget, max_budget=settings.seminorm_max_budget,
                  grading_ratio=settings.grading_ratio)
    path = output_path(settings, f"seminorm_{study}.csv")

    if study == "value":
        target = model_registry.create(model, **(parameters or {}))
        query = SeminormQuery(target=target, sigma=sigma, p=p, region=_region(region, a, b), **budget)
        result = evaluate(query)
        logger.info(f"|{model}|_(W^{sigma}_{p}) on {region} ({a}, {b}) = {result.value:.10g} at budget {result.budget}")
        header = metadata_header(settings, model=model, parameters=parameters or {}, sigma=sigma, p=p,
                                 region=region, a=a, b=b)
        return write_table(path, ("value", "power", "budget", "previous"),
                           [(result.value, result.integral, result.budget,
                             "" if result.previous is None else result.previous)], header)

    if study == "bbm":
        target = model_registry.create(model, **(parameters or {}))
        rows = bbm_limit_check(target, p, a=a, b=b, **budget)
        return write_table(path, ("epsilon", "seminorm", "derivative_norm", "ratio"),
                           [(r.epsilon, r.seminorm, r.derivative_norm, r.ratio) for r in rows],
                           metadata_header(settings, model=model, p=p, a=a, b=b))

    if study == "regularity":
        s = settings.s_list[0]
        threshold = min(s + 1.0 / p, 1.0)
        grid = [s + f * (threshold - s) for f in (0.6, 0.8, 0.9, 0.95)]
        table = regularity_blowup(s, p, grid, **budget)
        return write_table(path, ("r", "seminorm_p", "factor", "budget", "converged"),
                           [(r.parameter, r.value, r.factor, r.budget, r.converged) for r in table.rows],
                           metadata_header(settings, s=s, p=p, slope=table.slope, partial=table.partial))

    if study == "gradient":
        s = settings.s_list[0]
        limit = 1.0 / (1.0 - s)
        grid = [1.0 + f * (limit - 1.0) for f in (0.5, 0.8, 0.9, 0.95)]
        table = gradient_blowup(s, grid)
        return write_table(path, ("p", "integral", "factor"),
                           [(r.parameter, r.value, r.factor) for r in table.rows],
                           metadata_header(settings, s=s, slope=table.slope))

    if study == "distance":
        domain = make_domain(settings.domain, settings.disk_sides)
        alphas = (0.5, 0.9, 0.99)
        rows = []
        for alpha in alphas:
            value = distance_power_integral(domain, alpha)
            rows.append((alpha, value, value * (1.0 - alpha)))
        return write_table(path, ("alpha", "integral", "scaled"), rows, metadata_header(settings))

    raise ConfigError(f"Unknown study '{study}', expected one of {STUDIES}")
