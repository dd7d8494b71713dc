import logging
from typing import Optional, Sequence

from fraclap import __version__
from fraclap.commands.models import AuditReport
from fraclap.commands.output import write_json
from fraclap.core.audits import audit_registry
from fraclap.core.exceptions import ConfigError

logger = logging.getLogger(__name__)

REPORT_NAME = "audits_report.json"


def run_audits(settings, mesh_path: Optional[str] = None, only: Optional[Sequence[str]] = None) -> AuditReport:
    """Run the registered audits and write a JSON report; a mesh file restricts the run to conformity."""
    if mesh_path:
        only = ["conformity"]
    audits = audit_registry.get_all_audits()
    if only:
        unknown = sorted(set(only) - {a.key for a in audits})
        if unknown:
            raise ConfigError(f"Unknown audits {unknown}, expected some of {[a.key for a in audits]}")
        audits = [a for a in audits if a.key in only]

    results = {}
    for audit in audits:
        logger.info(f"Running audit {audit.key}: {audit.description}")
        results[audit.key] = audit.check(settings, mesh_path=mesh_path)

    report = AuditReport(
        success=all(r.success for r in results.values()),
        version=__version__,
        config_hash=settings.config_hash(),
        seed=settings.seed,
        results=results,
    )
    write_json(settings, REPORT_NAME, report.model_dump())
    if report.success:
        logger.info(f"All {len(results)} audits passed")
    else:
        logger.error(f"Failed audits: {report.failed}")
    return report
