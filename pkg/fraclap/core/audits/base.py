import json
import logging
import os
import time
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional

from pydantic import BaseModel

from fraclap.core.exceptions import FraclapError

logger = logging.getLogger(__name__)

SCHEMA_DIR = os.path.join(os.path.dirname(__file__), "schemas")


class AuditResult(BaseModel):
    success: bool
    data: Optional[Any] = None
    error: Optional[str] = None
    metadata: Optional[Dict[str, Any]] = None


class BaseAudit(ABC):
    """A property check with its thresholds read from schemas/<name>.json."""

    def __init__(self):
        self.name = self.__class__.__name__
        self.key = self.name.replace("Audit", "").lower()
        self._load_schema()

    def _load_schema(self):
        schema_path = os.path.join(SCHEMA_DIR, f"{self.key}.json")
        if os.path.exists(schema_path):
            with open(schema_path, "r") as f:
                schema = json.load(f)
            self.description = schema.get("description", "")
            self.thresholds: Dict[str, Any] = schema.get("thresholds", {})
            self._schema_data = schema
            return
        logger.warning(f"No schema for audit {self.name} at {schema_path}")
        self.description = self.__doc__ or "No description available"
        self.thresholds = {}
        self._schema_data = {}

    @abstractmethod
    def run(self, settings, **kwargs) -> AuditResult:
        pass

    def check(self, settings, **kwargs) -> AuditResult:
        """Run the audit; library errors become a failed result instead of propagating."""
        started = time.perf_counter()
        try:
            result = self.run(settings, **kwargs)
        except (FraclapError, ArithmeticError) as e:
            logger.error(f"Audit {self.key} raised: {e}")
            result = AuditResult(success=False, error=f"{type(e).__name__}: {e}")
        metadata = dict(result.metadata or {})
        metadata.update({"audit": self.key, "thresholds": self.thresholds,
                         "seconds": round(time.perf_counter() - started, 3)})
        result.metadata = metadata
        verdict = "passed" if result.success else f"FAILED ({result.error})"
        logger.info(f"Audit {self.key} {verdict}")
        return result

    def get_schema(self) -> Dict[str, Any]:
        return {"name": self.key, "description": self.description, "thresholds": self.thresholds}


class AuditRegistry:

    def __init__(self):
        self._audits: Dict[str, BaseAudit] = {}

    def register(self, audit: BaseAudit):
        self._audits[audit.key] = audit

    def get_audit(self, name: str) -> Optional[BaseAudit]:
        return self._audits.get(name)

    def get_all_audits(self) -> List[BaseAudit]:
        return list(self._audits.values())

    def get_audit_schemas(self) -> List[Dict[str, Any]]:
        return [audit.get_schema() for audit in self._audits.values()]


audit_registry = AuditRegistry()


def register_audit(audit: BaseAudit):
    audit_registry.register(audit)
