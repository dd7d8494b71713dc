from typing import Any, Dict, List, Optional

from pydantic import BaseModel, field_validator

from fraclap.core.audits import AuditResult

RATES_COLUMNS = ("step", "n_elements", "dofs", "error", "slope", "cumulative_marked", "seconds")


class ConvergenceRecord(BaseModel):
    step: int
    n_elements: int
    dofs: int
    error: float
    slope: Optional[float] = None
    cumulative_marked: int = 0
    seconds: float = 0.0

    @field_validator("error")
    @classmethod
    def _check_error(cls, value: float) -> float:
        if value < 0.0:
            raise ValueError("energy errors are non-negative")
        return value

    def as_row(self) -> tuple:
        return (self.step, self.n_elements, self.dofs, self.error,
                "" if self.slope is None else self.slope, self.cumulative_marked, self.seconds)


class RatesOutcome(BaseModel):
    s: float
    records: List[ConvergenceRecord]
    reference: str
    partial: bool = False
    final_slope: Optional[float] = None
    lambda0: Optional[float] = None
    csv_path: str = ""
    trace_path: str = ""

    @field_validator("records")
    @classmethod
    def _check_increasing(cls, records: List[ConvergenceRecord]) -> List[ConvergenceRecord]:
        for a, b in zip(records, records[1:]):
            if b.n_elements <= a.n_elements:
                raise ValueError("element counts must increase strictly")
        return records


class AuditReport(BaseModel):
    success: bool
    version: str
    config_hash: str
    seed: int
    results: Dict[str, AuditResult]

    @property
    def failed(self) -> List[str]:
        return [name for name, result in self.results.items() if not result.success]


class SolveSummary(BaseModel):
    s: float
    domain: str
    n_elements: int
    dofs: int
    energy: float
    residual: float
    method: str
    solution_path: str
    checks: Dict[str, Any] = {}
