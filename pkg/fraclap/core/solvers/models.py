from typing import Any, Dict, Optional

from pydantic import BaseModel


class SolveResult(BaseModel):
    coefficients: Any
    method: str
    n: int
    residual: float
    iterations: Optional[int] = None
    seconds: float = 0.0
    diagnostics: Optional[Dict[str, Any]] = None

    class Config:
        arbitrary_types_allowed = True
