import hashlib
import json
import logging
import os
from typing import Dict, List, Optional

from dotenv import dotenv_values
from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings

from fraclap.core.exceptions import ConfigError
from fraclap.core.functions import parse_expression

logger = logging.getLogger(__name__)

DOMAINS = ("lshape", "square", "unit_square", "interval", "disk_polygon")
COMMANDS = ("rates", "audits", "solve", "seminorm", "mesh-refine")
ENV_PREFIX = "FRACLAP_"


class Settings(BaseSettings):
    command: str = Field(default="rates", description="CLI command the file is meant for")
    domain: str = Field(default="lshape", description="Domain preset")
    target_h: float = Field(default=1.0, description="Initial mesh size")
    disk_sides: int = Field(default=64, description="Number of sides of the disk polygon")
    s_values: str = Field(default="0.25,0.5,0.75", description="Comma separated fractional orders")
    f: str = Field(default="1", description="Right-hand side expression in x, y")
    theta: float = Field(default=2.0, description="Marking parameter of the practical rule")
    cap: int = Field(default=8000, description="Maximal number of elements of the adaptive sequence")
    hard_cap: int = Field(default=200000, description="Abort threshold for runaway refinement")
    time_max: float = Field(default=2700.0, description="Wall time budget per run in seconds")
    out: str = Field(default="results", description="Output directory")
    seed: int = Field(default=0, description="Seed for randomized audits")
    fine_sweeps: int = Field(default=2, description="Uniform sweeps beyond the finest adaptive mesh")
    record_timings: bool = Field(default=False, description="Write wall times into CSV outputs")

    quad_order: int = Field(default=5, description="Gauss points per transformed coordinate, near pairs")
    far_order: int = Field(default=2, description="Gauss points per coordinate, far field")
    tail_order: int = Field(default=3, description="Gauss points per coordinate, graded tail rule")
    near_factor: float = Field(default=2.0, description="Near-pair radius in units of element diameter")
    disjoint_depth: int = Field(default=2, description="Subdivision depth for close disjoint pairs")
    tail_radius_factor: float = Field(default=2.0, description="Auxiliary ball radius over domain diameter")
    tail_angular_nodes: int = Field(default=64, description="Trapezoid nodes of the far-field rule")
    tail_grading_levels: int = Field(default=6, description="Grading depth of boundary elements")

    max_workers: int = Field(default=4, description="Worker threads for assembly and marking")
    block_size: int = Field(default=256, description="Far-field block size in quadrature points")
    memory_budget_mb: float = Field(default=4096.0, description="Upper bound for the dense matrix")
    dump_system: bool = Field(default=False, description="Write (A, b) next to solutions")

    dense_threshold: int = Field(default=6000, description="Largest system factorized densely")
    solver_tol: float = Field(default=1e-10, description="Relative residual tolerance")
    cg_maxiter: int = Field(default=20000, description="Conjugate gradient iteration cap")

    star_constant: float = Field(default=4.0, description="Extended star ball constant C")
    seminorm_epsilon: float = Field(default=0.1, description="Exponent slack of the seminorm indicator")
    seminorm_c0: float = Field(default=1.0, description="Indicator constant C0")
    seminorm_delta: float = Field(default=0.05, description="GREEDY tolerance for the seminorm indicator")

    seminorm_budget: int = Field(default=32, description="Initial grading depth of 1D seminorms")
    seminorm_max_budget: int = Field(default=480, description="Largest grading depth of 1D seminorms")
    grading_ratio: float = Field(default=0.25, description="Geometric grading ratio of 1D seminorms")

    log_level: str = Field(default="INFO", description="Logging level")

    class Config:
        env_prefix = ENV_PREFIX
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False
        extra = "ignore"

    @field_validator("domain")
    @classmethod
    def _check_domain(cls, value: str) -> str:
        value = value.strip().lower().replace("-", "_")
        if value not in DOMAINS:
            raise ValueError(f"unknown domain '{value}', expected one of {DOMAINS}")
        return value

    @field_validator("command")
    @classmethod
    def _check_command(cls, value: str) -> str:
        if value not in COMMANDS:
            raise ValueError(f"unknown command '{value}', expected one of {COMMANDS}")
        return value

    @field_validator("s_values")
    @classmethod
    def _check_s_values(cls, value: str) -> str:
        parts = [p for p in str(value).replace(";", ",").split(",") if p.strip()]
        if not parts:
            raise ValueError("at least one s value is required")
        for part in parts:
            s = float(part)
            if not 0.0 < s < 1.0:
                raise ValueError(f"s = {s} outside (0, 1)")
        return ",".join(p.strip() for p in parts)

    @field_validator("theta")
    @classmethod
    def _check_theta(cls, value: float) -> float:
        if value <= 1.0:
            raise ValueError("theta must exceed 1")
        return value

    @field_validator("cap", "hard_cap", "time_max", "target_h", "max_workers", "block_size")
    @classmethod
    def _check_positive(cls, value):
        if value <= 0:
            raise ValueError("must be positive")
        return value

    @field_validator("quad_order", "far_order", "tail_order")
    @classmethod
    def _check_order(cls, value: int) -> int:
        if not 1 <= value <= 40:
            raise ValueError("quadrature orders must lie in [1, 40]")
        return value

    @field_validator("f")
    @classmethod
    def _check_source(cls, value: str) -> str:
        parse_expression(value)
        return value

    @property
    def s_list(self) -> List[float]:
        return [float(p) for p in self.s_values.split(",")]

    def config_hash(self) -> str:
        payload = json.dumps(self.model_dump(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def read_experiment_file(path: str) -> Dict[str, Optional[str]]:
    if not os.path.exists(path):
        raise ConfigError(f"Experiment file not found: {path}")
    return dotenv_values(path)


def _file_values(path: str) -> Dict[str, str]:
    """Experiment file entries not already set through the environment."""
    values = {}
    for key, value in read_experiment_file(path).items():
        if value is None or f"{ENV_PREFIX}{key.upper()}" in os.environ:
            continue
        values[key.lower()] = value
    return values


def load_settings(path: Optional[str] = None, **overrides) -> Settings:
    """Build settings from an optional key=value file plus explicit overrides."""
    overrides = {k: v for k, v in overrides.items() if v is not None}
    values: Dict[str, str] = {}
    if path is not None:
        values = _file_values(path)
        logger.info(f"Loaded experiment file {path} with keys {sorted(values)}")
    unknown = sorted((set(values) | set(overrides)) - set(Settings.model_fields))
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {unknown}")
    try:
        return Settings(**{**values, **overrides})
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings


def set_settings(settings: Settings) -> None:
    global _settings
    _settings = settings
