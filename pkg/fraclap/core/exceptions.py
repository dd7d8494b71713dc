from typing import Optional, Tuple


class FraclapError(Exception):
    """Base class for all library errors."""


class ConfigError(FraclapError, ValueError):
    pass


class MeshError(FraclapError, ValueError):
    pass


class NonConformingMeshError(MeshError):

    def __init__(self, message: str, edge: Optional[Tuple[int, ...]] = None):
        super().__init__(message)
        self.edge = edge


class StarConstantError(MeshError):

    def __init__(self, message: str, minimal_constant: float):
        super().__init__(message)
        self.minimal_constant = minimal_constant


class QuadratureError(FraclapError, ValueError):
    pass


class AssemblyError(FraclapError, RuntimeError):
    pass


class SolverError(FraclapError, RuntimeError):

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NestingError(FraclapError, ValueError):
    pass


class SeminormDivergenceError(FraclapError, ArithmeticError):

    def __init__(self, message: str, previous: float, last: float):
        super().__init__(message)
        self.previous = previous
        self.last = last
