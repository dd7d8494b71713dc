import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Tuple, Type

import numpy as np
from scipy import integrate

from fraclap.core.exceptions import ConfigError
from fraclap.core.mesh.geometry import Domain, closest_boundary_points, signed_boundary_distance
from fraclap.core.solution import closed_form_ball

logger = logging.getLogger(__name__)


def _points(points: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(points, dtype=float).reshape(-1, dim)


class ModelFunction(ABC):
    """A function with a closed form, evaluated on arrays of points (n, d)."""

    name = "model"

    def __init__(self, dim: int = 1, **parameters):
        self.dim = dim
        self.parameters: Dict[str, Any] = dict(parameters)

    @abstractmethod
    def __call__(self, points: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def gradient(self, points: np.ndarray) -> np.ndarray:
        pass

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        """Points of the real line where a one-dimensional model is not smooth."""
        return ()

    def derivative_norm(self, p: float, a: float, b: float) -> float:
        """||v'||_{L^p(a, b)} for one-dimensional models."""
        if self.dim != 1:
            raise ConfigError(f"derivative_norm needs a one-dimensional model, {self.name} has d = {self.dim}")
        cuts = sorted({a, b, *(c for c in self.breakpoints if a < c < b)})
        total = 0.0
        for left, right in zip(cuts[:-1], cuts[1:]):
            value, _ = integrate.quad(
                lambda x: abs(float(self.gradient(np.array([[x]]))[0, 0])) ** p, left, right, limit=200
            )
            total += value
        return total ** (1.0 / p)

    def describe(self) -> Dict[str, Any]:
        return {"name": self.name, "dim": self.dim, **self.parameters}


class PowerModel(ModelFunction):
    """(x - origin)_+^exponent."""

    name = "power"

    def __init__(self, exponent: float = 0.5, origin: float = 0.0):
        super().__init__(1, exponent=exponent, origin=origin)
        self.exponent = exponent
        self.origin = origin

    def __call__(self, points):
        x = _points(points, 1)[:, 0] - self.origin
        return np.where(x > 0.0, np.abs(x) ** self.exponent, 0.0)

    def gradient(self, points):
        x = _points(points, 1)[:, 0] - self.origin
        safe = np.where(x > 0.0, x, 1.0)
        return np.where(x > 0.0, self.exponent * safe ** (self.exponent - 1.0), 0.0)[:, None]

    @property
    def breakpoints(self):
        return (self.origin,)


class HatModel(ModelFunction):
    name = "hat"

    def __init__(self, a: float = 0.0, b: float = 1.0):
        super().__init__(1, a=a, b=b)
        self.a, self.b = a, b
        self.peak = 0.5 * (a + b)

    def __call__(self, points):
        x = _points(points, 1)[:, 0]
        return np.clip(1.0 - np.abs(2.0 * (x - self.peak) / (self.b - self.a)), 0.0, None)

    def gradient(self, points):
        x = _points(points, 1)[:, 0]
        slope = 2.0 / (self.b - self.a)
        inside = (x > self.a) & (x < self.b)
        return np.where(inside, -slope * np.sign(x - self.peak), 0.0)[:, None]

    @property
    def breakpoints(self):
        return (self.a, self.peak, self.b)


class BumpModel(ModelFunction):
    """exp(1 - 1/(1 - t^2)) with t the affine image of (a, b) onto (-1, 1)."""

    name = "bump"

    def __init__(self, a: float = 0.0, b: float = 1.0):
        super().__init__(1, a=a, b=b)
        self.a, self.b = a, b

    def _t(self, points):
        x = _points(points, 1)[:, 0]
        return (2.0 * x - self.a - self.b) / (self.b - self.a)

    def __call__(self, points):
        t = self._t(points)
        inside = np.abs(t) < 1.0
        gap = np.where(inside, 1.0 - t * t, 1.0)
        return np.where(inside, np.exp(1.0 - 1.0 / gap), 0.0)

    def gradient(self, points):
        t = self._t(points)
        inside = np.abs(t) < 1.0
        gap = np.where(inside, 1.0 - t * t, 1.0)
        dt = -2.0 * t / gap ** 2 * np.exp(1.0 - 1.0 / gap) * 2.0 / (self.b - self.a)
        return np.where(inside, dt, 0.0)[:, None]

    @property
    def breakpoints(self):
        return (self.a, self.b)


class LinearModel(ModelFunction):
    name = "linear"

    def __init__(self, slope: float = 1.0, intercept: float = 0.0, dim: int = 1):
        super().__init__(dim, slope=slope, intercept=intercept)
        self.slope, self.intercept = slope, intercept

    def __call__(self, points):
        return self.slope * _points(points, self.dim)[:, 0] + self.intercept

    def gradient(self, points):
        grad = np.zeros((len(_points(points, self.dim)), self.dim))
        grad[:, 0] = self.slope
        return grad


class ConstantModel(ModelFunction):
    name = "constant"

    def __init__(self, value: float = 1.0, dim: int = 1):
        super().__init__(dim, value=value)
        self.value = value

    def __call__(self, points):
        return np.full(len(_points(points, self.dim)), float(self.value))

    def gradient(self, points):
        return np.zeros((len(_points(points, self.dim)), self.dim))


class QuadraticModel(ModelFunction):
    """Product of (x_i - a)(b - x_i) over the coordinates."""

    name = "quadratic"

    def __init__(self, a: float = 0.0, b: float = 1.0, dim: int = 1):
        super().__init__(dim, a=a, b=b)
        self.a, self.b = a, b

    def __call__(self, points):
        x = _points(points, self.dim)
        return np.prod((x - self.a) * (self.b - x), axis=1)

    def gradient(self, points):
        x = _points(points, self.dim)
        factors = (x - self.a) * (self.b - x)
        grad = np.empty_like(x)
        for i in range(self.dim):
            others = np.prod(np.delete(factors, i, axis=1), axis=1) if self.dim > 1 else 1.0
            grad[:, i] = (self.a + self.b - 2.0 * x[:, i]) * others
        return grad


class ClosedFormModel(ModelFunction):
    """K(d, s)(1 - |x|^2)_+^s, the solution for f = 1 on the unit ball."""

    name = "closed_form"

    def __init__(self, s: float = 0.5, dim: int = 1):
        super().__init__(dim, s=s)
        self.s = s
        self._exact = closed_form_ball(dim, s)

    def __call__(self, points):
        return self._exact(_points(points, self.dim))

    def gradient(self, points):
        x = _points(points, self.dim)
        w = 1.0 - (x ** 2).sum(axis=1)
        safe = np.where(w > 0.0, w, 1.0)
        factor = np.where(w > 0.0, -2.0 * self.s * self._exact.constant * safe ** (self.s - 1.0), 0.0)
        return factor[:, None] * x

    @property
    def breakpoints(self):
        return (-1.0, 1.0)


class BoundaryLayerModel(ModelFunction):
    """dist(x, boundary)^s inside the domain and zero outside.

    Distances below ``floor`` are raised to it when evaluating the gradient.
    """

    name = "boundary_layer"

    def __init__(self, domain: Domain, s: float = 0.5, floor: float = 1e-6):
        super().__init__(domain.dim, domain=domain.name, s=s, floor=floor)
        self.domain = domain
        self.s = s
        self.floor = floor

    def __call__(self, points):
        delta = signed_boundary_distance(self.domain, _points(points, self.dim))
        return np.clip(delta, 0.0, None) ** self.s

    def gradient(self, points):
        x = _points(points, self.dim)
        delta = signed_boundary_distance(self.domain, x)
        direction = x - closest_boundary_points(self.domain, x)
        norm = np.linalg.norm(direction, axis=1)
        unit = direction / np.where(norm > 0.0, norm, 1.0)[:, None]
        magnitude = self.s * np.maximum(delta, self.floor) ** (self.s - 1.0)
        return np.where((delta > 0.0)[:, None], magnitude[:, None] * unit, 0.0)

    @property
    def breakpoints(self):
        if self.dim == 1:
            return tuple(v[0] for v in self.domain.vertices)
        return ()


class ModelRegistry:

    def __init__(self):
        self._models: Dict[str, Type[ModelFunction]] = {}

    def register(self, model_class: Type[ModelFunction]):
        self._models[model_class.name] = model_class

    def get_model(self, name: str) -> Optional[Type[ModelFunction]]:
        return self._models.get(name)

    def create(self, name: str, **parameters) -> ModelFunction:
        model_class = self._models.get(name)
        if model_class is None:
            raise ConfigError(f"Unknown model function '{name}', expected one of {self.available()}")
        try:
            return model_class(**parameters)
        except TypeError as e:
            raise ConfigError(f"Bad parameters for model '{name}': {e}") from e

    def available(self) -> List[str]:
        return sorted(self._models)


model_registry = ModelRegistry()


def register_model(model_class: Type[ModelFunction]):
    model_registry.register(model_class)


for _model in (PowerModel, HatModel, BumpModel, LinearModel, ConstantModel, QuadraticModel,
               ClosedFormModel, BoundaryLayerModel):
    register_model(_model)
