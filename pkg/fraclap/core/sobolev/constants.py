"""Normalizing constants and index bookkeeping for fractional Sobolev spaces."""
import math
from dataclasses import dataclass

from scipy.special import gamma

from fraclap.core.assembly.stiffness import lambda_constant
from fraclap.core.exceptions import ConfigError, QuadratureError


def sphere_moment(d: int, p: float) -> float:
    """Integral of |w . e1|^p over the unit sphere in R^d."""
    return 2.0 * math.pi ** (0.5 * (d - 1)) * gamma(0.5 * (p + 1.0)) / gamma(0.5 * (d + p))


def scaling_constant(sigma: float, d: int, p: float) -> float:
    """Lambda(sigma, d, p) in front of the Gagliardo double integral.

    p = 2 gives Lambda(d, sigma)/2 exactly. Otherwise the quadratic blend
    sigma (1 - sigma) [(1 - sigma) c0 + sigma c1] is used; it behaves like
    sigma c0 as sigma -> 0 and like (1 - sigma) c1 as sigma -> 1.
    """
    if not 0.0 < sigma < 1.0:
        raise QuadratureError(f"sigma = {sigma} outside (0, 1)")
    if p <= 1.0:
        raise QuadratureError(f"p = {p} must exceed 1")
    if p == 2.0:
        return 0.5 * lambda_constant(d, sigma)
    c0 = p * gamma(0.5 * d) / (4.0 * math.pi ** (0.5 * d))
    c1 = p / sphere_moment(d, p)
    return sigma * (1.0 - sigma) * ((1.0 - sigma) * c0 + sigma * c1)


def sobolev_number(t: float, p: float, d: int) -> float:
    return t - d / p


@dataclass(frozen=True)
class OptimalIndices:
    d: int
    s: float
    epsilon: float
    p: float
    r: float
    lam: float
    epsilon_bound: float
    epsilon_max: float
    rate: float

    @property
    def admissible(self) -> bool:
        return 0.0 < self.epsilon < self.epsilon_max and self.lam > self.epsilon_bound


def optimal_indices(d: int, s: float, epsilon: float) -> OptimalIndices:
    """Integrability p = 2(d-1)/d, differentiability r = s + 1/p and the weight exponent lambda."""
    if d < 2:
        raise ConfigError(f"Optimal indices need d >= 2, got d = {d}")
    if not 0.0 < s < 1.0:
        raise ConfigError(f"s = {s} outside (0, 1)")
    p = 2.0 * (d - 1) / d
    lam = 1.0 / p - epsilon - d / (p + epsilon) + 0.5 * d
    return OptimalIndices(
        d=d,
        s=s,
        epsilon=epsilon,
        p=p,
        r=s + 1.0 / p,
        lam=lam,
        epsilon_bound=epsilon * (3.0 * d ** 3 / (16.0 * (d - 1) ** 2) - 1.0),
        epsilon_max=2.0 * (d - 1) / (3.0 * d),
        rate=-1.0 / (2.0 * (d - 1)),
    )
