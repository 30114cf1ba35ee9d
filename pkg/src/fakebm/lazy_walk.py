"""Exact law of the lazy +/-1 walk and its diffusively scaled embedding.

One step of the walk is ζ with P(ζ = ±1) = 1/4 and P(ζ = 0) = 1/2, i.e. the
mean of two fair coin flips, so after l steps the position j has probability
2^(-2l) C(2l, l + j).  That law satisfies the discrete heat equation with
one-quarter weights, and the one-step mass ratio at a fixed site has the
closed form implemented by ratio_check below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

__all__ = [
    "increment_pmf",
    "LazyWalkPmf",
    "pmf",
    "pmf_value",
    "heat_step_residual",
    "ratio_check",
    "scaled_marginal",
]

# Beyond this many steps the exact binomials are converted in log space; below
# it each float mass is the correctly rounded value of the exact rational.
_EXACT_FLOAT_LIMIT = 2000


def increment_pmf() -> dict[int, Fraction]:
    """One-step law: P(-1) = P(+1) = 1/4, P(0) = 1/2."""
    return {-1: Fraction(1, 4), 0: Fraction(1, 2), 1: Fraction(1, 4)}


@dataclass(frozen=True)
class LazyWalkPmf:
    """Law of the lazy walk after a fixed number of steps.

    mass is indexed by j + steps for j in [-steps, steps]; rational backend
    stores Fractions, float backend float64.
    """

    steps: int
    backend: str
    mass: tuple

    def prob(self, j: int):
        if abs(j) > self.steps:
            return Fraction(0) if self.backend == "rational" else 0.0
        return self.mass[j + self.steps]

    @property
    def support(self) -> range:
        return range(-self.steps, self.steps + 1)

    def total(self):
        return sum(self.mass)

    def variance(self):
        """Sum of j^2 * mass(j); equals steps / 2 exactly."""
        return sum(j * j * p for j, p in zip(self.support, self.mass))

    def to_float_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.mass], dtype=float)


def pmf_value(steps: int, j: int) -> Fraction:
    """Exact mass 2^(-2l) C(2l, l + j) at site j after l = steps steps."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if abs(j) > steps:
        return Fraction(0)
    return Fraction(math.comb(2 * steps, steps + j), 4**steps)


def pmf(steps: int, backend: str = "rational") -> LazyWalkPmf:
    """Full law after `steps` steps in the requested backend."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if backend == "rational":
        mass = tuple(pmf_value(steps, j) for j in range(-steps, steps + 1))
    elif backend == "float":
        if steps <= _EXACT_FLOAT_LIMIT:
            mass = tuple(float(pmf_value(steps, j)) for j in range(-steps, steps + 1))
        else:
            js = np.arange(-steps, steps + 1)
            logs = (
                gammaln(2 * steps + 1)
                - gammaln(steps + js + 1)
                - gammaln(steps - js + 1)
                - 2 * steps * math.log(2.0)
            )
            mass = tuple(np.exp(logs))
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return LazyWalkPmf(steps=steps, backend=backend, mass=mass)


def heat_step_residual(steps: int, j: int) -> Fraction:
    """Exact residual of the discrete heat equation at (steps, j).

    mass(l+1, j) - mass(l, j) - [mass(l, j-1)/4 + mass(l, j+1)/4 - mass(l, j)/2],
    identically zero because one step convolves with the increment law.
    """
    if abs(j) > steps:
        raise ValueError("site outside the support")
    return (
        pmf_value(steps + 1, j)
        - pmf_value(steps, j)
        - (
            pmf_value(steps, j - 1) / 4
            + pmf_value(steps, j + 1) / 4
            - pmf_value(steps, j) / 2
        )
    )


def ratio_check(steps: int, j: int) -> Fraction:
    """One-step mass ratio mass(l, j) / mass(l + 1, j) at a fixed site.

    Closed form 2 ((l+1)^2 - j^2) / ((2l+1) (l+1)); it exceeds 1 exactly when
    l >= 2 j^2, which is the regime where a site sheds mass as the walk
    spreads, and drops below 1 when j^2 > (l + 1) / 2.
    """
    l = steps
    if l < 1:
        raise ValueError("steps must be >= 1")
    if abs(j) > l:
        raise ValueError("site outside the support")
    return Fraction(2 * ((l + 1) ** 2 - j * j), (2 * l + 1) * (l + 1))


def scaled_marginal(m: int, t: float, backend: str = "float"):
    """Law of the scaled walk at time t: spacing sqrt(2/m), floor(m (1+t)) steps.

    Returns (spacing, pmf).  The variance of the scaled law is
    floor(m (1 + t)) / m, which converges to 1 + t.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if t < 0:
        raise ValueError("t must be >= 0")
    steps = math.floor(m * (1.0 + t))
    return math.sqrt(2.0 / m), pmf(steps, backend=backend)
