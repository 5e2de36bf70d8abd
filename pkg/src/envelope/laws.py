"""Kinetic-energy and two-body potential families.

Every law exposes its value, its first derivative and the auxiliary inverse
used by the auxiliary-Hamiltonian route:

* kinetic laws: ``G(x)`` solves ``T'(G) = G / x``
* potentials:   ``J(x)`` solves ``V'(J) = 2 x J``

Laws that are already quadratic (non-relativistic kinetic energy, a pure
harmonic potential) have no such inverse; asking for one raises
:class:`~envelope.errors.DegenerateLawError` carrying the value at which the
auxiliary parameter has to be pinned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from scipy.optimize import brentq

from .errors import DegenerateLawError, DomainError, InvalidInputError

__all__ = [
    "KineticLaw",
    "NonRelativistic",
    "Relativistic",
    "UltraRelativistic",
    "PowerLawKinetic",
    "PotentialLaw",
    "PowerLaw",
    "SumOfPowerLaws",
    "harmonic",
    "linear",
    "coulomb",
    "kinetic_value",
    "kinetic_derivative",
    "aux_kinetic_inverse",
    "potential_value",
    "potential_derivative",
    "aux_potential_inverse",
    "AUX_TOL",
]

#: relative accuracy targeted by the numeric auxiliary inverses
AUX_TOL = 1e-12


def _check_positive(name, value, allow_zero=False):
    value = float(value)
    if not math.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise InvalidInputError(f"{name} must be finite and {bound}, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# kinetic energies
# ---------------------------------------------------------------------------


class KineticLaw:
    """Base class of the kinetic-energy families ``T(p)``."""

    #: smallest admissible auxiliary mass (``G`` is real only above it)
    mu_floor = 0.0

    def value(self, p: float) -> float:
        raise NotImplementedError

    def derivative(self, p: float) -> float:
        raise NotImplementedError

    def aux_inverse(self, x: float) -> float:
        raise NotImplementedError

    @property
    def pinned_mass(self) -> Optional[float]:
        """Auxiliary mass for degenerate (quadratic) laws, else ``None``."""
        return None


@dataclass(frozen=True)
class NonRelativistic(KineticLaw):
    """``T(p) = p**2 / (2 m)``."""

    mass: float

    def __post_init__(self):
        object.__setattr__(self, "mass", _check_positive("mass", self.mass))

    def value(self, p):
        return p * p / (2.0 * self.mass)

    def derivative(self, p):
        return p / self.mass

    def aux_inverse(self, x):
        raise DegenerateLawError(
            "non-relativistic kinetic energy is quadratic; pin the auxiliary mass",
            self.mass,
        )

    @property
    def pinned_mass(self):
        return self.mass


@dataclass(frozen=True)
class Relativistic(KineticLaw):
    """``T(p) = sqrt(p**2 + m**2)``; ``m = 0`` is allowed."""

    mass: float

    def __post_init__(self):
        object.__setattr__(self, "mass", _check_positive("mass", self.mass, allow_zero=True))

    @property
    def mu_floor(self):
        return self.mass

    def value(self, p):
        return math.hypot(p, self.mass)

    def derivative(self, p):
        return p / math.hypot(p, self.mass)

    def aux_inverse(self, x):
        if x < self.mass:
            raise DomainError(f"G(x) needs x >= m = {self.mass}, got {x}")
        # (x - m)(x + m) keeps precision when x is close to m
        return math.sqrt((x - self.mass) * (x + self.mass))


@dataclass(frozen=True)
class UltraRelativistic(KineticLaw):
    """``T(p) = p``."""

    def value(self, p):
        return p

    def derivative(self, p):
        return 1.0

    def aux_inverse(self, x):
        if not x > 0:
            raise DomainError(f"G(x) needs x > 0, got {x}")
        return x


@dataclass(frozen=True)
class PowerLawKinetic(KineticLaw):
    """``T(p) = A p**beta``; ``beta = 2`` is the quadratic case."""

    coef: float
    exponent: float

    def __post_init__(self):
        object.__setattr__(self, "coef", _check_positive("coef", self.coef))
        object.__setattr__(self, "exponent", _check_positive("exponent", self.exponent))

    def value(self, p):
        return self.coef * p ** self.exponent

    def derivative(self, p):
        return self.coef * self.exponent * p ** (self.exponent - 1.0)

    def aux_inverse(self, x):
        if self.exponent == 2.0:
            raise DegenerateLawError("quadratic kinetic power law", self.pinned_mass)
        if not x > 0:
            raise DomainError(f"G(x) needs x > 0, got {x}")
        return (self.coef * self.exponent * x) ** (1.0 / (2.0 - self.exponent))

    @property
    def pinned_mass(self):
        if self.exponent == 2.0:
            return 1.0 / (2.0 * self.coef)
        return None


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


class PotentialLaw:
    """Base class of ``V(r) = sum_k a_k r**b_k``."""

    terms: Tuple[Tuple[float, float], ...]

    def value(self, r: float) -> float:
        return sum(a * r ** b for a, b in self.terms)

    def derivative(self, r: float) -> float:
        return sum(a * b * r ** (b - 1.0) for a, b in self.terms)

    @property
    def pinned_stiffness(self) -> Optional[float]:
        """Spring constant for a purely harmonic law, else ``None``."""
        if all(b == 2.0 for _, b in self.terms):
            return sum(a for a, _ in self.terms)
        return None

    @property
    def rho_floor(self) -> float:
        """Infimum of ``V'(r) / (2 r)`` at large ``r``; ``J(x)`` needs ``x`` above it.

        Nonzero only when the steepest term is harmonic and other terms exist.
        """
        top = max(b for _, b in self.terms)
        if top != 2.0:
            return 0.0
        return max(sum(a for a, b in self.terms if b == 2.0), 0.0)

    def scaled(self, factor: float) -> "PotentialLaw":
        return SumOfPowerLaws(tuple((a * factor, b) for a, b in self.terms))

    def plus(self, other: "PotentialLaw", weight: float = 1.0) -> "SumOfPowerLaws":
        return SumOfPowerLaws(self.terms + tuple((a * weight, b) for a, b in other.terms))

    def aux_inverse(self, x: float, numeric: bool = False) -> float:
        rho = self.pinned_stiffness
        if rho is not None:
            raise DegenerateLawError("harmonic potential; pin the spring constant", rho)
        if not x > self.rho_floor:
            raise DomainError(f"J(x) needs x > {self.rho_floor}, got {x}")
        if len(self.terms) == 1 and not numeric:
            (a, b), = self.terms
            return (a * b / (2.0 * x)) ** (1.0 / (2.0 - b))
        return _numeric_j(self.terms, x)


def _validate_terms(terms):
    out = []
    for a, b in terms:
        a, b = float(a), float(b)
        if not (math.isfinite(a) and math.isfinite(b)) or a == 0.0 or b == 0.0:
            raise InvalidInputError(f"power-law term needs finite nonzero coef/exponent, got ({a}, {b})")
        out.append((a, b))
    if not out:
        raise InvalidInputError("potential needs at least one term")
    if not any(a * b > 0 for a, b in out):
        raise InvalidInputError(f"purely repulsive potential {out} cannot bind")
    return tuple(out)


@dataclass(frozen=True)
class PowerLaw(PotentialLaw):
    """``V(r) = a r**b`` with ``a b > 0`` (attractive)."""

    coef: float
    exponent: float

    def __post_init__(self):
        _validate_terms([(self.coef, self.exponent)])
        object.__setattr__(self, "coef", float(self.coef))
        object.__setattr__(self, "exponent", float(self.exponent))

    @property
    def terms(self):
        return ((self.coef, self.exponent),)

    # fast paths; these are the hot loop of the compact solvers
    def value(self, r):
        return self.coef * r ** self.exponent

    def derivative(self, r):
        return self.coef * self.exponent * r ** (self.exponent - 1.0)


@dataclass(frozen=True)
class SumOfPowerLaws(PotentialLaw):
    terms: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", _validate_terms(self.terms))


def harmonic(k: float) -> PowerLaw:
    """``V(r) = k r**2``."""
    return PowerLaw(k, 2.0)


def linear(a: float) -> PowerLaw:
    """``V(r) = a r``."""
    return PowerLaw(a, 1.0)


def coulomb(alpha: float) -> PowerLaw:
    """Attractive ``V(r) = -alpha / r``."""
    return PowerLaw(-alpha, -1.0)


def _numeric_j(terms: Sequence[Tuple[float, float]], x: float) -> float:
    def g(s):
        j = math.exp(s)
        try:
            return sum(a * b * j ** (b - 2.0) for a, b in terms) / (2.0 * x) - 1.0
        except OverflowError:
            return math.inf

    seeds = [
        math.log(a * b / (2.0 * x)) / (2.0 - b)
        for a, b in terms
        if a * b > 0 and b != 2.0
    ]
    if not seeds:
        seeds = [0.0]
    lo, hi = min(seeds) - 0.7, max(seeds) + 0.7
    g_lo, g_hi = g(lo), g(hi)
    step = 0.7
    while (g_lo > 0) == (g_hi > 0):
        lo, hi = max(lo - step, -700.0), min(hi + step, 700.0)
        if lo == -700.0 and hi == 700.0:
            # V'(r) / (2r) is not monotone, so J(x) is not single-valued here
            raise DomainError(f"no bracketed J(x) for x={x} and terms {terms}; V'(r)/r must be monotone")
        step *= 2.0
        g_lo, g_hi = g(lo), g(hi)
    s = brentq(g, lo, hi, xtol=1e-15, rtol=4 * 2.220446049250313e-16, maxiter=500)
    return math.exp(s)


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------


def kinetic_value(k: KineticLaw, p: float) -> float:
    if p < 0:
        raise DomainError(f"momentum must be >= 0, got {p}")
    return k.value(p)


def kinetic_derivative(k: KineticLaw, p: float) -> float:
    return k.derivative(p)


def aux_kinetic_inverse(k: KineticLaw, x: float) -> float:
    return k.aux_inverse(x)


def potential_value(v: PotentialLaw, r: float) -> float:
    return v.value(r)


def potential_derivative(v: PotentialLaw, r: float) -> float:
    return v.derivative(r)


def aux_potential_inverse(v: PotentialLaw, x: float, numeric: bool = False) -> float:
    """Return ``J(x)``; ``numeric=True`` forces bracketed root finding."""
    return v.aux_inverse(x, numeric=numeric)
