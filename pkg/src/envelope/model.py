"""Problem statements, quantum-number bookkeeping and solution containers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

from .errors import InvalidInputError
from .laws import KineticLaw, PotentialLaw

__all__ = [
    "MAX_COUNT",
    "pair_count",
    "global_quantum_number",
    "boson_ground_q",
    "min_q",
    "IdenticalSystemSpec",
    "TwoSpeciesSystemSpec",
    "AuxiliaryParameters",
    "MEAN_NAMES",
    "Solution",
]

#: particle-count cap; keeps N(N-1)/2 far away from float trouble
MAX_COUNT = 10**6

# slack when comparing a user Q against the ground-state minimum
_Q_SLACK = 1e-12


def _check_count(name: str, n, minimum: int) -> int:
    if isinstance(n, bool) or int(n) != n:
        raise InvalidInputError(f"{name} must be an integer, got {n!r}")
    n = int(n)
    if not minimum <= n <= MAX_COUNT:
        raise InvalidInputError(f"{name} must lie in [{minimum}, {MAX_COUNT}], got {n}")
    return n


def _check_dim(dim) -> int:
    if isinstance(dim, bool) or int(dim) != dim or dim < 1:
        raise InvalidInputError(f"dimension must be a positive integer, got {dim!r}")
    return int(dim)


def pair_count(n: int) -> int:
    """Number of pairs ``n (n - 1) / 2``."""
    n = _check_count("n", n, 1)
    return n * (n - 1) // 2


def global_quantum_number(qn: Iterable[Tuple[int, int]], dim: int) -> float:
    """Harmonic band number ``Q`` of a list of ``(n_i, l_i)`` Jacobi quantum numbers.

    ``sum(2 n_i + l_i + D/2)`` for ``D >= 2`` and ``sum(n_i + 1/2)`` for ``D = 1``.
    """
    dim = _check_dim(dim)
    q = 0.0
    for n, l in qn:
        if n < 0 or l < 0 or int(n) != n or int(l) != l:
            raise InvalidInputError(f"quantum numbers must be non-negative integers, got ({n}, {l})")
        if dim == 1:
            if l != 0:
                raise InvalidInputError("l must be 0 in one dimension")
            q += n + 0.5
        else:
            q += 2 * n + l + dim / 2.0
    return q


def boson_ground_q(n: int, dim: int) -> float:
    """``Q`` of the fully symmetric ground state of ``n`` particles."""
    n = _check_count("n", n, 1)
    dim = _check_dim(dim)
    return (n - 1) * (0.5 if dim == 1 else dim / 2.0)


def min_q(n: int, dim: int) -> float:
    """Smallest admissible ``Q`` for ``n`` particles (the bosonic ground state)."""
    return boson_ground_q(n, dim)


def _check_q(name: str, q, n: int, dim: int) -> float:
    q = float(q)
    lowest = min_q(n, dim)
    if not math.isfinite(q) or q < lowest - _Q_SLACK * max(1.0, lowest):
        raise InvalidInputError(f"{name}={q} is below the minimum {lowest} for N={n}, D={dim}")
    return q


def _check_kinetic(name, k):
    if not isinstance(k, KineticLaw):
        raise InvalidInputError(f"{name} must be a KineticLaw, got {type(k).__name__}")
    return k


def _check_potential(name, v):
    if not isinstance(v, PotentialLaw):
        raise InvalidInputError(f"{name} must be a PotentialLaw, got {type(v).__name__}")
    return v


@dataclass(frozen=True)
class IdenticalSystemSpec:
    """``n`` identical particles with kinetic law ``kinetic`` and pair potential ``potential``.

    ``q`` defaults to the bosonic ground state.
    """

    n: int
    dim: int
    kinetic: KineticLaw
    potential: PotentialLaw
    q: Optional[float] = None

    def __post_init__(self):
        n = _check_count("n", self.n, 2)
        dim = _check_dim(self.dim)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "dim", dim)
        _check_kinetic("kinetic", self.kinetic)
        _check_potential("potential", self.potential)
        q = boson_ground_q(n, dim) if self.q is None else self.q
        object.__setattr__(self, "q", _check_q("q", q, n, dim))

    @property
    def pairs(self) -> int:
        return pair_count(self.n)


@dataclass(frozen=True)
class TwoSpeciesSystemSpec:
    """``n_a`` particles of type a and ``n_b`` of type b.

    ``q_a``/``q_b`` label the internal motion of each species and ``q_rel`` the
    relative motion of the two centres of mass. Omitted values default to the
    bosonic ground state. ``q_a`` is forced to 0 when ``n_a == 1`` (there is no
    internal motion), likewise ``q_b``.
    """

    n_a: int
    n_b: int
    dim: int
    kinetic_a: KineticLaw
    kinetic_b: KineticLaw
    v_aa: PotentialLaw
    v_bb: PotentialLaw
    v_ab: PotentialLaw
    q_a: Optional[float] = None
    q_b: Optional[float] = None
    q_rel: Optional[float] = None

    def __post_init__(self):
        n_a = _check_count("n_a", self.n_a, 1)
        n_b = _check_count("n_b", self.n_b, 1)
        dim = _check_dim(self.dim)
        object.__setattr__(self, "n_a", n_a)
        object.__setattr__(self, "n_b", n_b)
        object.__setattr__(self, "dim", dim)
        _check_kinetic("kinetic_a", self.kinetic_a)
        _check_kinetic("kinetic_b", self.kinetic_b)
        for name in ("v_aa", "v_bb", "v_ab"):
            _check_potential(name, getattr(self, name))
        for name, n in (("q_a", n_a), ("q_b", n_b)):
            q = getattr(self, name)
            if n == 1:
                q = 0.0
            elif q is None:
                q = boson_ground_q(n, dim)
            object.__setattr__(self, name, _check_q(name, q, n, dim))
        q_rel = boson_ground_q(2, dim) if self.q_rel is None else self.q_rel
        object.__setattr__(self, "q_rel", _check_q("q_rel", q_rel, 2, dim))

    @property
    def pairs_a(self) -> int:
        return pair_count(self.n_a)

    @property
    def pairs_b(self) -> int:
        return pair_count(self.n_b)

    def swapped(self) -> "TwoSpeciesSystemSpec":
        """Same system with the roles of a and b exchanged."""
        return TwoSpeciesSystemSpec(
            self.n_b, self.n_a, self.dim, self.kinetic_b, self.kinetic_a,
            self.v_bb, self.v_aa, self.v_ab, self.q_b, self.q_a, self.q_rel,
        )


@dataclass(frozen=True)
class AuxiliaryParameters:
    """Auxiliary masses ``mu_*`` and spring constants ``rho_*``.

    Parameters irrelevant to a system (``rho_aa`` when ``n_a == 1``) are carried
    with a placeholder value and ignored.
    """

    mu_a: float
    mu_b: float
    rho_aa: float
    rho_bb: float
    rho_ab: float

    def __post_init__(self):
        for name in ("mu_a", "mu_b", "rho_aa", "rho_bb", "rho_ab"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be > 0, got {value}")
            object.__setattr__(self, name, value)


#: names a :class:`Solution` may report in ``means``
MEAN_NAMES = (
    "p0", "rho0",
    "p_a", "p_b", "p_prime_a", "p_prime_b",
    "r_aa", "r_bb", "r_prime_0", "P0", "R0",
)


@dataclass(frozen=True)
class Solution:
    energy: float
    means: Dict[str, float]
    residual_norm: float
    iterations: int
    method: str
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.means[name]
