"""Invariant battery behind ``envelope validate``.

Each check returns a :class:`CheckResult` holding the worst deviation seen and
the limit it was held to. Limits on solved energies never drop below the
solver tolerance, so a loosened ``ET_SOLVER_TOL`` loosens them as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from . import laws
from .compact import SolverConfig, residuals, solve, solve_identical, solve_two_body, solve_two_species
from .errors import DegenerateLawError, EnvelopeError
from .extremization import extremize
from .model import IdenticalSystemSpec, TwoSpeciesSystemSpec, boson_ground_q
from .oracle import exact_ho_energy

__all__ = ["CheckResult", "run_battery", "sample_kinetic_laws", "sample_potential_laws"]

#: relative agreement demanded of a central difference with ``h = 1e-5 x``
FD_LIMIT = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    limit: float
    detail: str = ""


@dataclass(frozen=True)
class _SkewedPower(laws.PotentialLaw):
    """Power law whose derivative is off by a relative ``skew``; a test hook."""

    coef: float
    exponent: float
    skew: float = 1e-2

    @property
    def terms(self):
        return ((self.coef, self.exponent),)

    def derivative(self, r):
        return (1.0 + self.skew) * super().derivative(r)


def sample_kinetic_laws() -> List[laws.KineticLaw]:
    return [
        laws.NonRelativistic(1.0),
        laws.NonRelativistic(0.37),
        laws.Relativistic(0.0),
        laws.Relativistic(1.0),
        laws.Relativistic(2.5),
        laws.UltraRelativistic(),
        laws.PowerLawKinetic(1.0, 1.5),
        laws.PowerLawKinetic(0.5, 3.0),
    ]


def sample_potential_laws() -> List[laws.PotentialLaw]:
    return [
        laws.harmonic(1.0),
        laws.linear(1.0),
        laws.coulomb(1.0),
        laws.PowerLaw(1.0, 0.5),
        laws.PowerLaw(-1.0, -0.5),
        laws.PowerLaw(2.0, 3.0),
        laws.SumOfPowerLaws(((1.0, 1.0), (-0.3, -1.0))),
        laws.SumOfPowerLaws(((0.5, 2.0), (1.0, 1.0))),
    ]


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _points(n: int = 25) -> np.ndarray:
    return np.geomspace(1e-2, 1e2, n)


def check_finite_difference(corrupt: bool = False) -> CheckResult:
    items: List = sample_kinetic_laws() + sample_potential_laws()
    if corrupt:
        items.append(_SkewedPower(1.0, 1.0))
    worst, culprit = 0.0, ""
    for law in items:
        for x in _points():
            h = 1e-5 * x
            fd = (law.value(x + h) - law.value(x - h)) / (2.0 * h)
            err = _rel(law.derivative(x), fd)
            if err > worst:
                worst, culprit = err, repr(law)
    return CheckResult("laws.finite-difference", worst <= FD_LIMIT, worst, FD_LIMIT, culprit)


def check_aux_inverse() -> CheckResult:
    limit = 1e-10
    worst = 0.0
    for kin in sample_kinetic_laws():
        for x in _points():
            x = x + kin.mu_floor
            try:
                g = kin.aux_inverse(x)
            except DegenerateLawError:
                continue
            worst = max(worst, _rel(kin.derivative(g), g / x))
    for pot in sample_potential_laws():
        for x in _points():
            x = x + pot.rho_floor
            try:
                j = pot.aux_inverse(x)
            except DegenerateLawError:
                continue
            worst = max(worst, _rel(pot.derivative(j), 2.0 * x * j))
    return CheckResult("laws.aux-inverse", worst <= limit, worst, limit)


def _compare(name: str, pairs: Sequence, base: float, tol: float) -> CheckResult:
    limit = max(base, tol)
    worst, detail = 0.0, ""
    for label, compute in pairs:
        try:
            a, b = compute()
        except EnvelopeError as exc:
            return CheckResult(name, False, math.inf, limit, f"{label}: {exc}")
        err = _rel(a, b)
        if err > worst:
            worst, detail = err, label
    return CheckResult(name, worst <= limit, worst, limit, detail)


def _nr_ho(n, dim, m, k):
    return IdenticalSystemSpec(n, dim, laws.NonRelativistic(m), laws.harmonic(k))


def _two_ho(na, nb, dim=3):
    return TwoSpeciesSystemSpec(
        na, nb, dim, laws.NonRelativistic(1.0), laws.NonRelativistic(2.0),
        laws.harmonic(1.0), laws.harmonic(0.5), laws.harmonic(0.8),
    )


def _battery_systems():
    lin_coul = laws.SumOfPowerLaws(((1.0, 1.0), (-0.3, -1.0)))
    out = []
    for (na, nb), ka, kb, v in [
        ((2, 2), laws.NonRelativistic(1.0), laws.Relativistic(0.5), laws.linear(1.0)),
        ((2, 3), laws.Relativistic(1.0), laws.UltraRelativistic(), lin_coul),
        ((3, 1), laws.NonRelativistic(1.0), laws.NonRelativistic(3.0), laws.coulomb(1.0)),
        ((1, 1), laws.UltraRelativistic(), laws.NonRelativistic(1.0), laws.linear(0.5)),
    ]:
        out.append(TwoSpeciesSystemSpec(na, nb, 3, ka, kb, v, v.scaled(0.8), v.scaled(1.2)))
    return out


def run_battery(cfg: SolverConfig = None, corrupt_derivative: bool = False) -> List[CheckResult]:
    """Run every invariant check; ``corrupt_derivative`` plants a broken law."""
    cfg = cfg or SolverConfig()
    tol = cfg.tol
    results = [check_finite_difference(corrupt_derivative), check_aux_inverse()]

    ho = [(f"N={n},D={d}", lambda n=n, d=d: (
        solve_identical(_nr_ho(n, d, 1.3, 0.7), cfg).energy, exact_ho_energy(_nr_ho(n, d, 1.3, 0.7)).energy))
        for n, d in [(2, 1), (3, 3), (10, 2), (40, 3)]]
    results.append(_compare("compact.ho-identical", ho, 1e-10, tol))

    ho2 = [(f"{na}+{nb}", lambda na=na, nb=nb: (
        solve_two_species(_two_ho(na, nb), cfg).energy, exact_ho_energy(_two_ho(na, nb)).energy))
        for na, nb in [(2, 2), (3, 5), (4, 1)]]
    results.append(_compare("compact.ho-two-species", ho2, 1e-10, tol))

    equiv = [(f"{s.n_a}+{s.n_b}", lambda s=s: (solve(s, cfg).energy, extremize(s, cfg)[0].energy))
             for s in _battery_systems()]
    results.append(_compare("extremization.equivalence", equiv, 1e-8, tol))

    def symmetric():
        k, v = laws.Relativistic(0.5), laws.linear(1.0)
        two = TwoSpeciesSystemSpec(2, 3, 3, k, k, v, v, v)
        return solve_two_species(two, cfg).energy, solve_identical(IdenticalSystemSpec(5, 3, k, v), cfg).energy
    results.append(_compare("compact.symmetric-reduction", [("2+3", symmetric)], 1e-10, tol))

    def coulomb_pair():
        s = TwoSpeciesSystemSpec(1, 1, 3, laws.NonRelativistic(1.0), laws.NonRelativistic(1.0),
                                 laws.coulomb(1.0), laws.coulomb(1.0), laws.coulomb(1.0))
        return solve_two_body(s, cfg).energy, -1.0 / 9.0

    def linear_pair():
        s = TwoSpeciesSystemSpec(1, 1, 3, laws.NonRelativistic(1.0), laws.NonRelativistic(1.0),
                                 laws.linear(1.0), laws.linear(1.0), laws.linear(1.0))
        return solve_two_body(s, cfg).energy, 3.0 * 0.75 ** (2.0 / 3.0)
    results.append(_compare("compact.two-body-closed-form",
                            [("coulomb", coulomb_pair), ("linear", linear_pair)], 1e-10, tol))

    worst = 0.0
    for s in _battery_systems():
        sol = solve(s, cfg)
        worst = max(worst, float(np.max(np.abs(residuals(s, sol.means, sol.energy)))))
    limit = max(1e-10, tol)
    results.append(CheckResult("compact.residuals", worst <= limit, worst, limit))

    bad = 0
    for d in (1, 2, 3):
        for na in range(1, 21):
            for nb in range(1, 21):
                lhs = boson_ground_q(na, d) + boson_ground_q(nb, d) + boson_ground_q(2, d)
                if lhs != boson_ground_q(na + nb, d):
                    bad += 1
    results.append(CheckResult("model.q-additivity", bad == 0, float(bad), 0.0))
    return results
