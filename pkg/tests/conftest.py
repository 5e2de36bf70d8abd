"""Shared helpers and independent reference formulas for the test suite.

Nothing here calls into the solvers: the closed forms below are written out
from the harmonic-oscillator spectrum directly, so they can serve as oracles.
"""

from __future__ import annotations

import math

import pytest

from envelope import laws
from envelope.model import TwoSpeciesSystemSpec

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


def rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def ground_q(n: int, dim: int) -> float:
    """Bosonic ground-state band number, written out independently of the package."""
    per_variable = 0.5 if dim == 1 else dim / 2.0
    return (n - 1) * per_variable


def ho_identical_energy(n: int, dim: int, m: float, k: float, q: float = None) -> float:
    """``N`` particles, ``p^2/2m`` each, ``k r^2`` per pair.

    Every internal Jacobi mode has ``omega = sqrt(2 N k / m)``.
    """
    if q is None:
        q = ground_q(n, dim)
    return q * math.sqrt(2.0 * n * k / m)


def ho_two_species_energy(na, nb, dim, ma, mb, kaa, kbb, kab, qa=None, qb=None, qrel=None) -> float:
    """Three decoupled oscillators: internal a, internal b, relative motion of the centres."""
    qa = ground_q(na, dim) if qa is None else qa
    qb = ground_q(nb, dim) if qb is None else qb
    qrel = ground_q(2, dim) if qrel is None else qrel
    e = 0.0
    if na > 1:
        e += qa * math.sqrt(2.0 / ma * (na * kaa + nb * kab))
    if nb > 1:
        e += qb * math.sqrt(2.0 / mb * (nb * kbb + na * kab))
    big_a, big_b = na * ma, nb * mb
    mu = big_a * big_b / (big_a + big_b)
    return e + qrel * math.sqrt(2.0 / mu * na * nb * kab)


def lin_coul(a: float = 1.0, alpha: float = 0.3) -> laws.SumOfPowerLaws:
    return laws.SumOfPowerLaws(((a, 1.0), (-alpha, -1.0)))


def mixed_battery():
    """Twelve two-species systems spanning kinetics, potentials and particle counts."""
    nr, rel_ = laws.NonRelativistic, laws.Relativistic
    ur = laws.UltraRelativistic
    rows = [
        ((2, 2), nr(1.0), nr(2.0), laws.linear(1.0)),
        ((2, 3), rel_(1.0), rel_(0.5), laws.coulomb(0.5)),
        ((3, 1), ur(), nr(1.0), laws.harmonic(0.5)),
        ((1, 1), nr(1.0), rel_(0.3), lin_coul()),
        ((2, 2), rel_(0.5), ur(), laws.harmonic(1.0)),
        ((2, 3), nr(1.0), ur(), laws.linear(0.7)),
        ((3, 1), rel_(1.0), rel_(2.0), lin_coul(1.0, 0.2)),
        ((1, 1), nr(1.0), nr(1.0), laws.coulomb(1.0)),
        ((2, 2), ur(), ur(), lin_coul(1.0, 0.1)),
        ((2, 3), nr(1.0), rel_(1.0), laws.harmonic(0.8)),
        ((3, 1), nr(1.0), rel_(1.0), laws.coulomb(0.4)),
        ((1, 1), ur(), rel_(1.0), laws.linear(1.0)),
    ]
    out = []
    for (na, nb), ka, kb, v in rows:
        out.append(TwoSpeciesSystemSpec(na, nb, 3, ka, kb, v, v.scaled(0.8), v.scaled(1.2)))
    return out


@pytest.fixture
def battery():
    return mixed_battery()
