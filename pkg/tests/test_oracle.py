import math

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal
from scipy.special import ai_zeros

from envelope import laws
from envelope.errors import InvalidInputError
from envelope.extremization import harmonic_eigenvalue
from envelope.model import AuxiliaryParameters, IdenticalSystemSpec, TwoSpeciesSystemSpec
from envelope.oracle import exact_ho_energy, radial_two_body, two_body_q

from conftest import ho_identical_energy, ho_two_species_energy, rel

NR1 = laws.NonRelativistic(1.0)


# -- harmonic systems -------------------------------------------------------------


def test_exact_ho_identical_three_body():
    res = exact_ho_energy(IdenticalSystemSpec(3, 3, NR1, laws.harmonic(0.5)))
    assert res.energy == pytest.approx(3.0 * math.sqrt(3.0), rel=1e-13)
    assert res.method == "exact-ho"


@pytest.mark.parametrize("n, dim, m, k", [(2, 1, 1.0, 1.0), (7, 2, 0.3, 2.0), (25, 3, 4.0, 0.1)])
def test_exact_ho_identical_against_closed_form(n, dim, m, k):
    res = exact_ho_energy(IdenticalSystemSpec(n, dim, laws.NonRelativistic(m), laws.harmonic(k)))
    assert rel(res.energy, ho_identical_energy(n, dim, m, k)) <= 1e-12


@pytest.mark.parametrize("na, nb", [(2, 3), (1, 4), (5, 1), (1, 1), (6, 6)])
def test_exact_ho_two_species(na, nb):
    spec = TwoSpeciesSystemSpec(
        na, nb, 3, laws.NonRelativistic(1.0), laws.NonRelativistic(2.0),
        laws.harmonic(1.0), laws.harmonic(2.0), laws.harmonic(3.0),
    )
    res = exact_ho_energy(spec)
    expected = ho_two_species_energy(na, nb, 3, 1.0, 2.0, 1.0, 2.0, 3.0)
    assert rel(res.energy, expected) <= 1e-12
    pinned = AuxiliaryParameters(1.0, 2.0, 1.0, 2.0, 3.0)
    assert rel(res.energy, harmonic_eigenvalue(pinned, spec)) <= 1e-12


def test_exact_ho_rejects_other_laws():
    with pytest.raises(InvalidInputError):
        exact_ho_energy(IdenticalSystemSpec(3, 3, NR1, laws.linear(1.0)))
    with pytest.raises(InvalidInputError):
        exact_ho_energy(IdenticalSystemSpec(3, 3, laws.Relativistic(1.0), laws.harmonic(1.0)))


# -- radial two-body problem ---------------------------------------------------------


def test_two_body_q():
    assert two_body_q(0, 0, 3) == 1.5
    assert two_body_q(1, 2, 3) == 5.5
    assert two_body_q(1, 1, 1) == 3.5
    with pytest.raises(InvalidInputError):
        two_body_q(0, 2, 1)


AIRY = -ai_zeros(3)[0]


@pytest.mark.parametrize(
    "mu, pot, dim, n, l, expected",
    [
        # hydrogen-like: -mu alpha^2 / (2 (n + l + 1)^2)
        (0.5, laws.coulomb(1.0), 3, 0, 0, -0.25),
        (0.5, laws.coulomb(1.0), 3, 1, 0, -0.0625),
        (0.5, laws.coulomb(1.0), 3, 0, 1, -0.0625),
        (0.5, laws.coulomb(1.0), 3, 0, 2, -0.25 / 9.0),
        # two dimensions: -mu alpha^2 / (2 (n + l + 1/2)^2)
        (0.5, laws.coulomb(1.0), 2, 0, 0, -1.0),
        # s-waves in a linear well: Airy zeros times (2 mu)^(-1/3)
        (0.5, laws.linear(1.0), 3, 0, 0, AIRY[0]),
        (0.5, laws.linear(1.0), 3, 1, 0, AIRY[1]),
        (2.0, laws.linear(1.0), 3, 2, 0, AIRY[2] * 4.0 ** (-1.0 / 3.0)),
        # oscillator V = k r^2: omega = sqrt(2 k / mu), E = omega (2n + l + D/2)
        (0.5, laws.harmonic(0.5), 3, 0, 0, 1.5 * math.sqrt(2.0)),
        (1.0, laws.harmonic(0.5), 3, 1, 1, 4.5),
        (1.0, laws.harmonic(0.5), 2, 0, 3, 4.0),
        (1.0, laws.harmonic(0.5), 1, 0, 0, 0.5),
        (1.0, laws.harmonic(0.5), 1, 1, 1, 3.5),
    ],
)
def test_radial_closed_forms(mu, pot, dim, n, l, expected):
    res = radial_two_body(mu, pot, dim, n, l)
    assert res.method == "radial-numeric"
    assert res.est_accuracy <= 1e-6
    assert rel(res.energy, expected) <= 1e-8


def test_airy_example_value():
    assert radial_two_body(0.5, laws.linear(1.0)).energy == pytest.approx(2.3381074, abs=1e-7)


@pytest.mark.parametrize("pot", [laws.coulomb(1.0), laws.linear(1.0), laws.SumOfPowerLaws(((1.0, 1.0), (-0.5, -1.0)))])
def test_tolerance_refinement_within_estimate(pot):
    default = radial_two_body(0.5, pot, 3, 0, 1)
    tighter = radial_two_body(0.5, pot, 3, 0, 1, rtol=1e-11)
    assert rel(default.energy, tighter.energy) <= max(default.est_accuracy, 1e-12)


def _fd_levels(mu, pot, l, radius, points=4000):
    """Three-point radial Hamiltonian on a uniform grid; eigenvectors hold the nodes."""
    h = radius / (points + 1)
    r = h * np.arange(1, points + 1)
    v = np.array([pot.value(x) for x in r]) + l * (l + 1) / (2.0 * mu * r * r)
    diag = 1.0 / (mu * h * h) + v
    off = np.full(points - 1, -1.0 / (2.0 * mu * h * h))
    return eigh_tridiagonal(diag, off, select="i", select_range=(0, 5))


@pytest.mark.parametrize("pot, radius", [(laws.linear(1.0), 14.0), (laws.coulomb(1.0), 80.0)])
@pytest.mark.parametrize("n", [0, 1, 2])
def test_node_count_matches_level_index(pot, radius, n):
    res = radial_two_body(0.5, pot, 3, n, 0)
    energies, vectors = _fd_levels(0.5, pot, 0, radius)
    index = int(np.argmin(np.abs(energies - res.energy)))
    assert index == n
    assert abs(energies[index] - res.energy) <= 1e-2 * abs(res.energy)
    u = vectors[:, index]
    u = u[np.abs(u) > 1e-8 * np.max(np.abs(u))]
    assert int(np.sum(np.sign(u[1:]) != np.sign(u[:-1]))) == n


def test_radial_input_validation():
    with pytest.raises(InvalidInputError):
        radial_two_body(0.0, laws.linear(1.0))
    with pytest.raises(InvalidInputError):
        radial_two_body(1.0, laws.linear(1.0), dim=4)
    with pytest.raises(InvalidInputError):
        radial_two_body(1.0, laws.linear(1.0), dim=1, l=2)
    with pytest.raises(InvalidInputError):
        radial_two_body(1.0, laws.PowerLaw(-1.0, -2.0))
