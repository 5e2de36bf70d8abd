"""Acceptance criteria 1-9.

Every test records one ``criterion k: PASS|FAIL`` line (printed in the
terminal summary) before asserting, and pins its tolerance as a module
constant.
"""

import math
import statistics
import time

import numpy as np
import pytest

from envelope import laws
from envelope.compact import solve, solve_identical, solve_na_plus_one, solve_two_body, solve_two_species
from envelope.errors import DegenerateLawError
from envelope.extremization import extremize
from envelope.model import IdenticalSystemSpec, TwoSpeciesSystemSpec, boson_ground_q
from envelope.oracle import radial_two_body
from envelope.validation import sample_kinetic_laws, sample_potential_laws

from conftest import ACCEPTANCE_LINES, ground_q, ho_identical_energy, ho_two_species_energy, mixed_battery, rel

TOL_HO_IDENTICAL = 1e-10
MAX_SOLVE_SECONDS = 10e-3
TOL_HO_TWO_SPECIES = 1e-10
TOL_EQUIVALENCE = 1e-8
TOL_REDUCTION = 1e-10
TOL_CLOSED_FORM = 1e-10
MAX_ORACLE_ACCURACY = 1e-6
TOL_AUX_RESIDUAL = 1e-10
AUX_SAMPLES = 1000
MAX_COST_RATIO = 2.0
COST_REPEATS = 50

SEED = 20261019


def report(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _timed(f, *args):
    start = time.perf_counter()
    out = f(*args)
    return out, time.perf_counter() - start


def test_criterion_1_harmonic_identical():
    rng = np.random.default_rng(SEED)
    worst_err, worst_time = 0.0, 0.0
    solve_identical(IdenticalSystemSpec(2, 3, laws.NonRelativistic(1.0), laws.harmonic(1.0)))  # warm-up
    for _ in range(20):
        n = int(rng.integers(2, 51))
        dim = int(rng.choice([1, 2, 3]))
        m, k = np.exp(rng.uniform(np.log(0.1), np.log(10.0), 2))
        spec = IdenticalSystemSpec(n, dim, laws.NonRelativistic(m), laws.harmonic(k))
        times = []
        for _ in range(3):
            sol, dt = _timed(solve_identical, spec)
            times.append(dt)
        worst_time = max(worst_time, statistics.median(times))
        worst_err = max(worst_err, rel(sol.energy, ho_identical_energy(n, dim, m, k)))
    ok = worst_err <= TOL_HO_IDENTICAL and worst_time < MAX_SOLVE_SECONDS
    report(1, ok, f"HO identical: worst rel err {worst_err:.2e} (tol {TOL_HO_IDENTICAL:.0e}), "
                  f"worst solve {worst_time * 1e3:.2f} ms (limit {MAX_SOLVE_SECONDS * 1e3:.0f} ms)")
    assert worst_err <= TOL_HO_IDENTICAL
    assert worst_time < MAX_SOLVE_SECONDS


def test_criterion_2_harmonic_two_species():
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    for _ in range(10):
        na, nb = (int(x) for x in rng.integers(1, 13, 2))
        dim = int(rng.choice([1, 2, 3]))
        ma, mb, kaa, kbb, kab = np.exp(rng.uniform(np.log(0.2), np.log(5.0), 5))
        spec = TwoSpeciesSystemSpec(
            na, nb, dim, laws.NonRelativistic(ma), laws.NonRelativistic(mb),
            laws.harmonic(kaa), laws.harmonic(kbb), laws.harmonic(kab),
        )
        expected = ho_two_species_energy(na, nb, dim, ma, mb, kaa, kbb, kab)
        worst = max(worst, rel(solve_two_species(spec).energy, expected))
    report(2, worst <= TOL_HO_TWO_SPECIES, f"HO two-species: worst rel err {worst:.2e} (tol {TOL_HO_TWO_SPECIES:.0e})")
    assert worst <= TOL_HO_TWO_SPECIES


def test_criterion_3_compact_extremization_equivalence():
    battery = mixed_battery()
    assert len(battery) >= 12
    kinds = {type(s.kinetic_a).__name__ for s in battery} | {type(s.kinetic_b).__name__ for s in battery}
    assert kinds == {"NonRelativistic", "Relativistic", "UltraRelativistic"}
    assert {(s.n_a, s.n_b) for s in battery} == {(2, 2), (2, 3), (3, 1), (1, 1)}
    worst = max(rel(solve(s).energy, extremize(s)[0].energy) for s in battery)
    report(3, worst <= TOL_EQUIVALENCE,
           f"compact vs extremization on {len(battery)} systems: worst rel diff {worst:.2e} (tol {TOL_EQUIVALENCE:.0e})")
    assert worst <= TOL_EQUIVALENCE


def test_criterion_4_reduction_identities():
    worst = 0.0
    # (a) symmetric two-species input
    for kin, pot in [
        (laws.NonRelativistic(1.0), laws.linear(1.0)),
        (laws.Relativistic(0.5), laws.coulomb(0.3)),
        (laws.UltraRelativistic(), laws.PowerLaw(1.0, 0.5)),
    ]:
        for na, nb in [(2, 2), (2, 5), (4, 3)]:
            two = solve_two_species(TwoSpeciesSystemSpec(na, nb, 3, kin, kin, pot, pot, pot))
            one = solve_identical(IdenticalSystemSpec(na + nb, 3, kin, pot))
            worst = max(
                worst,
                rel(two.energy, one.energy),
                rel(two["p_prime_a"], two["p_prime_b"]),
                rel(two["r_aa"], two["r_bb"]),
                rel(two["r_aa"], two["r_prime_0"]),
            )
    # (b) n_b = 1 dispatch
    zero_pb = True
    for spec in mixed_battery():
        if (spec.n_a, spec.n_b) == (3, 1):
            routed, direct = solve_two_species(spec), solve_na_plus_one(spec)
            worst = max(worst, rel(routed.energy, direct.energy))
            zero_pb = zero_pb and direct["p_b"] == 0.0 and routed["p_b"] == 0.0
    # (c) n_a = n_b = 1
    for spec in mixed_battery():
        if (spec.n_a, spec.n_b) == (1, 1):
            worst = max(worst, rel(solve_two_species(spec).energy, solve_two_body(spec).energy))
    ok = worst <= TOL_REDUCTION and zero_pb
    report(4, ok, f"reductions (a)(b)(c): worst rel diff {worst:.2e} (tol {TOL_REDUCTION:.0e}), p_b = 0: {zero_pb}")
    assert zero_pb
    assert worst <= TOL_REDUCTION


def test_criterion_5_two_body_closed_forms():
    nr = laws.NonRelativistic(1.0)
    coul = IdenticalSystemSpec(2, 3, nr, laws.coulomb(1.0), 1.5)
    lin = IdenticalSystemSpec(2, 3, nr, laws.linear(1.0), 1.5)
    err_c = abs(solve(coul).energy - (-1.0 / 9.0))
    err_l = abs(solve(lin).energy - 3.0 * (1.5 / 2.0) ** (2.0 / 3.0))
    ok = max(err_c, err_l) <= TOL_CLOSED_FORM
    report(5, ok, f"closed forms: coulomb abs err {err_c:.2e}, linear abs err {err_l:.2e} (tol {TOL_CLOSED_FORM:.0e})")
    assert err_c <= TOL_CLOSED_FORM
    assert err_l <= TOL_CLOSED_FORM


def _states(q, dim):
    k = int(round(q - dim / 2.0))
    return [(n, k - 2 * n) for n in range(k // 2 + 1)]


def test_criterion_6_bound_direction():
    nr = laws.NonRelativistic(1.0)
    sides, worst_acc, lines = {}, 0.0, []
    for name, pot in (("coulomb", laws.coulomb(1.0)), ("linear", laws.linear(1.0))):
        signs = set()
        q0 = ground_q(2, 3)
        for q in (q0, q0 + 1, q0 + 2):
            et = solve(TwoSpeciesSystemSpec(1, 1, 3, nr, nr, pot, pot, pot, q_rel=q)).energy
            for n, l in _states(q, 3):
                ref = radial_two_body(0.5, pot, 3, n, l)
                worst_acc = max(worst_acc, ref.est_accuracy)
                signs.add(math.copysign(1.0, et - ref.energy))
        sides[name] = signs
        lines.append(f"{name}: ET {'above' if signs == {1.0} else 'below' if signs == {-1.0} else 'mixed'}")
    one_sided = all(len(s) == 1 for s in sides.values())
    ok = one_sided and worst_acc <= MAX_ORACLE_ACCURACY
    report(6, ok, f"bound direction one-sided: {'; '.join(lines)}; oracle accuracy {worst_acc:.1e} "
                  f"(limit {MAX_ORACLE_ACCURACY:.0e})")
    assert worst_acc <= MAX_ORACLE_ACCURACY
    assert one_sided


def test_criterion_7_auxiliary_residuals():
    rng = np.random.default_rng(SEED + 7)
    worst, count = 0.0, 0
    extra_kinetic = [laws.PowerLawKinetic(2.0, 1.2), laws.Relativistic(0.01)]
    extra_potential = [laws.SumOfPowerLaws(((1.0, 1.0), (-1.0, -1.0))), laws.SumOfPowerLaws(((0.5, 2.0), (-0.2, -1.0)))]
    xs = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), AUX_SAMPLES))
    for law in sample_kinetic_laws() + extra_kinetic:
        for x in xs + law.mu_floor:
            try:
                g = law.aux_inverse(x)
            except DegenerateLawError:
                continue
            count += 1
            worst = max(worst, abs(law.derivative(g) - g / x) / max(1.0, g / x))
    for law in sample_potential_laws() + extra_potential:
        for x in xs + law.rho_floor:
            try:
                j = law.aux_inverse(x)
            except DegenerateLawError:
                continue
            count += 1
            worst = max(worst, abs(law.derivative(j) - 2 * x * j) / max(1.0, 2 * x * j))
    report(7, worst <= TOL_AUX_RESIDUAL,
           f"auxiliary residuals over {count} points: worst {worst:.2e} (tol {TOL_AUX_RESIDUAL:.0e})")
    assert worst <= TOL_AUX_RESIDUAL


def test_criterion_8_cost_independent_of_n():
    kin, pot = laws.Relativistic(1.0), laws.linear(1.0)
    small = IdenticalSystemSpec(2, 3, kin, pot)
    large = IdenticalSystemSpec(100, 3, kin, pot)
    for spec in (small, large):
        solve_identical(spec)
    t_small, t_large = [], []
    for _ in range(COST_REPEATS):
        t_small.append(_timed(solve_identical, small)[1])
        t_large.append(_timed(solve_identical, large)[1])
    ratio = statistics.median(t_large) / statistics.median(t_small)
    ok = 1.0 / MAX_COST_RATIO <= ratio <= MAX_COST_RATIO
    report(8, ok, f"median solve N=100 / N=2 = {ratio:.2f} (limit {MAX_COST_RATIO:.0f}x)")
    assert ok


def test_criterion_9_quantum_number_additivity():
    failures = [
        (na, nb, d)
        for d in (1, 2, 3)
        for na in range(1, 21)
        for nb in range(1, 21)
        if boson_ground_q(na, d) + boson_ground_q(nb, d) + boson_ground_q(2, d) != boson_ground_q(na + nb, d)
    ]
    report(9, not failures, f"Q additivity over 1200 (N_a, N_b, D) triples: {len(failures)} failures")
    assert not failures
