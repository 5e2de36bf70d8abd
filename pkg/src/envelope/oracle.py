"""Reference energies that do not rely on the envelope equations.

* :func:`exact_ho_energy` diagonalizes the mass-weighted stiffness matrix of a
  harmonic many-body system and reads off the frequency of every decoupled
  group of normal modes.
* :func:`radial_two_body` solves the reduced radial Schrödinger equation of a
  two-body system by shooting, with node counting to select the level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh, null_space
from scipy.optimize import brentq, minimize_scalar

from .errors import ConvergenceError, InvalidInputError, NoBindingError
from .laws import NonRelativistic, PotentialLaw
from .model import IdenticalSystemSpec, TwoSpeciesSystemSpec

__all__ = ["OracleResult", "exact_ho_energy", "radial_two_body", "two_body_q"]

Spec = Union[IdenticalSystemSpec, TwoSpeciesSystemSpec]

#: exact diagonalization is dense; keep it cheap
MAX_HO_PARTICLES = 2000


@dataclass(frozen=True)
class OracleResult:
    energy: float
    method: str  # "exact-ho" | "closed-form" | "radial-numeric"
    est_accuracy: float = 0.0
    details: Optional[dict] = None


# ---------------------------------------------------------------------------
# harmonic systems
# ---------------------------------------------------------------------------


def _harmonic_data(spec: Spec):
    """Masses, pair stiffness matrix and the particle index sets of each species."""
    def mass(kin):
        if not isinstance(kin, NonRelativistic):
            raise InvalidInputError("exact HO oracle needs non-relativistic kinetic energies")
        return kin.mass

    def stiffness(pot):
        k = pot.pinned_stiffness
        if k is None:
            raise InvalidInputError("exact HO oracle needs harmonic potentials")
        return k

    if isinstance(spec, IdenticalSystemSpec):
        n = spec.n
        masses = np.full(n, mass(spec.kinetic))
        k = np.full((n, n), stiffness(spec.potential))
        return masses, k, [np.arange(n)]
    na, nb = spec.n_a, spec.n_b
    n = na + nb
    masses = np.concatenate([np.full(na, mass(spec.kinetic_a)), np.full(nb, mass(spec.kinetic_b))])
    k = np.empty((n, n))
    k[:na, :na] = stiffness(spec.v_aa) if na > 1 else 0.0
    k[na:, na:] = stiffness(spec.v_bb) if nb > 1 else 0.0
    k[:na, na:] = k[na:, :na] = stiffness(spec.v_ab)
    return masses, k, [np.arange(na), np.arange(na, n)]


def _group_bases(masses: np.ndarray, groups: List[np.ndarray]) -> List[Tuple[str, np.ndarray]]:
    """Orthonormal bases (mass-weighted coordinates) of the internal and relative subspaces."""
    n = len(masses)
    sqrt_m = np.sqrt(masses)
    bases = []
    cms = []
    for label, idx in zip("ab", groups):
        cm = np.zeros(n)
        cm[idx] = sqrt_m[idx]
        cms.append(cm / np.linalg.norm(cm))
        if len(idx) > 1:
            # supported on the species, orthogonal to its own centre of mass
            local = null_space(sqrt_m[idx][None, :])
            basis = np.zeros((n, local.shape[1]))
            basis[idx] = local
            bases.append((label, basis))
    if len(groups) == 2:
        total = sqrt_m / np.linalg.norm(sqrt_m)
        rel = cms[0] - (cms[0] @ total) * total
        bases.append(("rel", (rel / np.linalg.norm(rel))[:, None]))
    return bases


def exact_ho_energy(spec: Spec) -> OracleResult:
    """Exact eigenvalue of a harmonic system with non-relativistic kinetic energies.

    The stiffness matrix is diagonalized inside each decoupled subspace
    (internal a, internal b, relative motion of the two centres of mass); each
    group contributes ``Q * omega``. Cross-subspace couplings and frequency
    spreads inside a group are reported in ``details`` and must vanish.
    """
    masses, k, groups = _harmonic_data(spec)
    n = len(masses)
    if n > MAX_HO_PARTICLES:
        raise InvalidInputError(f"exact HO oracle limited to {MAX_HO_PARTICLES} particles")
    # V = sum_{i<j} k_ij (x_i - x_j)^2 = x^T L x / 2 with L the weighted Laplacian (times 2)
    np.fill_diagonal(k, 0.0)
    lap = 2.0 * (np.diag(k.sum(axis=1)) - k)
    inv_sqrt_m = 1.0 / np.sqrt(masses)
    w = lap * inv_sqrt_m[:, None] * inv_sqrt_m[None, :]

    if isinstance(spec, IdenticalSystemSpec):
        qs = {"a": spec.q}
    else:
        qs = {"a": spec.q_a, "b": spec.q_b, "rel": spec.q_rel}
    bases = _group_bases(masses, groups)
    stacked = np.hstack([basis for _, basis in bases])
    block = stacked.T @ w @ stacked
    energy = 0.0
    spread = 0.0
    start = 0
    omegas = {}
    for label, basis in bases:
        size = basis.shape[1]
        sub = block[start:start + size, start:start + size]
        eig = eigh(sub, eigvals_only=True)
        omega = math.sqrt(float(np.mean(eig)))
        spread = max(spread, float(np.ptp(eig)) / max(float(np.max(np.abs(eig))), 1e-300))
        omegas[label] = omega
        energy += qs[label] * omega
        start += size
    off = block.copy()
    start = 0
    for _, basis in bases:
        size = basis.shape[1]
        off[start:start + size, start:start + size] = 0.0
        start += size
    coupling = float(np.max(np.abs(off))) / max(float(np.max(np.abs(block))), 1e-300)
    return OracleResult(
        energy=energy,
        method="exact-ho",
        est_accuracy=0.0,
        details={"omegas": omegas, "group_spread": spread, "cross_coupling": coupling},
    )


# ---------------------------------------------------------------------------
# radial two-body problem
# ---------------------------------------------------------------------------


def two_body_q(n: int, l: int, dim: int) -> float:
    """Band number of the two-body state ``(n, l)``.

    In one dimension ``l`` is the parity (0 even, 1 odd) and ``n`` counts
    nodes on the half line, so the full-line level is ``2 n + l``.
    """
    if n < 0 or l < 0:
        raise InvalidInputError(f"quantum numbers must be >= 0, got ({n}, {l})")
    if dim == 1:
        if l > 1:
            raise InvalidInputError("in one dimension l is the parity label 0 or 1")
        return 2 * n + l + 0.5
    return 2 * n + l + dim / 2.0


class _Radial:
    """``u'' = [c / r^2 + 2 mu (V(r) - E)] u`` on ``(0, R]`` with ``u ~ r^s`` at the origin."""

    def __init__(self, mu: float, potential: PotentialLaw, dim: int, l: int, rtol: float):
        self.mu = mu
        self.pot = potential
        self.s = l + (dim - 1) / 2.0
        self.c = self.s * (self.s - 1.0)
        self.rtol = rtol
        self.v_inf = self._v_at_infinity()
        self.r_scale, self.e_scale = self._scales()
        self.r0 = 1e-7 * self.r_scale

    def _v_at_infinity(self) -> float:
        top = max(b for _, b in self.pot.terms)
        if top > 0:
            lead = sum(a for a, b in self.pot.terms if b == top)
            return math.inf if lead > 0 else -math.inf
        return 0.0

    def v_eff(self, r):
        return self.pot.value(r) + self.c / (2.0 * self.mu * r * r)

    def _scales(self):
        # uncertainty-principle estimate: minimize 1/(2 mu r^2) + V(r)
        def f(x):
            r = math.exp(x)
            return (self.s + 0.5) ** 2 / (2.0 * self.mu * r * r) + self.pot.value(r)

        grid = np.arange(-30.0, 30.0, 0.25)
        x0 = grid[int(np.argmin([f(x) for x in grid]))]
        best = minimize_scalar(f, bounds=(x0 - 0.25, x0 + 0.25), method="bounded")
        r = math.exp(best.x)
        return r, abs(best.fun) + (self.s + 0.5) ** 2 / (2.0 * self.mu * r * r)

    def _start(self, energy):
        """Series start ``u = r^s (1 + sum_k c_k r^{beta_k})`` one order beyond the leading term."""
        r, s = self.r0, self.s
        u, du = r ** s, s * r ** (s - 1.0)
        corrections = [(a, b + 2.0) for a, b in self.pot.terms] + [(-energy, 2.0)]
        for a, beta in corrections:
            denom = beta * (2.0 * s + beta - 1.0)
            if beta <= 0 or abs(denom) < 1e-12:
                continue
            coef = 2.0 * self.mu * a / denom
            u += coef * r ** (s + beta)
            du += coef * (s + beta) * r ** (s + beta - 1.0)
        return math.atan2(u, du)

    def _prufer(self, energy):
        # u = rho sin(theta), u' = rho cos(theta)  =>  theta' = cos^2 - g sin^2 with u'' = g u
        mu2, c, pot = 2.0 * self.mu, self.c, self.pot

        def rhs(r, y):
            g = c / (r * r) + mu2 * (pot.value(r) - energy)
            sn, cs = math.sin(y[0]), math.cos(y[0])
            return [cs * cs - g * sn * sn]
        return rhs

    def turning_point(self, energy) -> Optional[float]:
        """Outermost ``r`` with ``V_eff(r) = E``; ``None`` if ``E`` is below ``V_eff`` everywhere."""
        f = lambda x: self.v_eff(math.exp(x)) - energy
        x = math.log(self.r_scale)
        while f(x) <= 0:
            x += 0.5
            if x > 700:
                raise NoBindingError("energy above the potential at large distance")
        hi = x
        lo = hi
        while lo > math.log(self.r0):
            lo -= 0.25
            if f(lo) < 0:
                return math.exp(brentq(f, lo, hi, xtol=1e-14))
            hi = lo
        return None

    def outer_radius(self, energy, decay=40.0) -> float:
        """Radius where the WKB decay exponent beyond the turning point reaches ``decay``."""
        r = self.turning_point(energy) or self.r_scale
        total = 0.0
        step = 0.01 * r
        while total < decay and r < 1e6 * self.r_scale:
            mid = r + 0.5 * step
            kappa = math.sqrt(max(2.0 * self.mu * (self.v_eff(mid) - energy), 0.0))
            total += kappa * step
            r += step
            step *= 1.05
        return r

    def phase(self, energy, r_match, radius, rtol=None) -> float:
        """Total Prüfer phase of a solution regular at 0 and vanishing at ``radius``.

        Increasing in ``energy``; equals ``(n + 1) pi`` exactly at level ``n``.
        """
        tol = self.rtol if rtol is None else rtol
        rhs = self._prufer(energy)
        out = solve_ivp(rhs, (self.r0, r_match), [self._start(energy)],
                        method="DOP853", rtol=tol, atol=tol)
        inn = solve_ivp(rhs, (radius, r_match), [math.pi],
                        method="DOP853", rtol=tol, atol=tol)
        if out.status < 0 or inn.status < 0:
            raise ConvergenceError(f"radial integration failed: {out.message} / {inn.message}")
        return out.y[0, -1] + math.pi - inn.y[0, -1]


def _level(problem: _Radial, n: int, guess: float, width: float,
           r_match: float, radius: float, rtol: float) -> float:
    target = (n + 1) * math.pi
    cap = problem.v_inf
    f = lambda e: problem.phase(e, r_match, radius, rtol) - target

    def clip(e):
        return min(e, cap - 1e-12 * max(1.0, abs(cap))) if math.isfinite(cap) else e

    lo, hi = clip(guess - width), clip(guess + width)
    f_lo, f_hi = f(lo), f(hi)
    for _ in range(200):
        if f_lo < 0 < f_hi:
            break
        if f_lo >= 0:
            width *= 4.0
            lo, hi, f_hi = clip(guess - width), lo, f_lo
            f_lo = f(lo)
        elif f_hi <= 0:
            if math.isfinite(cap) and hi >= clip(cap):
                raise NoBindingError(f"fewer than {n + 1} bound states below the continuum")
            width *= 4.0
            lo, hi, f_lo = hi, clip(guess + width), f_hi
            f_hi = f(hi)
    else:
        raise ConvergenceError(f"could not bracket level n={n}")
    xtol = max(rtol, 1e-13) * max(abs(lo), abs(hi), 1e-300)
    return brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def _box(problem: _Radial, energy: float):
    r_match = problem.turning_point(energy) or problem.r_scale
    probe = energy if math.isfinite(problem.v_inf) else energy + 0.1 * problem.e_scale
    radius = problem.outer_radius(probe)
    return min(r_match, 0.5 * radius), radius


def _solve_radial(problem: _Radial, n: int, guess: Optional[float] = None) -> float:
    # loose pass on a wide bracket unless a guess is supplied, then tight passes
    # on a narrow bracket inside a box adapted to the level
    if guess is None:
        guess = problem.v_eff(problem.r_scale) + (n + 0.5) * problem.e_scale
        if math.isfinite(problem.v_inf):
            guess = min(guess, problem.v_inf - 0.1 * problem.e_scale / (n + 1) ** 2)
        loose = max(problem.rtol, 1e-6)
        guess = _level(problem, n, guess, problem.e_scale, *_box(problem, guess), loose)
    energy = guess
    for _ in range(2):
        width = 1e-4 * max(abs(energy), problem.e_scale * 1e-3)
        energy = _level(problem, n, energy, width, *_box(problem, energy), problem.rtol)
    return energy


def radial_two_body(
    mu: float,
    potential: PotentialLaw,
    dim: int = 3,
    n: int = 0,
    l: int = 0,
    rtol: float = 1e-10,
) -> OracleResult:
    """Level ``(n, l)`` of ``p^2 / (2 mu) + V(r)`` in ``dim`` dimensions.

    ``n`` is the number of radial nodes. The level is isolated by counting
    nodes of the outward solution and refined by matching outward and inward
    solutions at the outer turning point. ``est_accuracy`` is the relative
    change of the energy between a coarse (``rtol * 100``) and the requested
    integration tolerance.
    """
    if not mu > 0:
        raise InvalidInputError(f"reduced mass must be > 0, got {mu}")
    if dim not in (1, 2, 3):
        raise InvalidInputError(f"radial oracle supports D in {{1, 2, 3}}, got {dim}")
    if n < 0 or l < 0 or (dim == 1 and l > 1):
        raise InvalidInputError(f"invalid quantum numbers (n={n}, l={l}) for D={dim}")
    if min(b for _, b in potential.terms) <= -2.0:
        raise InvalidInputError("potentials as singular as 1/r^2 are not supported")
    fine = _solve_radial(_Radial(mu, potential, dim, l, rtol), n)
    coarse = _solve_radial(_Radial(mu, potential, dim, l, rtol * 1e2), n, guess=fine)
    est = abs(fine - coarse) / max(abs(fine), 1e-300)
    return OracleResult(energy=fine, method="radial-numeric", est_accuracy=est,
                        details={"n": n, "l": l, "dim": dim, "coarse": coarse})
