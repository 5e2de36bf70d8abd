"""Auxiliary-Hamiltonian route: locate the stationary point of ``E_ho + B``.

This path never touches the compact equations. It evaluates the harmonic
eigenvalue of the auxiliary Hamiltonian plus the constant ``B`` built from the
auxiliary inverses ``G`` and ``J``, searches for the auxiliary masses and
spring constants where every partial derivative vanishes, and rebuilds the
mean momenta and distances from the three decoupled oscillators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.optimize import least_squares, root

from .compact import SolverConfig, derived_means
from .errors import ConvergenceError, DegenerateLawError, EnvelopeError, InvalidInputError
from .model import AuxiliaryParameters, IdenticalSystemSpec, Solution, TwoSpeciesSystemSpec

__all__ = [
    "AuxiliaryEnergyBreakdown",
    "harmonic_eigenvalue",
    "b_function",
    "auxiliary_energy",
    "extremize",
]

Spec = Union[IdenticalSystemSpec, TwoSpeciesSystemSpec]
Params = Union[AuxiliaryParameters, Mapping[str, float]]

_PARAM_NAMES = ("mu_a", "mu_b", "rho_aa", "rho_bb", "rho_ab")
_PIN_RTOL = 1e-12
_SEED_SCALES = (1.0, 0.3, 3.0, 0.1, 10.0, 0.03, 30.0, 0.01, 100.0)


@dataclass(frozen=True)
class AuxiliaryEnergyBreakdown:
    e_ho: float
    b: float

    @property
    def total(self) -> float:
        return self.e_ho + self.b


def _values(params: Params) -> Dict[str, float]:
    if isinstance(params, AuxiliaryParameters):
        return {name: getattr(params, name) for name in _PARAM_NAMES}
    return {name: float(params[name]) for name in _PARAM_NAMES}


# ---------------------------------------------------------------------------
# energy pieces
# ---------------------------------------------------------------------------


def _ho_terms(spec: Spec, v: Mapping[str, float]) -> Tuple[float, float, float]:
    """Eigenvalues of the three decoupled oscillators (internal a, internal b, relative)."""
    if isinstance(spec, IdenticalSystemSpec):
        return spec.q * math.sqrt(2.0 * spec.n * v["rho_ab"] / v["mu_a"]), 0.0, 0.0
    na, nb = spec.n_a, spec.n_b
    e_a = e_b = 0.0
    if na > 1:
        e_a = spec.q_a * math.sqrt(2.0 / v["mu_a"] * (na * v["rho_aa"] + nb * v["rho_ab"]))
    if nb > 1:
        e_b = spec.q_b * math.sqrt(2.0 / v["mu_b"] * (nb * v["rho_bb"] + na * v["rho_ab"]))
    inv_mu = 1.0 / (na * v["mu_a"]) + 1.0 / (nb * v["mu_b"])
    e_rel = spec.q_rel * math.sqrt(2.0 * na * nb * v["rho_ab"] * inv_mu)
    return e_a, e_b, e_rel


def harmonic_eigenvalue(params: Params, spec: Spec) -> float:
    """Eigenvalue of the harmonic part of the auxiliary Hamiltonian.

    For an identical-particle spec only ``mu_a`` (mass) and ``rho_ab`` (pair
    spring constant) are read. A plain mapping may carry zero spring constants.
    """
    return sum(_ho_terms(spec, _values(params)))


def _kinetic_piece(kin, mu):
    """``T(G) - G^2 / (2 mu)`` and ``G``; zero for quadratic laws at their pinned mass."""
    pinned = kin.pinned_mass
    if pinned is not None:
        if abs(mu - pinned) > _PIN_RTOL * pinned:
            raise InvalidInputError(f"quadratic kinetic law needs mu = {pinned}, got {mu}")
        return 0.0, None
    g = kin.aux_inverse(mu)
    return kin.value(g) - g * g / (2.0 * mu), g


def _potential_piece(pot, rho):
    """``V(J) - rho J^2`` and ``J``; zero for harmonic laws at their pinned stiffness."""
    pinned = pot.pinned_stiffness
    if pinned is not None:
        if abs(rho - pinned) > _PIN_RTOL * abs(pinned):
            raise InvalidInputError(f"harmonic potential needs rho = {pinned}, got {rho}")
        return 0.0, None
    j = pot.aux_inverse(rho)
    return pot.value(j) - rho * j * j, j


def _b_pieces(spec: Spec, v: Mapping[str, float]):
    """Return ``(B, {"G_a": ..., "J_ab": ...})`` for the relevant parameters."""
    aux = {}
    if isinstance(spec, IdenticalSystemSpec):
        k, aux["G_a"] = _kinetic_piece(spec.kinetic, v["mu_a"])
        p, aux["J_ab"] = _potential_piece(spec.potential, v["rho_ab"])
        return spec.n * k + spec.pairs * p, aux
    na, nb = spec.n_a, spec.n_b
    ka, aux["G_a"] = _kinetic_piece(spec.kinetic_a, v["mu_a"])
    kb, aux["G_b"] = _kinetic_piece(spec.kinetic_b, v["mu_b"])
    b = na * ka + nb * kb
    if na > 1:
        paa, aux["J_aa"] = _potential_piece(spec.v_aa, v["rho_aa"])
        b += spec.pairs_a * paa
    if nb > 1:
        pbb, aux["J_bb"] = _potential_piece(spec.v_bb, v["rho_bb"])
        b += spec.pairs_b * pbb
    pab, aux["J_ab"] = _potential_piece(spec.v_ab, v["rho_ab"])
    return b + na * nb * pab, aux


def b_function(params: Params, spec: Spec) -> float:
    """Constant part ``B`` of the auxiliary Hamiltonian.

    Quadratic laws contribute nothing, but only at their pinned parameter
    (``mu = m``, ``rho = k``); any other value raises ``InvalidInputError``.
    """
    return _b_pieces(spec, _values(params))[0]


def auxiliary_energy(params: Params, spec: Spec) -> AuxiliaryEnergyBreakdown:
    v = _values(params)
    return AuxiliaryEnergyBreakdown(sum(_ho_terms(spec, v)), _b_pieces(spec, v)[0])


# ---------------------------------------------------------------------------
# stationary-point search
# ---------------------------------------------------------------------------


class _Landscape:
    """Energy and scaled gradient as functions of the free, transformed parameters.

    Free parameters are stored as ``t`` with ``x = floor + exp(t)``; pinned and
    irrelevant ones are held fixed.
    """

    def __init__(self, spec: Spec):
        self.spec = spec
        fixed: Dict[str, float] = {}
        floors: Dict[str, float] = {}
        if isinstance(spec, IdenticalSystemSpec):
            laws = {"mu_a": spec.kinetic, "rho_ab": spec.potential}
            fixed.update(mu_b=1.0, rho_aa=1.0, rho_bb=1.0)
        else:
            laws = {"mu_a": spec.kinetic_a, "mu_b": spec.kinetic_b, "rho_ab": spec.v_ab}
            for name, n, law in (("rho_aa", spec.n_a, spec.v_aa), ("rho_bb", spec.n_b, spec.v_bb)):
                if n > 1:
                    laws[name] = law
                else:
                    fixed[name] = 1.0
        for name, law in laws.items():
            pinned = law.pinned_mass if name.startswith("mu") else law.pinned_stiffness
            if pinned is not None:
                fixed[name] = pinned
            else:
                floors[name] = law.mu_floor if name.startswith("mu") else law.rho_floor
        self.laws = laws
        self.fixed = fixed
        self.free = [name for name in _PARAM_NAMES if name not in fixed]
        self.floors = {name: floors.get(name, 0.0) for name in self.free}

    def values(self, t) -> Dict[str, float]:
        v = dict(self.fixed)
        for name, ti in zip(self.free, t):
            v[name] = self.floors[name] + math.exp(ti)
        return v

    def transform(self, v: Mapping[str, float]) -> np.ndarray:
        return np.array([math.log(v[name] - self.floors[name]) for name in self.free])

    def energy(self, t) -> float:
        v = self.values(t)
        return sum(_ho_terms(self.spec, v)) + _b_pieces(self.spec, v)[0]

    def contributions(self, v: Mapping[str, float]) -> Dict[str, List[float]]:
        """Signed pieces of ``x * dE/dx`` for every free parameter ``x``.

        The ``B`` derivatives collapse thanks to the defining relations of
        ``G`` and ``J``: ``d/dmu [T(G) - G^2/2mu] = G^2 / 2mu^2`` and
        ``d/drho [V(J) - rho J^2] = -J^2``.
        """
        spec = self.spec
        _, aux = _b_pieces(spec, v)
        e_a, e_b, e_rel = _ho_terms(spec, v)
        out: Dict[str, List[float]] = {}
        if isinstance(spec, IdenticalSystemSpec):
            n, c = spec.n, spec.pairs
            if "mu_a" in self.free:
                g = aux["G_a"]
                out["mu_a"] = [-e_a / 2.0, n * g * g / (2.0 * v["mu_a"])]
            if "rho_ab" in self.free:
                j = aux["J_ab"]
                out["rho_ab"] = [e_a / 2.0, -c * j * j * v["rho_ab"]]
            return out

        na, nb = spec.n_a, spec.n_b
        ma, mb = na * v["mu_a"], nb * v["mu_b"]
        if "mu_a" in self.free:
            g = aux["G_a"]
            out["mu_a"] = [-e_a / 2.0, -e_rel / 2.0 * mb / (ma + mb), na * g * g / (2.0 * v["mu_a"])]
        if "mu_b" in self.free:
            g = aux["G_b"]
            out["mu_b"] = [-e_b / 2.0, -e_rel / 2.0 * ma / (ma + mb), nb * g * g / (2.0 * v["mu_b"])]
        s_a = na * v["rho_aa"] + nb * v["rho_ab"]
        s_b = nb * v["rho_bb"] + na * v["rho_ab"]
        if "rho_aa" in self.free:
            j = aux["J_aa"]
            out["rho_aa"] = [e_a * na * v["rho_aa"] / (2.0 * s_a), -spec.pairs_a * j * j * v["rho_aa"]]
        if "rho_bb" in self.free:
            j = aux["J_bb"]
            out["rho_bb"] = [e_b * nb * v["rho_bb"] / (2.0 * s_b), -spec.pairs_b * j * j * v["rho_bb"]]
        if "rho_ab" in self.free:
            j = aux["J_ab"]
            rho = v["rho_ab"]
            pieces = [e_rel / 2.0, -na * nb * j * j * rho]
            if na > 1:
                pieces.append(e_a * nb * rho / (2.0 * s_a))
            if nb > 1:
                pieces.append(e_b * na * rho / (2.0 * s_b))
            out["rho_ab"] = pieces
        return out

    def scaled_gradient(self, t) -> np.ndarray:
        try:
            pieces = self.contributions(self.values(t))
        except (EnvelopeError, OverflowError, ZeroDivisionError, ValueError):
            return np.full(len(self.free), np.nan)
        out = np.empty(len(self.free))
        for i, name in enumerate(self.free):
            terms = pieces[name]
            scale = sum(abs(x) for x in terms)
            out[i] = sum(terms) / scale if scale > 0 else 0.0
        return out


def _seed_values(landscape: _Landscape, p_scale: float) -> Dict[str, float]:
    """Auxiliary parameters reproducing a momentum scale ``p_scale`` and matching distances."""
    spec = landscape.spec
    if isinstance(spec, IdenticalSystemSpec):
        q_total = spec.q
    else:
        q_total = spec.q_a + spec.q_b + spec.q_rel
    r_scale = max(q_total, 0.5) / p_scale
    v = dict(landscape.fixed)
    for name in landscape.free:
        law = landscape.laws[name]
        if name.startswith("mu"):
            # G(mu) = p  <=>  mu = p / T'(p)
            v[name] = p_scale / law.derivative(p_scale)
        else:
            # J(rho) = r  <=>  rho = V'(r) / (2 r)
            slope = law.derivative(r_scale)
            v[name] = slope / (2.0 * r_scale) if slope > 0 else 1.0
        floor = landscape.floors[name]
        if v[name] <= floor:
            v[name] = floor * (1.0 + 1e-3) + 1e-12
    return v


def _find_stationary(landscape: _Landscape, cfg: SolverConfig):
    """Root of the scaled gradient from a ladder of seeds; returns ``(t, grad, evaluations, seed)``."""
    best = None
    for p_scale in _SEED_SCALES:
        try:
            t0 = landscape.transform(_seed_values(landscape, p_scale))
        except (EnvelopeError, ValueError, ZeroDivisionError, OverflowError):
            continue
        if not np.all(np.isfinite(landscape.scaled_gradient(t0))):
            continue
        sol = root(landscape.scaled_gradient, t0, method="hybr", options={"xtol": 1e-14, "maxfev": 200 * (len(t0) + 1)})
        t, evaluations = sol.x, sol.nfev
        g = landscape.scaled_gradient(t)
        if not (np.all(np.isfinite(g)) and np.max(np.abs(g)) <= cfg.tol):
            # gradient-norm descent handles seeds where the hybrid step stalls
            fit = least_squares(
                landscape.scaled_gradient, t if np.all(np.isfinite(g)) else t0,
                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=cfg.max_iter * 20,
            )
            t, evaluations = fit.x, evaluations + fit.nfev
            g = landscape.scaled_gradient(t)
        if not np.all(np.isfinite(g)):
            continue
        norm = float(np.max(np.abs(g)))
        if best is None or norm < best[1]:
            best = (t, norm, g, evaluations, p_scale)
        if norm <= cfg.tol:
            break
    if best is None or best[1] > cfg.tol:
        residual = None if best is None else best[2]
        raise ConvergenceError(
            f"no stationary point of the auxiliary energy found "
            f"(best scaled gradient {math.inf if best is None else best[1]:.3g})",
            residual=residual,
        )
    t, _, g, evaluations, p_scale = best
    return t, g, evaluations, p_scale


def _means(spec: Spec, v: Mapping[str, float]) -> Dict[str, float]:
    """Mean momenta and distances from the virial theorem of each decoupled oscillator."""
    e_a, e_b, e_rel = _ho_terms(spec, v)
    if isinstance(spec, IdenticalSystemSpec):
        p0 = math.sqrt(v["mu_a"] * e_a / spec.n)
        rho0 = math.sqrt(e_a / (2.0 * spec.pairs * v["rho_ab"]))
        return {"p0": p0, "rho0": rho0}
    na, nb = spec.n_a, spec.n_b
    p_a = r_aa = p_b = r_bb = 0.0
    if na > 1:
        p_a = math.sqrt(v["mu_a"] * e_a / na)
        r_aa = math.sqrt(e_a / (2.0 * spec.pairs_a * (v["rho_aa"] + nb / na * v["rho_ab"])))
    if nb > 1:
        p_b = math.sqrt(v["mu_b"] * e_b / nb)
        r_bb = math.sqrt(e_b / (2.0 * spec.pairs_b * (v["rho_bb"] + na / nb * v["rho_ab"])))
    ma, mb = na * v["mu_a"], nb * v["mu_b"]
    P0 = math.sqrt(ma * mb / (ma + mb) * e_rel)
    R0 = math.sqrt(e_rel / (2.0 * na * nb * v["rho_ab"]))
    return derived_means(spec, p_a, p_b, r_aa, r_bb, P0, R0)


def extremize(spec: Spec, cfg: Optional[SolverConfig] = None) -> Tuple[Solution, AuxiliaryParameters]:
    """Stationary point of the auxiliary energy.

    Returns the solution (energy and reconstructed means, method
    ``"extremization"``) together with the auxiliary parameters at the
    stationary point. Quadratic laws keep their parameter pinned and are left
    out of the search. For identical-particle specs the parameters are
    reported as ``mu_a = mu_b`` and ``rho_aa = rho_bb = rho_ab``.
    """
    cfg = cfg or SolverConfig()
    landscape = _Landscape(spec)
    if landscape.free:
        t, g, evaluations, p_scale = _find_stationary(landscape, cfg)
        norm = float(np.max(np.abs(g)))
    else:
        t, evaluations, p_scale, norm = np.array([]), 0, None, 0.0
    v = landscape.values(t)
    if isinstance(spec, IdenticalSystemSpec):
        v.update(mu_b=v["mu_a"], rho_aa=v["rho_ab"], rho_bb=v["rho_ab"])
    solution = Solution(
        energy=landscape.energy(t),
        means=_means(spec, v),
        residual_norm=norm,
        iterations=int(evaluations),
        method="extremization",
        diagnostics={"free": list(landscape.free), "seed_momentum": p_scale},
    )
    return solution, AuxiliaryParameters(**v)
