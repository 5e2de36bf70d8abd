"""Root-finding solvers for the compact equations of the envelope theory.

Four equation sets are handled:

* ``N`` identical particles: energy, one virial equation, one quantization
  rule in the unknowns ``(p0, rho0)``;
* ``N_a + N_b`` particles: energy, three virial equations, three quantization
  rules in ``(p_a, p_b, P0, r_aa, r_bb, R0)``;
* the ``N_a + 1`` and two-body reductions of the latter.

In every case the quantization rules are used to eliminate the distances, so
they hold exactly and only the virial equations are solved numerically.
Residuals are reported scaled as ``(lhs - rhs) / (|lhs| + |rhs|)``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, EnvelopeError, InvalidInputError, NoBindingError
from .model import IdenticalSystemSpec, Solution, TwoSpeciesSystemSpec

__all__ = [
    "SolverConfig",
    "solve",
    "solve_identical",
    "solve_two_species",
    "solve_na_plus_one",
    "solve_two_body",
    "residuals",
    "energy_from_means",
    "derived_means",
    "RESIDUAL_ORDER",
]

Spec = Union[IdenticalSystemSpec, TwoSpeciesSystemSpec]

DEFAULT_TOL = 1e-10

# the 1D scan covers p in seed * [1e-12, 1e12]
_LOG_SPAN = math.log(1e12)
# relative step of the finite-difference Jacobian (the unknowns live in log space)
_FD_STEP = 1e-6
# largest Newton step in log space
_MAX_LOG_STEP = 2.0


def _default_tol() -> float:
    raw = os.environ.get("ET_SOLVER_TOL")
    if raw is None:
        return DEFAULT_TOL
    try:
        tol = float(raw)
    except ValueError:
        raise InvalidInputError(f"ET_SOLVER_TOL is not a number: {raw!r}") from None
    if not tol > 0:
        raise InvalidInputError(f"ET_SOLVER_TOL must be > 0, got {tol}")
    return tol


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs shared by the compact and extremization solvers.

    ``tol`` defaults to ``ET_SOLVER_TOL`` from the environment when set.
    """

    tol: float = field(default_factory=_default_tol)
    max_iter: int = 200
    bracket_growth: float = 2.0
    damping: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.tol) and self.tol > 0):
            raise InvalidInputError(f"tol must be > 0, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidInputError(f"max_iter must be a positive integer, got {self.max_iter}")
        if not self.bracket_growth > 1:
            raise InvalidInputError(f"bracket_growth must be > 1, got {self.bracket_growth}")
        if not 0 < self.damping <= 1:
            raise InvalidInputError(f"damping must lie in (0, 1], got {self.damping}")


def _rel(lhs: float, rhs: float) -> float:
    scale = abs(lhs) + abs(rhs)
    if scale == 0.0:
        return 0.0
    return (lhs - rhs) / scale


def _safe(f, s):
    try:
        value = f(s)
    except (OverflowError, ZeroDivisionError, ValueError):
        return math.nan
    return value if math.isfinite(value) else math.nan


# ---------------------------------------------------------------------------
# scalar problems: identical particles and two bodies
# ---------------------------------------------------------------------------


def _solve_scalar(residual, energy, cfg: SolverConfig, what: str, center: float = 0.0):
    """Find every sign change of ``residual(s)`` on a geometric grid and refine it.

    Returns ``(s, energy, residual, iterations, n_roots)`` for the lowest-energy root.
    """
    step = math.log(cfg.bracket_growth)
    k = int(math.ceil(_LOG_SPAN / step))
    grid = [center + i * step for i in range(-k, k + 1)]
    values = [_safe(residual, s) for s in grid]
    finite = [abs(v) for v in values if not math.isnan(v)]
    if finite and max(finite) <= 1e-12:
        # scale-free: kinetic and potential terms balance at every size
        raise NoBindingError(f"{what}: virial equation holds at every scale (critical coupling)")

    found = []
    for i in range(len(grid) - 1):
        a, b = values[i], values[i + 1]
        if math.isnan(a) or math.isnan(b):
            continue
        if a == 0.0:
            found.append((grid[i], 0))
            continue
        if a * b < 0:
            try:
                s, info = brentq(
                    residual, grid[i], grid[i + 1],
                    xtol=1e-14, rtol=4 * np.finfo(float).eps,
                    maxiter=cfg.max_iter, full_output=True,
                )
            except RuntimeError as exc:
                raise ConvergenceError(f"{what}: {exc}", residual=min(abs(a), abs(b))) from None
            found.append((s, info.iterations))
    if not found:
        raise NoBindingError(f"{what}: no bracketing interval, the system does not bind")

    best = min(found, key=lambda item: energy(item[0]))
    s, iterations = best
    res = abs(residual(s))
    if res > cfg.tol:
        raise ConvergenceError(f"{what}: residual {res:.3g} above tolerance {cfg.tol:.3g}", residual=res)
    return s, energy(s), res, iterations, len(found)


def solve_identical(spec: IdenticalSystemSpec, cfg: Optional[SolverConfig] = None) -> Solution:
    """Solve the three compact equations for ``N`` identical particles.

    ``rho0`` is eliminated through ``Q = sqrt(C) p0 rho0`` and the virial
    equation ``N T'(p0) p0 = C V'(rho0) rho0`` is bracketed and solved in
    ``log p0``. When several roots exist the lowest energy wins and
    ``diagnostics["ambiguous"]`` is set.
    """
    cfg = cfg or SolverConfig()
    n, c, q = spec.n, spec.pairs, spec.q
    sqrt_c = math.sqrt(c)
    kin, pot = spec.kinetic, spec.potential

    def residual(s):
        p = math.exp(s)
        rho = q / (sqrt_c * p)
        return _rel(n * kin.derivative(p) * p, c * pot.derivative(rho) * rho)

    def energy(s):
        p = math.exp(s)
        return n * kin.value(p) + c * pot.value(q / (sqrt_c * p))

    s, e, res, iterations, n_roots = _solve_scalar(residual, energy, cfg, "identical-particle system")
    p0 = math.exp(s)
    return Solution(
        energy=e,
        means={"p0": p0, "rho0": q / (sqrt_c * p0)},
        residual_norm=res,
        iterations=iterations,
        method="compact-identical",
        diagnostics={"roots": n_roots, "ambiguous": n_roots > 1},
    )


# ---------------------------------------------------------------------------
# two species
# ---------------------------------------------------------------------------

#: residual layout returned by :func:`residuals`
RESIDUAL_ORDER = {
    "identical": ("energy", "virial", "quant"),
    "two-species": ("energy", "virial_a", "virial_b", "virial_rel", "quant_a", "quant_b", "quant_rel"),
    "na-plus-1": ("energy", "virial_a", "virial_rel", "quant_a", "quant_rel"),
    "two-body": ("energy", "virial_rel", "quant_rel"),
}


def derived_means(spec: TwoSpeciesSystemSpec, p_a, p_b, r_aa, r_bb, P0, R0) -> Dict[str, float]:
    """Complete the six physical parameters with ``p'_a``, ``p'_b`` and ``r'_0``."""
    na, nb = spec.n_a, spec.n_b
    r0p_sq = R0 * R0
    if na > 1:
        r0p_sq += (na - 1) / (2.0 * na) * r_aa * r_aa
    if nb > 1:
        r0p_sq += (nb - 1) / (2.0 * nb) * r_bb * r_bb
    return {
        "p_a": p_a,
        "p_b": p_b,
        "p_prime_a": math.hypot(p_a, P0 / na),
        "p_prime_b": math.hypot(p_b, P0 / nb),
        "r_aa": r_aa,
        "r_bb": r_bb,
        "r_prime_0": math.sqrt(r0p_sq),
        "P0": P0,
        "R0": R0,
    }


def _quantized_means(spec: TwoSpeciesSystemSpec, p_a: float, p_b: float, P0: float) -> Dict[str, float]:
    # distances from the quantization rules; absent species keep p = r = 0
    r_aa = spec.q_a / (math.sqrt(spec.pairs_a) * p_a) if spec.n_a > 1 else 0.0
    r_bb = spec.q_b / (math.sqrt(spec.pairs_b) * p_b) if spec.n_b > 1 else 0.0
    if spec.n_a == 1:
        p_a = 0.0
    if spec.n_b == 1:
        p_b = 0.0
    return derived_means(spec, p_a, p_b, r_aa, r_bb, P0, spec.q_rel / P0)


def energy_from_means(spec: Spec, means: Mapping[str, float]) -> float:
    """Evaluate the compact energy equation at the given mean quantities."""
    if isinstance(spec, IdenticalSystemSpec):
        return spec.n * spec.kinetic.value(means["p0"]) + spec.pairs * spec.potential.value(means["rho0"])
    na, nb = spec.n_a, spec.n_b
    e = na * spec.kinetic_a.value(means["p_prime_a"]) + nb * spec.kinetic_b.value(means["p_prime_b"])
    if na > 1:
        e += spec.pairs_a * spec.v_aa.value(means["r_aa"])
    if nb > 1:
        e += spec.pairs_b * spec.v_bb.value(means["r_bb"])
    return e + na * nb * spec.v_ab.value(means["r_prime_0"])


def _virials(spec: TwoSpeciesSystemSpec, m: Mapping[str, float]) -> Dict[str, float]:
    na, nb = spec.n_a, spec.n_b
    ta, tb = spec.kinetic_a, spec.kinetic_b
    ppa, ppb, r0p = m["p_prime_a"], m["p_prime_b"], m["r_prime_0"]
    P0, R0 = m["P0"], m["R0"]
    dvab = spec.v_ab.derivative(r0p)
    dta, dtb = ta.derivative(ppa), tb.derivative(ppb)
    out = {}
    if na > 1:
        ca, r_aa = spec.pairs_a, m["r_aa"]
        out["virial_a"] = _rel(
            na * dta * m["p_a"] ** 2 / ppa,
            ca * spec.v_aa.derivative(r_aa) * r_aa + nb / na * ca * dvab * r_aa * r_aa / r0p,
        )
    if nb > 1:
        cb, r_bb = spec.pairs_b, m["r_bb"]
        out["virial_b"] = _rel(
            nb * dtb * m["p_b"] ** 2 / ppb,
            cb * spec.v_bb.derivative(r_bb) * r_bb + na / nb * cb * dvab * r_bb * r_bb / r0p,
        )
    out["virial_rel"] = _rel(
        dta * P0 * P0 / (na * ppa) + dtb * P0 * P0 / (nb * ppb),
        na * nb * dvab * R0 * R0 / r0p,
    )
    return out


def _layout(spec: Spec) -> str:
    if isinstance(spec, IdenticalSystemSpec):
        return "identical"
    if spec.n_a == 1 and spec.n_b == 1:
        return "two-body"
    if spec.n_a == 1 or spec.n_b == 1:
        return "na-plus-1"
    return "two-species"


def residuals(spec: Spec, means: Mapping[str, float], energy: Optional[float] = None) -> np.ndarray:
    """Scaled left-minus-right residuals of the compact equations.

    The order is ``RESIDUAL_ORDER[layout]`` where the layout follows the
    particle counts ("identical", "two-species", "na-plus-1", "two-body"; for
    ``n_a == 1 < n_b`` the a/b labels keep their meaning, so ``virial_a`` and
    ``quant_a`` refer to species b). For two species ``means`` needs the six
    parameters ``p_a, p_b, r_aa, r_bb, P0, R0``; the primed combinations are
    recomputed. The energy entry compares ``energy`` to the energy equation and
    is 0 when ``energy`` is omitted.
    """
    layout = _layout(spec)
    if layout == "identical":
        n, c, q = spec.n, spec.pairs, spec.q
        p0, rho0 = means["p0"], means["rho0"]
        e_def = 0.0 if energy is None else _rel(energy, energy_from_means(spec, means))
        return np.array([
            e_def,
            _rel(n * spec.kinetic.derivative(p0) * p0, c * spec.potential.derivative(rho0) * rho0),
            _rel(q, math.sqrt(c) * p0 * rho0),
        ])

    full = derived_means(
        spec, means.get("p_a", 0.0), means.get("p_b", 0.0),
        means.get("r_aa", 0.0), means.get("r_bb", 0.0), means["P0"], means["R0"],
    )
    vir = _virials(spec, full)
    e_def = 0.0 if energy is None else _rel(energy, energy_from_means(spec, full))
    values = {"energy": e_def, **vir, "quant_rel": _rel(spec.q_rel, full["P0"] * full["R0"])}
    if spec.n_a > 1:
        values["quant_a"] = _rel(spec.q_a, math.sqrt(spec.pairs_a) * full["p_a"] * full["r_aa"])
    if spec.n_b > 1:
        values["quant_b"] = _rel(spec.q_b, math.sqrt(spec.pairs_b) * full["p_b"] * full["r_bb"])
    if layout == "na-plus-1" and spec.n_a == 1:
        # report the many-particle species under the "a" slots
        values["virial_a"], values["quant_a"] = values.pop("virial_b"), values.pop("quant_b")
    return np.array([values[name] for name in RESIDUAL_ORDER[layout]])


class _Unknowns:
    """Maps the log-space unknown vector of a two-species problem to means."""

    def __init__(self, spec: TwoSpeciesSystemSpec):
        self.spec = spec
        self.names = [name for name, n in (("p_a", spec.n_a), ("p_b", spec.n_b)) if n > 1] + ["P0"]
        self.equations = ["virial_" + name[-1] if name != "P0" else "virial_rel" for name in self.names]

    def means(self, s) -> Dict[str, float]:
        values = dict(zip(self.names, (float(v) for v in np.exp(s))))
        return _quantized_means(self.spec, values.get("p_a", 0.0), values.get("p_b", 0.0), values["P0"])

    def residual(self, s) -> np.ndarray:
        try:
            vir = _virials(self.spec, self.means(s))
            out = np.array([vir[name] for name in self.equations])
        except (OverflowError, ZeroDivisionError, ValueError):
            return np.full(len(self.names), np.nan)
        return out

    def energy(self, s) -> float:
        return energy_from_means(self.spec, self.means(s))


def _merit(r: np.ndarray) -> float:
    return float(np.dot(r, r)) if np.all(np.isfinite(r)) else math.inf


def _fd_jacobian(f, s: np.ndarray) -> np.ndarray:
    jac = np.empty((len(s), len(s)))
    for j in range(len(s)):
        step = np.zeros_like(s)
        step[j] = _FD_STEP
        jac[:, j] = (f(s + step) - f(s - step)) / (2 * _FD_STEP)
    return jac


class _Stagnated(Exception):
    def __init__(self, s, r):
        self.s, self.r = s, r


def _damped_newton(f, s0, cfg: SolverConfig):
    """Damped Newton iteration; returns ``(s, r, iterations)``.

    Raises :class:`_Stagnated` when no damped step reduces ``|f|^2``.
    """
    s = np.asarray(s0, dtype=float)
    r = f(s)
    merit = _merit(r)
    if not math.isfinite(merit):
        raise _Stagnated(s, r)
    polished = False
    for it in range(1, cfg.max_iter + 1):
        converged = np.max(np.abs(r)) <= cfg.tol
        if converged and polished:
            return s, r, it - 1
        jac = _fd_jacobian(f, s)
        try:
            ds = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            ds = np.linalg.lstsq(jac, -r, rcond=None)[0]
        if not np.all(np.isfinite(ds)):
            if converged:
                return s, r, it - 1
            raise _Stagnated(s, r)
        biggest = np.max(np.abs(ds))
        if biggest > _MAX_LOG_STEP:
            ds *= _MAX_LOG_STEP / biggest
        lam = cfg.damping
        while True:
            trial = s + lam * ds
            rt = f(trial)
            mt = _merit(rt)
            if mt < merit or lam < 1e-10:
                break
            lam *= 0.5
        if not mt < merit:
            if converged:
                return s, r, it - 1
            raise _Stagnated(s, r)
        s, r, merit = trial, rt, mt
        # one extra step past the tolerance tightens the root to near round-off
        polished = converged
    if np.max(np.abs(r)) <= cfg.tol:
        return s, r, cfg.max_iter
    raise _Stagnated(s, r)


def _bracket_1d(g, s0: float, cfg: SolverConfig):
    """Expand geometrically around ``s0`` until ``g`` changes sign; return the root."""
    step = math.log(cfg.bracket_growth)
    lo, hi = s0 - step, s0 + step
    g_lo, g_hi = _safe(g, lo), _safe(g, hi)
    width = step
    while not (g_lo * g_hi <= 0):
        width *= 2.0
        if width > 2 * _LOG_SPAN:
            raise NoBindingError("no sign change while bracketing a virial equation")
        lo, hi = s0 - width, s0 + width
        g_lo, g_hi = _safe(g, lo), _safe(g, hi)
        if math.isnan(g_lo) or math.isnan(g_hi):
            continue
    try:
        return brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=cfg.max_iter)
    except RuntimeError as exc:
        raise ConvergenceError(f"bracketed virial solve: {exc}") from None


def _sweeps(unknowns: _Unknowns, s0, cfg: SolverConfig):
    """Coordinate-wise bisection sweeps: each virial equation solved for its own unknown."""
    s = np.array(s0, dtype=float)
    for sweep in range(1, cfg.max_iter + 1):
        for i in range(len(s)):
            def g(x, i=i):
                trial = s.copy()
                trial[i] = x
                return float(unknowns.residual(trial)[i])
            s[i] = _bracket_1d(g, s[i], cfg)
        r = unknowns.residual(s)
        if np.max(np.abs(r)) <= cfg.tol:
            return s, r, sweep
    raise ConvergenceError(
        "coordinate sweeps did not converge", residual=unknowns.residual(s)
    )


def _seed(spec: TwoSpeciesSystemSpec, unknowns: _Unknowns, cfg: SolverConfig) -> np.ndarray:
    # each species alone, feeling its own pairs plus its share of the a-b springs
    seeds = {}
    for name, n, kin, v_own, weight, q in (
        ("p_a", spec.n_a, spec.kinetic_a, spec.v_aa, spec.n_b / spec.n_a, spec.q_a),
        ("p_b", spec.n_b, spec.kinetic_b, spec.v_bb, spec.n_a / spec.n_b, spec.q_b),
    ):
        if n == 1:
            continue
        try:
            sub = IdenticalSystemSpec(n, spec.dim, kin, v_own.plus(spec.v_ab, weight), q)
            seeds[name] = math.log(solve_identical(sub, cfg).means["p0"])
        except EnvelopeError:
            seeds[name] = 0.0
    s = np.array([seeds.get(name, 0.0) for name in unknowns.names])

    # relative motion of the two centres of mass with the internal momenta frozen
    def g(x):
        trial = s.copy()
        trial[-1] = x
        return float(unknowns.residual(trial)[-1])

    try:
        s[-1] = _bracket_1d(g, 0.0, cfg)
    except (EnvelopeError, ValueError, RuntimeError):
        s[-1] = 0.0
    return s


def _solve_newton(spec: TwoSpeciesSystemSpec, cfg: SolverConfig, method: str) -> Solution:
    unknowns = _Unknowns(spec)
    s0 = _seed(spec, unknowns, cfg)
    route = "newton"
    try:
        s, r, iterations = _damped_newton(unknowns.residual, s0, cfg)
    except _Stagnated as stuck:
        route = "sweeps"
        start = stuck.s if np.all(np.isfinite(stuck.r)) else s0
        s, r, iterations = _sweeps(unknowns, start, cfg)
        try:
            # sweeps converge linearly; let Newton finish from there
            s, r, extra = _damped_newton(unknowns.residual, s, cfg)
            iterations += extra
        except _Stagnated:
            pass
    means = unknowns.means(s)
    return Solution(
        energy=energy_from_means(spec, means),
        means=means,
        residual_norm=float(np.max(np.abs(r))),
        iterations=iterations,
        method=method,
        diagnostics={"route": route, "seed": dict(zip(unknowns.names, (float(v) for v in np.exp(s0))))},
    )


def solve_two_species(spec: TwoSpeciesSystemSpec, cfg: Optional[SolverConfig] = None) -> Solution:
    """Solve the seven compact equations of an ``N_a + N_b`` system.

    The quantization rules fix ``r_aa``, ``r_bb`` and ``R0``; the three virial
    equations are solved for ``(p_a, p_b, P0)`` by damped Newton in log
    space, seeded from the decoupled single-species problems. Counts equal to
    one are rerouted to :func:`solve_na_plus_one` / :func:`solve_two_body`.
    """
    cfg = cfg or SolverConfig()
    if spec.n_a == 1 and spec.n_b == 1:
        return solve_two_body(spec, cfg)
    if spec.n_a == 1 or spec.n_b == 1:
        return solve_na_plus_one(spec, cfg)
    return _solve_newton(spec, cfg, "compact-two-species")


def solve_na_plus_one(spec: TwoSpeciesSystemSpec, cfg: Optional[SolverConfig] = None) -> Solution:
    """``N_a + 1`` system: two virial equations in ``(p_a, P0)``, ``p_b = 0``.

    Either species may be the single one; the means keep their a/b labels.
    """
    cfg = cfg or SolverConfig()
    if (spec.n_a == 1) == (spec.n_b == 1):
        raise InvalidInputError(
            f"solve_na_plus_one needs exactly one single-particle species, got ({spec.n_a}, {spec.n_b})"
        )
    return _solve_newton(spec, cfg, "compact-na-plus-1")


def solve_two_body(spec: TwoSpeciesSystemSpec, cfg: Optional[SolverConfig] = None) -> Solution:
    """Two distinct bodies: ``(T_a' + T_b')(P0) P0 = V'(R0) R0`` with ``Q = P0 R0``."""
    cfg = cfg or SolverConfig()
    if spec.n_a != 1 or spec.n_b != 1:
        raise InvalidInputError(f"solve_two_body needs n_a = n_b = 1, got ({spec.n_a}, {spec.n_b})")
    ta, tb, v, q = spec.kinetic_a, spec.kinetic_b, spec.v_ab, spec.q_rel

    def residual(s):
        p = math.exp(s)
        r = q / p
        return _rel((ta.derivative(p) + tb.derivative(p)) * p, v.derivative(r) * r)

    def energy(s):
        p = math.exp(s)
        return ta.value(p) + tb.value(p) + v.value(q / p)

    s, e, res, iterations, n_roots = _solve_scalar(residual, energy, cfg, "two-body system")
    P0 = math.exp(s)
    return Solution(
        energy=e,
        means=derived_means(spec, 0.0, 0.0, 0.0, 0.0, P0, q / P0),
        residual_norm=res,
        iterations=iterations,
        method="compact-two-body",
        diagnostics={"roots": n_roots, "ambiguous": n_roots > 1},
    )


def solve(spec: Spec, cfg: Optional[SolverConfig] = None) -> Solution:
    """Dispatch to the compact solver matching the particle counts."""
    if isinstance(spec, IdenticalSystemSpec):
        return solve_identical(spec, cfg)
    if isinstance(spec, TwoSpeciesSystemSpec):
        return solve_two_species(spec, cfg)
    raise InvalidInputError(f"unsupported spec type {type(spec).__name__}")
