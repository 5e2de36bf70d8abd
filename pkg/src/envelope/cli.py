"""Config-driven command-line front end.

Usage::

    envelope solve    --config ho3.cfg [--out record.json]
    envelope scan     --config ho.cfg --scan-var n --from 2 --to 10 --steps 9 [--out scan.csv]
    envelope compare  --config coulomb2.cfg
    envelope validate

A config file is a flat list of ``key = value`` lines with dotted keys;
``#`` starts a comment. Identical particles::

    system.type = identical
    system.dim = 3
    particles.count = 3
    kinetic.form = nonrelativistic
    kinetic.mass = 1
    potential.form = harmonic
    potential.coef = 1

Two species use ``species.a.count``, ``species.a.kinetic.form``, ...,
``potential.aa.form``, ``potential.ab.coef``, ... and ``quantum.q_a``,
``quantum.q_b``, ``quantum.q_rel``. Solver overrides live under ``solver.``
and the printed quantities under ``output.quantities``.

Exit codes: 0 success, 1 failed validation check, 2 configuration error,
3 solver non-convergence, 4 no bound state.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import laws
from .compact import RESIDUAL_ORDER, SolverConfig, _layout, residuals, solve
from .errors import ConfigError, ConvergenceError, EnvelopeError, InvalidInputError, NoBindingError
from .extremization import extremize
from .model import IdenticalSystemSpec, Solution, TwoSpeciesSystemSpec, global_quantum_number
from .oracle import OracleResult, exact_ho_energy, radial_two_body

__all__ = [
    "RunConfig",
    "parse_config",
    "load_config",
    "scan_points",
    "write_csv",
    "read_csv",
    "build_parser",
    "main",
    "EXIT_OK",
    "EXIT_CHECK_FAILED",
    "EXIT_CONFIG",
    "EXIT_CONVERGENCE",
    "EXIT_NO_BINDING",
]

Spec = Union[IdenticalSystemSpec, TwoSpeciesSystemSpec]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_NO_BINDING = 4

SCAN_VARS = ("n", "n_a", "n_b", "q", "coupling")
_INTEGER_VARS = {"n", "n_a", "n_b"}

IDENTICAL_MEANS = ("p0", "rho0")
TWO_SPECIES_MEANS = ("p_a", "p_b", "p_prime_a", "p_prime_b", "r_aa", "r_bb", "r_prime_0", "P0", "R0")
_QUANTITY_GROUPS = ("energy", "means", "residuals", "residual_norm", "method", "diagnostics")


def _fmt(x: float) -> str:
    return "%.17g" % x


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


class _Keys:
    """Raw key/value table that remembers which keys were consumed."""

    def __init__(self, raw: Dict[str, str]):
        self.raw = dict(raw)
        self.used = set()

    def has(self, key: str) -> bool:
        return key in self.raw

    def get(self, key: str, conv: Callable = str, default=None, required: bool = False):
        if key not in self.raw:
            if required:
                raise ConfigError(f"missing required key {key!r}")
            return default
        self.used.add(key)
        text = self.raw[key]
        try:
            return conv(text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {text!r} ({exc})") from None

    def leftovers(self) -> List[str]:
        return sorted(set(self.raw) - self.used)


def _int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError("expected an integer")
    return int(value)


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("expected a finite number")
    return value


def _terms(text: str) -> Tuple[Tuple[float, float], ...]:
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        a, b = chunk.split(":")
        out.append((_float(a), _float(b)))
    return tuple(out)


def _numbers(text: str) -> List[Tuple[int, int]]:
    out = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if chunk:
            n, l = chunk.split(":")
            out.append((_int(n), _int(l)))
    return out


def _kinetic(keys: _Keys, prefix: str) -> laws.KineticLaw:
    form = keys.get(f"{prefix}.form", str.lower, required=True)
    if form == "nonrelativistic":
        return laws.NonRelativistic(keys.get(f"{prefix}.mass", _float, required=True))
    if form == "relativistic":
        return laws.Relativistic(keys.get(f"{prefix}.mass", _float, default=0.0))
    if form == "ultrarelativistic":
        return laws.UltraRelativistic()
    if form == "power":
        return laws.PowerLawKinetic(
            keys.get(f"{prefix}.coef", _float, required=True),
            keys.get(f"{prefix}.exponent", _float, required=True),
        )
    raise ConfigError(f"unknown kinetic form {form!r} for {prefix}")


def _potential(keys: _Keys, prefix: str) -> laws.PotentialLaw:
    form = keys.get(f"{prefix}.form", str.lower, required=True)
    if form == "harmonic":
        return laws.harmonic(keys.get(f"{prefix}.coef", _float, required=True))
    if form == "linear":
        return laws.linear(keys.get(f"{prefix}.coef", _float, required=True))
    if form == "coulomb":
        return laws.coulomb(keys.get(f"{prefix}.strength", _float, required=True))
    if form == "power":
        return laws.PowerLaw(
            keys.get(f"{prefix}.coef", _float, required=True),
            keys.get(f"{prefix}.exponent", _float, required=True),
        )
    if form == "sum":
        return laws.SumOfPowerLaws(keys.get(f"{prefix}.terms", _terms, required=True))
    raise ConfigError(f"unknown potential form {form!r} for {prefix}")


def _quantity_list(text: str) -> Tuple[str, ...]:
    items = tuple(item.strip() for item in text.split(",") if item.strip())
    if not items:
        raise ValueError("empty list")
    return items


@dataclass(frozen=True)
class RunConfig:
    """A schema-checked configuration.

    ``raw`` keeps the original key/value table so that scans can rebuild the
    system with one entry overridden.
    """

    system: Spec
    solver: SolverConfig
    outputs: Tuple[str, ...] = ("energy", "means")
    raw: Dict[str, str] = field(default_factory=dict)


def parse_lines(text: str) -> Dict[str, str]:
    """Split a config text into a ``{key: value}`` table."""
    table: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {number}: empty key or value")
        if key in table:
            raise ConfigError(f"line {number}: duplicate key {key!r}")
        table[key] = value
    return table


def build_config(raw: Dict[str, str], solver_overrides: Optional[dict] = None) -> RunConfig:
    """Turn a raw key table into a :class:`RunConfig`; every key must be consumed."""
    keys = _Keys(raw)
    kind = keys.get("system.type", str.lower, default="identical")
    dim = keys.get("system.dim", _int, default=3)
    try:
        if kind == "identical":
            n = keys.get("particles.count", _int, required=True)
            q = keys.get("quantum.q", _float)
            numbers = keys.get("quantum.numbers", _numbers)
            if numbers is not None:
                if q is not None:
                    raise ConfigError("give either quantum.q or quantum.numbers, not both")
                if len(numbers) != n - 1:
                    raise ConfigError(f"quantum.numbers needs N-1 = {n - 1} entries, got {len(numbers)}")
                q = global_quantum_number(numbers, dim)
            system = IdenticalSystemSpec(n, dim, _kinetic(keys, "kinetic"), _potential(keys, "potential"), q)
        elif kind == "two-species":
            system = TwoSpeciesSystemSpec(
                keys.get("species.a.count", _int, required=True),
                keys.get("species.b.count", _int, required=True),
                dim,
                _kinetic(keys, "species.a.kinetic"),
                _kinetic(keys, "species.b.kinetic"),
                _potential(keys, "potential.aa"),
                _potential(keys, "potential.bb"),
                _potential(keys, "potential.ab"),
                keys.get("quantum.q_a", _float),
                keys.get("quantum.q_b", _float),
                keys.get("quantum.q_rel", _float),
            )
        else:
            raise ConfigError(f"system.type must be 'identical' or 'two-species', got {kind!r}")
    except ConfigError:
        raise
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None

    solver_kw = {}
    for name, conv in (("tol", _float), ("max_iter", _int), ("bracket_growth", _float), ("damping", _float)):
        value = keys.get(f"solver.{name}", conv)
        if value is not None:
            solver_kw[name] = value
    solver_kw.update({k: v for k, v in (solver_overrides or {}).items() if v is not None})
    try:
        solver = SolverConfig(**solver_kw)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None

    outputs = keys.get("output.quantities", _quantity_list, default=("energy", "means"))
    allowed = set(_QUANTITY_GROUPS) | set(
        IDENTICAL_MEANS if isinstance(system, IdenticalSystemSpec) else TWO_SPECIES_MEANS
    )
    bad = [item for item in outputs if item not in allowed]
    if bad:
        raise ConfigError(f"unknown output quantities {bad}; allowed: {sorted(allowed)}")

    unknown = keys.leftovers()
    if unknown:
        raise ConfigError(f"unknown or inapplicable config keys: {', '.join(unknown)}")
    return RunConfig(system=system, solver=solver, outputs=outputs, raw=dict(raw))


def parse_config(text: str, solver_overrides: Optional[dict] = None) -> RunConfig:
    """Parse and validate a config text."""
    return build_config(parse_lines(text), solver_overrides)


def load_config(path: str, solver_overrides: Optional[dict] = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    return parse_config(text, solver_overrides)


# ---------------------------------------------------------------------------
# reporting helpers
# ---------------------------------------------------------------------------


def _mean_names(spec: Spec) -> Tuple[str, ...]:
    return IDENTICAL_MEANS if isinstance(spec, IdenticalSystemSpec) else TWO_SPECIES_MEANS


def _record(run: RunConfig, sol: Solution) -> Dict[str, object]:
    out: Dict[str, object] = {}
    names = _mean_names(run.system)
    for item in run.outputs:
        if item == "energy":
            out["energy"] = sol.energy
        elif item == "means":
            out.update({name: sol.means[name] for name in names})
        elif item in names:
            out[item] = sol.means[item]
        elif item == "residual_norm":
            out["residual_norm"] = sol.residual_norm
        elif item == "method":
            out["method"] = sol.method
        elif item == "residuals":
            values = residuals(run.system, sol.means, sol.energy)
            labels = RESIDUAL_ORDER[_layout(run.system)]
            out.update({f"residual.{k}": float(v) for k, v in zip(labels, values)})
        elif item == "diagnostics":
            out["diagnostics"] = {k: v for k, v in sol.diagnostics.items()}
    return out


def _print_record(record: Dict[str, object], stream) -> None:
    for key, value in record.items():
        if isinstance(value, float):
            value = _fmt(value)
        print(f"{key} = {value}", file=stream)


def _error_exit(exc: Exception) -> int:
    print(f"error: {exc}", file=sys.stderr)
    if isinstance(exc, NoBindingError):
        return EXIT_NO_BINDING
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    return EXIT_CONVERGENCE


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    run = load_config(args.config, _overrides(args))
    sol = solve(run.system, run.solver)
    record = _record(run, sol)
    _print_record(record, sys.stdout)
    if args.out:
        payload = {"energy": sol.energy, "means": sol.means, "residual_norm": sol.residual_norm,
                   "iterations": sol.iterations, "method": sol.method, "requested": record}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, default=str)
    return EXIT_OK


# ---------------------------------------------------------------------------
# scan
# ---------------------------------------------------------------------------


def _scan_override(raw: Dict[str, str], var: str, value: float) -> Tuple[Dict[str, str], float]:
    """Raw table with the scan variable set, plus the potential coupling factor."""
    raw = dict(raw)
    kind = raw.get("system.type", "identical").lower()
    if var in _INTEGER_VARS:
        if abs(value - round(value)) > 1e-9:
            raise InvalidInputError(f"{var} must be an integer, got {value!r}")
        text = str(int(round(value)))
    else:
        text = repr(float(value))
    if var == "coupling":
        return raw, float(value)
    target = {
        ("identical", "n"): "particles.count",
        ("identical", "q"): "quantum.q",
        ("two-species", "n_a"): "species.a.count",
        ("two-species", "n_b"): "species.b.count",
        ("two-species", "q"): "quantum.q_rel",
    }.get((kind, var))
    if target is None:
        raise ConfigError(f"scan variable {var!r} does not apply to a {kind} system")
    if var == "q":
        raw.pop("quantum.numbers", None)
    raw[target] = text
    return raw, 1.0


def _with_coupling(spec: Spec, factor: float) -> Spec:
    if factor == 1.0:
        return spec
    if isinstance(spec, IdenticalSystemSpec):
        return dataclasses.replace(spec, potential=spec.potential.scaled(factor))
    return dataclasses.replace(spec, v_ab=spec.v_ab.scaled(factor))


def _scan_point(job) -> Dict[str, object]:
    index, var, value, raw, overrides = job
    row: Dict[str, object] = {"index": index, "value": value, "error": ""}
    start = time.perf_counter()
    try:
        raw_point, factor = _scan_override(raw, var, value)
        run = build_config(raw_point, overrides)
        sol = solve(_with_coupling(run.system, factor), run.solver)
        row["energy"] = sol.energy
        row.update(sol.means)
        row["residual_norm"] = sol.residual_norm
    except (EnvelopeError, ValueError, ArithmeticError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    row["wall_time"] = time.perf_counter() - start
    return row


def scan_points(run: RunConfig, var: str, start: float, stop: float, steps: int,
                jobs: int = 1, overrides: Optional[dict] = None) -> List[Dict[str, object]]:
    """Evaluate the system at ``steps`` evenly spaced values of ``var``.

    Failures become rows with a non-empty ``error`` entry. Rows come back in
    scan order whatever ``jobs`` is.
    """
    if var not in SCAN_VARS:
        raise ConfigError(f"scan variable must be one of {SCAN_VARS}, got {var!r}")
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    # catch a scan variable that does not fit the system before any work
    _scan_override(run.raw, var, start if var not in _INTEGER_VARS else round(start))
    values = np.linspace(start, stop, steps) if steps > 1 else np.array([start])
    overrides = dict(overrides or {})
    jobs_list = [(i, var, float(v), run.raw, overrides) for i, v in enumerate(values)]
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_scan_point, jobs_list))
    return [_scan_point(job) for job in jobs_list]


def _csv_columns(spec: Spec) -> List[str]:
    return ["index", "value", "energy", *_mean_names(spec), "residual_norm", "wall_time", "error"]


def write_csv(rows: Sequence[Dict[str, object]], columns: Sequence[str], stream) -> None:
    """Write rows with 17 significant digits so doubles survive a round trip."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        cells = []
        for col in columns:
            value = row.get(col, "")
            if isinstance(value, float):
                value = _fmt(value)
            cells.append(value)
        writer.writerow(cells)


def read_csv(stream) -> List[Dict[str, object]]:
    """Inverse of :func:`write_csv`; numeric cells come back as ``float``."""
    rows = []
    for row in csv.DictReader(stream):
        parsed: Dict[str, object] = {}
        for key, text in row.items():
            if key == "error" or text == "":
                parsed[key] = text
            elif key == "index":
                parsed[key] = int(text)
            else:
                parsed[key] = float(text)
        rows.append(parsed)
    return rows


def cmd_scan(args) -> int:
    overrides = _overrides(args)
    run = load_config(args.config, overrides)
    if args.scan_var is None or args.start is None or args.stop is None or args.steps is None:
        raise ConfigError("scan needs --scan-var, --from, --to and --steps")
    rows = scan_points(run, args.scan_var, args.start, args.stop, args.steps,
                       jobs=args.jobs, overrides=overrides)
    columns = _csv_columns(run.system)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, columns, fh)
    else:
        write_csv(rows, columns, sys.stdout)
    failed = sum(1 for row in rows if row["error"])
    if failed:
        print(f"{failed} of {len(rows)} scan points failed", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def _two_body_reduction(spec: Spec):
    """``(reduced mass, potential, Q)`` when the system is a non-relativistic pair, else ``None``."""
    if isinstance(spec, IdenticalSystemSpec):
        if spec.n != 2 or not isinstance(spec.kinetic, laws.NonRelativistic):
            return None
        return spec.kinetic.mass / 2.0, spec.potential, spec.q
    if spec.n_a != 1 or spec.n_b != 1:
        return None
    ka, kb = spec.kinetic_a, spec.kinetic_b
    if not (isinstance(ka, laws.NonRelativistic) and isinstance(kb, laws.NonRelativistic)):
        return None
    return ka.mass * kb.mass / (ka.mass + kb.mass), spec.v_ab, spec.q_rel


def states_with_q(q: float, dim: int) -> List[Tuple[int, int]]:
    """Two-body ``(n, l)`` states in the harmonic band ``q`` (``l`` is the parity in 1D)."""
    k = q - (0.5 if dim == 1 else dim / 2.0)
    if k < -1e-9 or abs(k - round(k)) > 1e-9:
        return []
    k = int(round(k))
    if dim == 1:
        return [(k // 2, k % 2)]
    return [(n, k - 2 * n) for n in range(k // 2 + 1)]


def oracles_for(spec: Spec) -> List[Tuple[str, OracleResult]]:
    """Every applicable reference energy for ``spec``."""
    try:
        return [("exact-ho", exact_ho_energy(spec))]
    except InvalidInputError:
        pass
    reduced = _two_body_reduction(spec)
    if reduced is None:
        return []
    mu, pot, q = reduced
    out = []
    for n, l in states_with_q(q, spec.dim):
        out.append((f"radial(n={n},l={l})", radial_two_body(mu, pot, spec.dim, n, l)))
    return out


def cmd_compare(args) -> int:
    run = load_config(args.config, _overrides(args))
    compact_sol = solve(run.system, run.solver)
    extrem_sol, _ = extremize(run.system, run.solver)
    e_c, e_x = compact_sol.energy, extrem_sol.energy
    diff = e_c - e_x
    print(f"{'route':<22}{'energy':>26}")
    print(f"{'compact':<22}{_fmt(e_c):>26}")
    print(f"{'extremization':<22}{_fmt(e_x):>26}")
    print(f"compact - extremization: abs {diff:.3e}  rel {abs(diff) / max(abs(e_c), 1e-300):.3e}")
    refs = oracles_for(run.system)
    if not refs:
        print("oracle: none applicable")
    for name, ref in refs:
        delta = e_c - ref.energy
        noise = 1e-12 * abs(ref.energy) + ref.est_accuracy * abs(ref.energy)
        side = "equal" if abs(delta) <= noise else "above" if delta > 0 else "below"
        print(f"{'oracle ' + name:<22}{_fmt(ref.energy):>26}  est_acc {ref.est_accuracy:.1e}")
        print(f"  ET - oracle: abs {delta:.3e}  rel {abs(delta) / max(abs(ref.energy), 1e-300):.3e}  "
              f"side {side}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    from .validation import run_battery

    corrupt = os.environ.get("ET_TEST_CORRUPT_DERIVATIVE", "") not in ("", "0")
    solver = SolverConfig(**_overrides(args))
    results = run_battery(solver, corrupt_derivative=corrupt)
    width = max(len(r.name) for r in results)
    print(f"{'check':<{width}}  status  worst      limit")
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status:<6}  {r.worst:.2e}  {r.limit:.1e}  {r.detail}")
    failing = [r.name for r in results if not r.passed]
    if failing:
        print(f"failing checks: {', '.join(failing)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    print(f"all {len(results)} checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "tol", None) is not None:
        out["tol"] = args.tol
    if getattr(args, "max_iter", None) is not None:
        out["max_iter"] = args.max_iter
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="envelope", description="Envelope-theory bound-state solver")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, metavar="PATH", help="key = value config file")
        p.add_argument("--tol", type=float, help="solver tolerance (default: ET_SOLVER_TOL or 1e-10)")
        p.add_argument("--max-iter", type=int, dest="max_iter", help="solver iteration cap")

    p = sub.add_parser("solve", help="solve one system")
    common(p)
    p.add_argument("--out", metavar="PATH", help="write a JSON record")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("scan", help="scan one parameter and emit CSV")
    common(p)
    p.add_argument("--out", metavar="PATH", help="CSV destination (default stdout)")
    p.add_argument("--scan-var", dest="scan_var", choices=SCAN_VARS)
    p.add_argument("--from", dest="start", type=float)
    p.add_argument("--to", dest="stop", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("compare", help="compact vs extremization vs oracle")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="run the invariant battery")
    common(p, needs_config=False)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EnvelopeError, ValueError) as exc:
        return _error_exit(exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
