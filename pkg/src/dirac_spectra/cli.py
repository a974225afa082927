"""Command-line interface: ``dirac-spectra <command> [options]``.

Every option can also come from a flat JSON file given with ``--config``; flags
override file values.  Results are written to ``--output-dir`` as CSV (17
significant digits, LF line endings) or JSON.

Exit codes: 0 success, 2 domain error, 3 numerical failure, 4 unresolved
classification.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from typing import Any, Optional, Sequence

import numpy as np

from .distinguished import Which, solve_distinguished
from .errors import DiracSpectraError, DomainError, NumericalError
from .exceptional import c0_analytic_bound, find_exceptional, min_count
from .model import asymptotic_angles, check_coupling, from_physical, sommerfeld_eigenvalue
from .odecore import Equation, EquationKind, StepControl
from .spectral import MatchConfig, find_eigenvalues, stability_certificate, sweep_anomaly

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERICAL, EXIT_UNRESOLVED = 0, 2, 3, 4

EIG_COLUMNS = ("kappa", "c", "a", "variant", "branch_index", "lambda", "nodes", "residual")
SWEEP_COLUMNS = ("a", "lambda_a", "count_in_window", "shift_m")
EXCEPTIONAL_COLUMNS = ("k", "m", "c_m", "bracket_lo", "bracket_hi", "tol", "resolved")
FIELD_COLUMNS = ("rho", "theta", "rhs", "sign")
ZERO_COLUMNS = ("curve", "rho", "theta")
ORACLE_COLUMNS = ("kappa", "c", "n", "lambda_shoot", "lambda_oracle", "rel_err")
CERT_COLUMNS = ("k", "c", "d", "R", "lambda", "r_hat", "ok", "a1", "violated", "first", "second", "bound")


# ---------------------------------------------------------------------------
# output


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if v is None:
        return ""
    return str(v)


def write_table(out_dir: str, name: str, columns: Sequence[str], rows: Sequence[dict], fmt: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.{fmt}")
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([format_value(row[col]) for col in columns])
    else:
        payload = [{col: _jsonable(row[col]) for col in columns} for row in rows]
        with open(path, "w", newline="\n") as fh:
            json.dump(payload, fh, indent=1, allow_nan=True)
            fh.write("\n")
    return path


def write_json(out_dir: str, name: str, payload: dict) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.json")
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=1, allow_nan=True)
        fh.write("\n")
    return path


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def read_table(path: str) -> list[dict]:
    """Rows of a file written by :func:`write_table`; CSV values come back as strings."""
    if path.endswith(".json"):
        with open(path) as fh:
            return json.load(fh)
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# configuration

COMMON = {"output_dir": ".", "format": "csv", "rel_tol": 1e-10, "abs_tol": 1e-12}

DEFAULTS = {
    "eig": {"kappa": None, "c": None, "a": 0.0, "window": [-0.99, 0.99], "R": 1.0,
            "variant": "auxiliary", "grid_step": 1e-3, "bisect_tol": 1e-10},
    "sweep": {"kappa": None, "c": None, "a_list": [-1e-2, -1e-3, -1e-4], "lambda0": None, "n": None,
              "epsilon": 0.04, "R": 1.0, "variant": "auxiliary", "grid_step": 1e-3, "bisect_tol": 1e-10},
    "exceptional": {"k": None, "depth": None, "grid_step": None, "tol": 1e-8},
    "field": {"k": None, "c": None, "alpha": -1, "rho_min": 0.05, "rho_max": 20.0, "n_rho": 120,
              "n_theta": 90},
    "trace": {"which": "X0", "kappa": None, "c": None, "a": 0.0, "lam": 0.0, "r_eval": 1.0, "R": None},
    "certify": {"k": None, "c": None, "d": None, "R": None, "lam": None, "r_hat": None},
    "oracle-check": {"kappas": [-2, -1, 1, 2], "cs": [-0.2, -0.5], "count": 3, "tol": 1e-6,
                     "grid_step": 1e-3},
}

REQUIRED = {
    "eig": ("kappa", "c"),
    "sweep": ("kappa", "c"),
    "exceptional": ("k",),
    "field": ("k", "c"),
    "trace": ("kappa", "c"),
    "certify": ("k", "c", "d", "R", "r_hat"),
    "oracle-check": (),
}


def load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read config file {path!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise DomainError("config file must hold a flat JSON object")
    return {str(key).replace("-", "_"): value for key, value in data.items()}


def resolve(command: str, ns: argparse.Namespace) -> dict:
    """Defaults, then config-file values, then explicit flags."""
    merged = dict(COMMON)
    merged.update(DEFAULTS[command])
    cfg = load_config(getattr(ns, "config", None))
    unknown = sorted(set(cfg) - set(merged))
    if unknown:
        raise DomainError(f"unknown config keys for {command!r}: {', '.join(unknown)}")
    merged.update(cfg)
    merged.update({k: v for k, v in vars(ns).items() if k not in ("command", "config")})
    missing = [key for key in REQUIRED[command] if merged.get(key) is None]
    if missing:
        raise DomainError(f"missing required parameter(s): {', '.join(missing)}")
    if merged["format"] not in ("csv", "json"):
        raise DomainError(f"format must be csv or json, got {merged['format']!r}")
    return merged


def _ctl(opts: dict) -> StepControl:
    return StepControl(rel_tol=float(opts["rel_tol"]), abs_tol=float(opts["abs_tol"]))


def _match(opts: dict, window) -> MatchConfig:
    return MatchConfig(R=float(opts["R"]), lambda_window=tuple(window), bisect_tol=float(opts["bisect_tol"]),
                       variant=opts["variant"], grid_step=float(opts["grid_step"]), ctl=_ctl(opts))


def _say(msg: str) -> None:
    print(msg, flush=True)


# ---------------------------------------------------------------------------
# commands


def cmd_eig(opts: dict) -> int:
    p = from_physical(float(opts["kappa"]), float(opts["c"]), float(opts["a"]))
    results = find_eigenvalues(p, _match(opts, opts["window"]))
    path = write_table(opts["output_dir"], "eigenvalues", EIG_COLUMNS, [e.row() for e in results], opts["format"])
    for e in results:
        _say(f"branch {e.branch_index:3d}  lambda = {e.lam:.12f}  nodes = {e.nodes}")
    _say(f"{len(results)} eigenvalue(s) -> {path}")
    return EXIT_OK


def cmd_sweep(opts: dict) -> int:
    kappa, c = float(opts["kappa"]), float(opts["c"])
    p = from_physical(kappa, c)
    lambda0 = opts["lambda0"]
    if lambda0 is None:
        if opts["n"] is None:
            raise DomainError("sweep needs lambda0 or the index n of an unperturbed eigenvalue")
        lambda0 = sommerfeld_eigenvalue(kappa, c, int(opts["n"]))
    a_list = sorted(float(a) for a in opts["a_list"])
    res = sweep_anomaly(p, a_list, float(lambda0), float(opts["epsilon"]), _match(opts, (-0.5, 0.5)))
    path = write_table(opts["output_dir"], "sweep", SWEEP_COLUMNS, res.rows(), opts["format"])
    for pt in res.points:
        _say(f"a = {pt.a:<10.3g} count = {pt.count_in_window}  lambda_a = {pt.lambda_a:.12f}")
    _say(f"shift_m = {res.shift_m}  (upper-node shift {res.node_shift}, lower-node shift {res.lower_node_shift})")
    _say(f"-> {path}")
    if p.alpha == -1 and res.bucket_m is None:
        _say("coupling is too close to an exceptional value: bucket index unresolved")
        return EXIT_UNRESOLVED
    return EXIT_OK


def cmd_exceptional(opts: dict) -> int:
    k = float(opts["k"])
    depth = None if opts["depth"] is None else float(opts["depth"])
    step = None if opts["grid_step"] is None else float(opts["grid_step"])
    table = find_exceptional(k, depth, step, float(opts["tol"]), _ctl(opts))
    path = write_table(opts["output_dir"], "exceptional", EXCEPTIONAL_COLUMNS, table.rows(), opts["format"])
    bound = c0_analytic_bound(k)
    for e in table.entries:
        where = f"{e.c_m:.12f}" if e.resolved else "unresolved"
        _say(f"c_{e.m} = {where}  bracket [{e.bracket[0]:.12g}, {e.bracket[1]:.12g}]")
    _say(f"{len(table.entries)} transition(s) in [{table.complete_to:g}, 0); "
         f"guaranteed count {min_count(k).clamped}; c_0 bound {bound:.6f}")
    _say(f"-> {path}")
    return EXIT_UNRESOLVED if any(not e.resolved for e in table.entries) else EXIT_OK


def zero_curves(k: float, c: float, alpha: int, rho: np.ndarray) -> dict:
    """The two branches of ``c + (k + alpha/rho) sin 2theta = 0`` in ``[0, pi]``; NaN
    where there is no zero (the gap)."""
    coef = k + alpha / rho
    with np.errstate(divide="ignore", invalid="ignore"):
        s = -c / coef
    ok = np.abs(s) <= 1.0
    h = 0.5 * np.arcsin(np.where(ok, s, 0.0))
    first = np.where(h >= 0, h, math.pi + h)
    second = 0.5 * math.pi - h
    return {"lower": np.where(ok, first, np.nan), "upper": np.where(ok, second, np.nan)}


def cmd_field(opts: dict) -> int:
    k, c, alpha = float(opts["k"]), float(opts["c"]), int(opts["alpha"])
    check_coupling(k, c)
    if alpha not in (-1, 1):
        raise DomainError(f"alpha must be -1 or +1, got {alpha!r}")
    rho_min, rho_max = float(opts["rho_min"]), float(opts["rho_max"])
    if not (0 < rho_min < rho_max):
        raise DomainError("need 0 < rho_min < rho_max")
    n_rho, n_theta = int(opts["n_rho"]), int(opts["n_theta"])
    if n_rho < 2 or n_theta < 2:
        raise DomainError("grid sizes must be at least 2")
    rho = np.geomspace(rho_min, rho_max, n_rho)
    theta = np.linspace(0.0, math.pi, n_theta)
    grid_rows = []
    for r in rho:
        vals = (c + (k + alpha / r) * np.sin(2 * theta)) / r
        for th, v in zip(theta, vals):
            grid_rows.append({"rho": float(r), "theta": float(th), "rhs": float(v), "sign": int(np.sign(v))})
    curves = zero_curves(k, c, alpha, rho)
    zero_rows = [
        {"curve": name, "rho": float(r), "theta": float(th)}
        for name, values in curves.items() for r, th in zip(rho, values) if not math.isnan(th)
    ]
    ang = asymptotic_angles(k, c, alpha)
    meta = {
        "k": k, "c": c, "alpha": alpha,
        "theta_minus": ang.theta_minus, "theta_plus": ang.theta_plus,
        "rho_minus": ang.rho_minus, "rho_plus": ang.rho_plus,
        "gap": [ang.rho_minus, ang.rho_plus] if alpha == -1 else None,
    }
    out, fmt = opts["output_dir"], opts["format"]
    if fmt == "csv":
        write_table(out, "field", FIELD_COLUMNS, grid_rows, fmt)
        write_table(out, "zero_curves", ZERO_COLUMNS, zero_rows, fmt)
        path = write_json(out, "field_meta", meta)
    else:
        path = write_json(out, "field", {"meta": meta, "grid": grid_rows, "zero_curves": zero_rows})
    gap = f"gap ({ang.rho_minus:.6g}, {ang.rho_plus:.6g})" if alpha == -1 else "no gap"
    _say(f"{len(grid_rows)} grid points, {len(zero_rows)} zero-curve points, {gap} -> {out}")
    return EXIT_OK


def cmd_trace(opts: dict) -> int:
    which = Which(opts["which"])
    p = from_physical(float(opts["kappa"]), float(opts["c"]), float(opts["a"]), float(opts["lam"]))
    kind = None
    if opts["R"] is not None:
        if which is not Which.THETA0:
            raise DomainError("a cutoff radius R only applies to Theta0")
        kind = EquationKind(Equation.FULL_PRUFER, cutoff_R=float(opts["R"]))
    value, trace = solve_distinguished(which, p, float(opts["r_eval"]), _ctl(opts), kind=kind)
    if trace.max_increment() >= 0.5 * math.pi:
        raise NumericalError("trace violates the mod-pi sampling invariant")
    rows = [{"r": float(r), trace.variable: float(v)} for r, v in zip(trace.r, trace.values)]
    path = write_table(opts["output_dir"], "trace", ("r", trace.variable), rows, opts["format"])
    _say(f"{which.value}({float(opts['r_eval']):g}) = {value:.15f}; {len(trace)} samples, "
         f"max increment {trace.max_increment():.3g} -> {path}")
    return EXIT_OK


def cmd_certify(opts: dict) -> int:
    lam = None if opts["lam"] is None else float(opts["lam"])
    args = (float(opts["k"]), float(opts["c"]), float(opts["d"]), float(opts["R"]), lam, float(opts["r_hat"]))
    cert = stability_certificate(*args)
    row = {
        "k": args[0], "c": args[1], "d": args[2], "R": args[3], "lambda": "all" if lam is None else lam,
        "r_hat": args[5], "ok": cert.ok, "a1": cert.a1, "violated": " ".join(cert.violated),
        "first": cert.lhs[0], "second": cert.lhs[1], "bound": cert.bound,
    }
    path = write_table(opts["output_dir"], "certificate", CERT_COLUMNS, [row], opts["format"])
    status = "ok" if cert.ok else f"violated: {', '.join(cert.violated)}"
    _say(f"certificate {status}; a1 = {cert.a1:.6g} -> {path}")
    return EXIT_OK


def _oracle_window(kappa: float, c: float, count: int) -> tuple:
    n0 = 0 if kappa < 0 else 1
    lams = [sommerfeld_eigenvalue(kappa, c, n0 + i) for i in range(count + 1)]
    return max(-0.99, lams[0] - 0.05), 0.5 * (lams[count - 1] + lams[count]), n0


def cmd_oracle_check(opts: dict) -> int:
    count, tol = int(opts["count"]), float(opts["tol"])
    if count < 1:
        raise DomainError("count must be at least 1")
    rows = []
    for kappa in opts["kappas"]:
        for c in opts["cs"]:
            kappa, c = float(kappa), float(c)
            p = from_physical(kappa, c)
            lo, hi, n0 = _oracle_window(kappa, c, count)
            cfg = MatchConfig(lambda_window=(lo, hi), grid_step=float(opts["grid_step"]), ctl=_ctl(opts))
            found = find_eigenvalues(p, cfg)
            if len(found) != count:
                raise NumericalError(f"kappa={kappa:g}, c={c:g}: found {len(found)} eigenvalues, expected {count}")
            for i, e in enumerate(found):
                ref = sommerfeld_eigenvalue(kappa, c, n0 + i)
                rows.append({"kappa": kappa, "c": c, "n": n0 + i, "lambda_shoot": e.lam,
                             "lambda_oracle": ref, "rel_err": abs(e.lam / ref - 1.0)})
    path = write_table(opts["output_dir"], "oracle_check", ORACLE_COLUMNS, rows, opts["format"])
    worst = max(r["rel_err"] for r in rows)
    _say(f"{len(rows)} eigenvalues, max relative error {worst:.3g} (tolerance {tol:g}) -> {path}")
    return EXIT_OK if worst <= tol else EXIT_NUMERICAL


COMMANDS = {
    "eig": cmd_eig,
    "sweep": cmd_sweep,
    "exceptional": cmd_exceptional,
    "field": cmd_field,
    "trace": cmd_trace,
    "certify": cmd_certify,
    "oracle-check": cmd_oracle_check,
}


# ---------------------------------------------------------------------------
# argument parsing

NEGATIVE_NUMBER = re.compile(r"^-(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dirac-spectra", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def command(name, help_):
        sp = sub.add_parser(name, help=help_, argument_default=S)
        # let values such as -1e-4 through as numbers rather than option names
        sp._negative_number_matcher = NEGATIVE_NUMBER
        sp.add_argument("--config", help="flat JSON file with option values")
        sp.add_argument("--output-dir", dest="output_dir")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--rel-tol", dest="rel_tol", type=float)
        sp.add_argument("--abs-tol", dest="abs_tol", type=float)
        return sp

    def matching(sp):
        sp.add_argument("--R", dest="R", type=float, help="matching radius / anomaly cutoff")
        sp.add_argument("--variant", choices=("auxiliary", "full"))
        sp.add_argument("--grid-step", dest="grid_step", type=float)
        sp.add_argument("--bisect-tol", dest="bisect_tol", type=float)

    sp = command("eig", "eigenvalues in a lambda window")
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--c", type=float)
    sp.add_argument("--a", type=float)
    sp.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    matching(sp)

    sp = command("sweep", "eigenvalues near lambda0 as the anomaly tends to zero")
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--c", type=float)
    sp.add_argument("--a-list", dest="a_list", type=float, nargs="+")
    sp.add_argument("--lambda0", type=float)
    sp.add_argument("--n", type=int, help="take lambda0 as the n-th anomaly-free eigenvalue")
    sp.add_argument("--epsilon", type=float)
    matching(sp)

    sp = command("exceptional", "exceptional couplings c_m for k = |kappa|")
    sp.add_argument("--k", type=float)
    sp.add_argument("--depth", type=float)
    sp.add_argument("--grid-step", dest="grid_step", type=float)
    sp.add_argument("--tol", type=float)

    sp = command("field", "direction-field zones of the simplified equation")
    sp.add_argument("--k", type=float)
    sp.add_argument("--c", type=float)
    sp.add_argument("--alpha", type=int, choices=(-1, 1))
    sp.add_argument("--rho-min", dest="rho_min", type=float)
    sp.add_argument("--rho-max", dest="rho_max", type=float)
    sp.add_argument("--n-rho", dest="n_rho", type=int)
    sp.add_argument("--n-theta", dest="n_theta", type=int)

    sp = command("trace", "export a distinguished solution")
    sp.add_argument("--which", choices=[w.value for w in Which])
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--c", type=float)
    sp.add_argument("--a", type=float)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--r-eval", dest="r_eval", type=float)
    sp.add_argument("--R", dest="R", type=float)

    sp = command("certify", "smallness conditions and anomaly threshold for convergence at R")
    sp.add_argument("--k", type=float)
    sp.add_argument("--c", type=float)
    sp.add_argument("--d", type=float)
    sp.add_argument("--R", dest="R", type=float)
    sp.add_argument("--lam", type=float, help="omit to check all lambda in [-1, 1]")
    sp.add_argument("--r-hat", dest="r_hat", type=float)

    sp = command("oracle-check", "compare anomaly-free eigenvalues with the closed form")
    sp.add_argument("--kappas", type=float, nargs="+")
    sp.add_argument("--cs", type=float, nargs="+")
    sp.add_argument("--count", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--grid-step", dest="grid_step", type=float)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        opts = resolve(ns.command, ns)
        return COMMANDS[ns.command](opts)
    except DiracSpectraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        print(f"error: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
