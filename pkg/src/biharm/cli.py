"""Command-line interface: ``biharm residual|solve|stability|sampson|verify``.

Runs are driven by one JSON config.  Outputs are CSV tables plus plain-text
reports written atomically into the output directory; every report embeds the
resolved config after a ``## resolved-config`` marker, and that report can be
passed back as ``--config`` to reproduce the run.

Exit codes: 0 success, 1 verification failure, 2 config/usage error,
3 domain error, 4 non-convergence.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import verify as verify_mod
from .closed_form import ExpPolySolution, sampson_analyze, sampson_profile
from .curves import ConstantCurve, FourierCurve, SplineCurve
from .euler_lagrange import (
    BoundaryConditions,
    DiscreteFunction,
    Grid,
    discrete_jets,
    el_residual_along_curve,
)
from .lagrangian import DecoupledSystem, DomainError, Jet2, geometry_from_dict, tension
from .solver import SolveConfig, constant_initial, fourier_initial, linear_initial, solve
from .stability import NotCriticalError, analyze_stability, quad_form_vs_analytic, second_variation_mode

logger = logging.getLogger("biharm")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_DOMAIN, EXIT_NOCONV = 0, 1, 2, 3, 4
CONFIG_MARKER = "## resolved-config"
NORMALIZATION_NOTE = (
    "# energies use the reduced integrand with overall constant factors dropped;"
    " compare values only within one geometry"
)
SOLUTION_HEADER = ["t", "alpha", "alpha_dot", "alpha_ddot", "tension"]


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# config


_DEFAULTS = {
    "grid": {"n": 256, "interval": None, "bc": {"kind": "periodic"}},
    "solver": {"max_iter": 100, "grad_tol": 1e-10, "damping": 1.0, "regularization": 0.0},
    "initial": {"kind": "constant", "value": 0.0},
    "output": {"directory": "biharm_out", "emit_csv": True, "emit_report": True},
    "curve": None,
    "exact": None,
}
_BLOCK_KEYS = {
    "grid": {"n", "interval", "bc"},
    "solver": {"max_iter", "grad_tol", "damping", "regularization"},
    "output": {"directory", "emit_csv", "emit_report"},
}
_CURVE_KEYS = {
    "constant": {"value"},
    "fourier": {"base", "amplitude", "mode"},
    "linear": set(),
    "file": {"path"},
    "sampson": {"lambda"},
    "exp_poly": {"terms"},
}
_BC_KEYS = {"periodic": set(), "clamped": {"value_a", "slope_a", "value_b", "slope_b", "from_exact"}}


def _check_keys(block, allowed, where):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(block) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _check_curve(spec, where):
    if spec is None:
        return
    _check_keys(spec, {"kind"} | set().union(*_CURVE_KEYS.values()), where)
    kind = spec.get("kind")
    if kind not in _CURVE_KEYS:
        raise ConfigError(f"{where}.kind must be one of {sorted(_CURVE_KEYS)}")
    _check_keys(spec, {"kind"} | _CURVE_KEYS[kind], where)


def read_config_text(text: str) -> dict:
    if CONFIG_MARKER in text:
        text = text.split(CONFIG_MARKER, 1)[1]
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def resolve_config(raw: dict) -> dict:
    """Fill defaults and reject unknown keys; returns a new dict."""
    _check_keys(raw, {"geometry", *_DEFAULTS}, "config")
    if "geometry" not in raw:
        raise ConfigError("config needs a geometry block")
    cfg = {"geometry": copy.deepcopy(raw["geometry"])}
    for key, default in _DEFAULTS.items():
        if isinstance(default, dict):
            block = copy.deepcopy(raw.get(key, {}))
            if key in _BLOCK_KEYS:
                _check_keys(block, _BLOCK_KEYS[key], key)
                merged = {**copy.deepcopy(default), **block}
            else:
                merged = block if block else copy.deepcopy(default)
            cfg[key] = merged
        else:
            cfg[key] = copy.deepcopy(raw.get(key, default))
    _check_curve(cfg["initial"], "initial")
    _check_curve(cfg["curve"], "curve")
    _check_curve(cfg["exact"], "exact")
    bc = cfg["grid"]["bc"]
    _check_keys(bc, {"kind"} | _BC_KEYS.get(bc.get("kind"), set()), "grid.bc")
    if bc.get("kind") not in _BC_KEYS:
        raise ConfigError("grid.bc.kind must be periodic or clamped")
    return cfg


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return resolve_config(read_config_text(text))


def build_curve(spec: dict, geom, cfg_lambda=None):
    kind = spec["kind"]
    if kind == "constant":
        return ConstantCurve(float(spec.get("value", 0.0)))
    if kind == "fourier":
        return FourierCurve(float(spec["base"]), float(spec["amplitude"]), int(spec.get("mode", 1)))
    if kind == "sampson":
        lam = spec.get("lambda", cfg_lambda)
        if lam is None:
            raise ConfigError("sampson curve needs lambda")
        return sampson_profile(float(lam))
    if kind == "exp_poly":
        return ExpPolySolution(tuple(tuple(t) for t in spec["terms"]))
    if kind == "file":
        t, alpha = read_solution_csv(spec["path"])
        periodic = geom.periodic
        return SplineCurve(t, alpha, periodic=periodic, period=geom.period if periodic else None)
    raise ConfigError(f"curve kind {kind!r} cannot be used here")


def build_problem(cfg: dict):
    """Geometry, grid and solver config from a resolved config."""
    try:
        geom = geometry_from_dict(cfg["geometry"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise ConfigError(f"bad geometry: {exc}") from exc
    if isinstance(geom, DecoupledSystem):
        raise ConfigError("the CLI handles scalar geometries only")
    g = cfg["grid"]
    bcs = dict(g["bc"])
    try:
        if geom.periodic:
            if bcs["kind"] != "periodic":
                raise ConfigError("periodic geometry requires periodic boundary conditions")
            grid = Grid.for_geometry(geom, int(g["n"]))
        else:
            if bcs["kind"] != "clamped":
                raise ConfigError("this geometry requires clamped boundary conditions")
            interval = g["interval"] or list(geom.domain)
            a, b = map(float, interval)
            if bcs.pop("from_exact", False):
                if cfg["exact"] is None:
                    raise ConfigError("grid.bc.from_exact needs an exact block")
                ex = build_curve(cfg["exact"], geom, cfg["geometry"].get("lambda"))
                ja, jb = ex.jet(a), ex.jet(b)
                bcs = {"value_a": ja.x, "slope_a": ja.p, "value_b": jb.x, "slope_b": jb.p}
            else:
                bcs.pop("kind")
            bc = BoundaryConditions("clamped", **bcs)
            grid = Grid(a, b, int(g["n"]), bc)
            geom.check_t([a, b])
        scfg = SolveConfig(**cfg["solver"])
    except DomainError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return geom, grid, scfg


def build_initial(cfg, geom, grid) -> DiscreteFunction:
    spec = cfg["initial"]
    kind = spec["kind"]
    if kind == "constant":
        return constant_initial(grid, spec.get("value", 0.0))
    if kind == "fourier":
        return fourier_initial(grid, spec["base"], spec["amplitude"], int(spec.get("mode", 1)))
    if kind == "linear":
        return linear_initial(grid)
    if kind == "file":
        return profile_from_file(spec["path"], grid)
    curve = build_curve(spec, geom, cfg["geometry"].get("lambda"))
    return DiscreteFunction.sample(grid, curve)


def profile_from_file(path, grid) -> DiscreteFunction:
    t, alpha = read_solution_csv(path)
    if len(t) != grid.n or not np.allclose(t, grid.nodes, rtol=0, atol=1e-12 * max(1.0, abs(grid.b))):
        raise ConfigError(f"profile in {path} does not match the configured grid")
    return DiscreteFunction(grid, alpha)


# --------------------------------------------------------------------------
# io


def fmt(x) -> str:
    return "%.17g" % float(x)


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def read_solution_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0][:2] != ["t", "alpha"]:
        raise ConfigError(f"{path} must start with a 't,alpha,...' header")
    data = np.array([[float(v) for v in r[:2]] for r in rows[1:]])
    return data[:, 0], data[:, 1]


def report_text(title, lines, cfg) -> str:
    body = [f"# biharm {title}", NORMALIZATION_NOTE, *lines, CONFIG_MARKER,
            json.dumps(cfg, indent=2, sort_keys=True)]
    return "\n".join(body) + "\n"


def out_dir(args, cfg=None) -> Path:
    env = os.environ.get("BIHARM_OUT")
    if env:
        return Path(env)
    if args.out:
        return Path(args.out)
    if cfg is not None:
        return Path(cfg["output"]["directory"])
    return Path("biharm_out")


# --------------------------------------------------------------------------
# commands


def residual_points(geom, grid, fd_step):
    t = grid.nodes
    if geom.periodic:
        return t
    margin = 2 * fd_step
    lo, hi = max(grid.a, geom.domain[0]) + margin, min(grid.b, geom.domain[1]) - margin
    return t[(t >= lo) & (t <= hi)]


def cmd_residual(args) -> int:
    cfg = load_config(args.config)
    geom, grid, _ = build_problem(cfg)
    if args.solution:
        spec = {"kind": "file", "path": args.solution}
    else:
        spec = cfg["curve"] or cfg["initial"]
    if spec["kind"] == "linear":
        raise ConfigError("a linear initial guess is not a smooth curve; give a curve block")
    curve = build_curve(spec, geom, cfg["geometry"].get("lambda"))
    fd_step = 1e-3 * (grid.b - grid.a)
    rows = [(t, el_residual_along_curve(geom, curve, float(t), fd_step)) for t in residual_points(geom, grid, fd_step)]
    worst = max((abs(r) for _, r in rows), default=0.0)
    out = out_dir(args, cfg)
    if cfg["output"]["emit_csv"]:
        atomic_write(out / "residual.csv", csv_text(["t", "residual"], rows))
    if cfg["output"]["emit_report"]:
        atomic_write(out / "residual_report.txt",
                     report_text("residual", [f"points = {len(rows)}", f"max_abs_residual = {worst!r}"], cfg))
    print(f"max |residual| = {worst:.3e} over {len(rows)} points")
    return EXIT_OK


def solution_rows(geom, df):
    X, P, Q = discrete_jets(geom, df)
    rows = []
    for t, x, p, q in zip(df.grid.nodes, X[:, 0], P[:, 0], Q[:, 0]):
        rows.append((t, x, p, q, tension(geom, Jet2(t, x, p, q))))
    return rows


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    geom, grid, scfg = build_problem(cfg)
    rep = solve(geom, build_initial(cfg, geom, grid), scfg)
    lines = [f"energy = {rep.energy!r}", f"grad_norm = {rep.grad_norm!r}",
             f"iterations = {rep.iterations}", f"converged = {str(rep.converged).lower()}"]
    if cfg["exact"] is not None:
        ex = build_curve(cfg["exact"], geom, cfg["geometry"].get("lambda"))
        err = float(np.max(np.abs(rep.solution.values[:, 0] - np.asarray(ex(grid.nodes)))))
        lines.append(f"sup_error = {err!r}")
    out = out_dir(args, cfg)
    if cfg["output"]["emit_csv"]:
        atomic_write(out / "solution.csv", csv_text(SOLUTION_HEADER, solution_rows(geom, rep.solution)))
    if cfg["output"]["emit_report"]:
        atomic_write(out / "solve_report.txt", report_text("solve", lines, cfg))
    print("\n".join(lines))
    return EXIT_OK if rep.converged else EXIT_NOCONV


def cmd_stability(args) -> int:
    cfg = load_config(args.config)
    geom, grid, scfg = build_problem(cfg)
    if args.solution:
        crit = profile_from_file(args.solution, grid)
    else:
        rep = solve(geom, build_initial(cfg, geom, grid), scfg)
        if not rep.converged:
            print(f"solver did not converge (|grad| = {rep.grad_norm:.3e})", file=sys.stderr)
            return EXIT_NOCONV
        crit = rep.solution
    try:
        srep = analyze_stability(geom, crit)
    except NotCriticalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    lines = srep.lines()
    if srep.quad_form_checks:
        k = geom.k
        for mode in range(4):
            disc, printed = quad_form_vs_analytic(k, mode, grid.n)
            lines.append(f"mode {mode}: discrete = {disc!r} printed_formula = {printed!r}"
                         f" exact_second_variation = {second_variation_mode(k, mode)!r}")
    out = out_dir(args, cfg)
    if cfg["output"]["emit_csv"]:
        atomic_write(out / "eigenvalues.csv",
                     csv_text(["index", "eigenvalue"], [(str(i), v) for i, v in enumerate(srep.eigen_low)]))
    if cfg["output"]["emit_report"]:
        atomic_write(out / "stability_report.txt", report_text("stability", lines, cfg))
    print("\n".join(lines))
    return EXIT_OK


def cmd_sampson(args) -> int:
    lam = args.lam
    if not (math.isfinite(lam) and lam > 0):
        print("error: lambda must be positive", file=sys.stderr)
        return EXIT_DOMAIN
    rep = sampson_analyze(lam)
    lines = rep.lines()
    atomic_write(out_dir(args) / "sampson_report.txt",
                 "\n".join(["# biharm sampson", *lines]) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.families is None:
        fams = None
    else:
        fams = [f for f in args.families.split(",") if f.strip()]
        if not fams:
            print("error: empty family selection", file=sys.stderr)
            return EXIT_CONFIG
    try:
        results = verify_mod.run(fams, seed=args.seed, mutate=args.mutate)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    for name, (ok, detail) in results.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for ok, _ in results.values()) else EXIT_VERIFY


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biharm", description=__doc__.split("\n")[0])
    parser.add_argument("--verbose", "-v", action="store_true", help="enable INFO logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON config (or a report embedding one)")
        p.add_argument("--out", help="output directory (BIHARM_OUT overrides)")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks (default 0)")

    p = sub.add_parser("residual", help="Euler-Lagrange residual along a curve")
    common(p)
    p.add_argument("--solution", help="solution CSV to interpolate instead of a config curve")
    p.set_defaults(func=cmd_residual)

    p = sub.add_parser("solve", help="find a discrete critical point")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("stability", help="classify a critical point")
    common(p)
    p.add_argument("--solution", help="solution CSV on the configured grid")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("sampson", help="analyze the positive-minimum cylinder profile")
    common(p, config=False)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="eigenvalue (default 1)")
    p.set_defaults(func=cmd_sampson)

    p = sub.add_parser("verify", help="run the oracle suite")
    common(p, config=False)
    p.add_argument("--families", help="comma-separated family names (default all)")
    p.add_argument("--mutate", action="store_true", help="inject a fault into the analytic partials")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
