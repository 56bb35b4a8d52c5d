"""Command-line front end.

Every subcommand reads an optional JSON config, merges it over built-in
defaults (unknown keys are rejected), runs, and writes into --out-dir:

* ``report.json``: results only, floats at 17 significant digits, so that
  identical (config, seed) give byte-identical files;
* ``manifest.json``: config hash, versions, timings and headline numbers;
* CSV tables and field files where the command produces them.

Exit codes: 0 success, 1 a verification found failures, 2 invalid config,
3 a numerical guard or solver failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .angular_green import PoleError
from .discretization import (BoundaryTrace, GridError, SupportError, TestFunctionSpec,
                             make_grid, sample, save_field)
from .guards import GuardError
from .norms import ExponentError
from .transforms import ContourError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_GUARD = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


# ---------------------------------------------------------------- defaults

_GRID = {"theta": 2.2, "s_min": -12.0, "s_max": 6.0, "n_s": 256, "n_phi": 33}
_PARAMS = {"mu": [1.0, 0.0], "alpha": -0.4, "ell": 0, "alpha0": 4.0, "alpha1": 0.05, "eps": 0.1}
_FSPEC = {"kind": "log_gaussian", "center": 0.0, "width": 1.0, "exponent": 0.0, "seed": 0,
          "n_terms": 3, "angular_mode": 0}

DEFAULTS = {
    "solve-neumann": {
        "grid": dict(_GRID, s_min=-12.0, s_max=12.0),
        "ell": 0, "alpha": -0.4, "alpha1": 0.05,
        "data": {"f": dict(_FSPEC), "g": dict(_FSPEC, center=0.5)},
    },
    "solve-resolvent": {
        "grid": dict(_GRID, s_min=-16.0),
        "params": dict(_PARAMS),
        "data": {"f": dict(_FSPEC), "g": dict(_FSPEC, center=0.5)},
        "defect_steps": 0,
        "save_field": True,
    },
    "solve-heat": {
        "grid": dict(_GRID, s_min=-16.0, s_max=6.0, n_s=128, n_phi=9),
        "params": dict(_PARAMS),
        "time": {"t0": -8.0, "t1": 32.0, "n_t": 256, "beta": 1.0},
        "smooth_onset": True,
        "ells": [0],
        "eval_s_min": -11.0,
    },
    "cascade": {
        "grid": dict(_GRID, s_min=-18.0, s_max=2.0, n_s=2048, n_phi=49),
        "params": dict(_PARAMS, theta=2.2, ell=1),
        "seeds": [[0, 0, 1.0, 0.0], [0, 1, 0.5, 0.0]],
        "n_phi_coeff": 49,
        "cross_validate": True,
        "defect_steps": 6,
        "defect_order": 8,
    },
    "verify-inequalities": {
        "cases": 1000,
        "ids": "all",
    },
    "sweep-estimates": {
        "grid": dict(_GRID, s_min=-24.0, s_max=6.0, n_s=512, n_phi=33),
        "params": dict(_PARAMS),
        "mu_moduli": [1.0, 4.0, 16.0, 64.0],
        "mu_args": [0.0, 1.0471975511965976, -1.0471975511965976],
        "families": ["base", "weighted", "cor-base", "smooth", "higher"],
        "eval_s_min": -10.0,
        "with_f": False,
        "slope_tol": 0.1,
    },
    "coercivity": {
        "grid": dict(_GRID, s_min=-6.0, s_max=6.0, n_s=128, n_phi=33),
        "n_fields": 100,
        "n_calibration": 40,
        "mus": [[1.0, 0.0], [0.0, 1.0], [2.0, 3.4641016151377544]],
    },
}

# keys whose value is a free-form list or may be null
_FREE = {"mu", "seeds", "mu_moduli", "mu_args", "families", "ells", "mus", "ids", "f", "g"}


def _merge(default, given, path: str):
    if not isinstance(given, dict):
        raise ConfigError(path, "expected an object")
    out = copy.deepcopy(default)
    for k, v in given.items():
        key = f"{path}.{k}"
        if k not in default:
            raise ConfigError(key, "unknown key")
        d = default[k]
        if k in ("f", "g"):
            out[k] = None if v is None else _merge(_FSPEC, v, key)
        elif isinstance(d, dict):
            out[k] = _merge(d, v, key)
        elif k in _FREE:
            if not isinstance(v, (list, str)):
                raise ConfigError(key, "expected a list")
            out[k] = v
        elif isinstance(d, bool):
            if not isinstance(v, bool):
                raise ConfigError(key, "expected true/false")
            out[k] = v
        elif isinstance(d, (int, float)):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(key, "expected a number")
            if isinstance(d, int) and not isinstance(d, bool) and v != int(v):
                raise ConfigError(key, "expected an integer")
            out[k] = type(d)(v)
        elif isinstance(d, str):
            if not isinstance(v, str):
                raise ConfigError(key, "expected a string")
            out[k] = v
        else:
            out[k] = v
    return out


def load_config(command: str, path: Optional[str]) -> dict:
    given = {}
    if path:
        try:
            given = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", str(exc)) from exc
    return _merge(DEFAULTS[command], given, "config")


# ---------------------------------------------------------------- output

def _clean(x):
    """Python scalars, lists and dicts only; complex numbers become [re, im]."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(float(x.real)), _clean(float(x.imag))]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return json.dumps(str(x))
        return f"{x:.17g}"
    return json.dumps(x)


def dump_json(obj, indent: int = 0) -> str:
    """Deterministic JSON with floats at 17 significant digits and sorted keys."""
    obj = _clean(obj)
    pad, inner = " " * indent, " " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {dump_json(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_fmt(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dump_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    return _fmt(obj)


def write_csv(path: Path, rows: list[dict]):
    if not rows:
        path.write_text("")
        return
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in (_clean(r[c]) for c in cols)])


def config_hash(cfg: dict, seed: int) -> str:
    return hashlib.sha256(dump_json({"config": cfg, "seed": seed}).encode()).hexdigest()


# ---------------------------------------------------------------- builders

def _grid(c: dict):
    return make_grid(c["theta"], c["s_min"], c["s_max"], c["n_s"], c["n_phi"])


def _params(c: dict, theta: float):
    from .robin_resolvent import ResolventParams
    mu = c["mu"]
    mu = complex(mu[0], mu[1]) if isinstance(mu, list) else complex(mu)
    return ResolventParams(mu, c.get("theta", theta), c["alpha"], c["alpha0"], c["alpha1"],
                           int(c["ell"]), c["eps"])


def _spec(c: Optional[dict], seed: int) -> Optional[TestFunctionSpec]:
    if c is None or c["kind"] == "zero":
        return None
    return TestFunctionSpec(c["kind"], c["center"], c["width"], c["exponent"], c["seed"] + seed,
                            int(c["n_terms"]), int(c["angular_mode"]))


def _data(cfg: dict, grid, seed: int):
    fs, gs = _spec(cfg["data"]["f"], seed), _spec(cfg["data"]["g"], seed)
    f = sample(fs, grid) if fs else None
    g = sample(gs, grid, "trace") if gs else None
    return f, g


def _zero_data(grid):
    return None, BoundaryTrace(grid, np.zeros(grid.n_s), np.zeros(grid.n_s))


# ---------------------------------------------------------------- commands

def cmd_solve_neumann(cfg, seed, out: Path, threads: int) -> tuple[dict, dict, int]:
    from .neumann_solver import laplacian_residual, neumann_residual, redsol_check, solve_neumann
    grid = _grid(cfg["grid"])
    f, g = _data(cfg, grid, seed)
    if f is None and g is None:
        f, g = _zero_data(grid)
    sol = solve_neumann(f, g, int(cfg["ell"]), cfg["alpha"], alpha1=cfg["alpha1"])
    report = {"laplacian_residual": laplacian_residual(sol, f),
              "neumann_residual": neumann_residual(sol, g),
              "contour_re": sol.contour_re,
              "max_abs": float(np.abs(sol.field.values).max())}
    if np.any(sol.field.values):
        report["estimate"] = redsol_check(sol, f, g)
    save_field(out / "solution.txt", sol.field)
    return report, {}, EXIT_OK


def cmd_solve_resolvent(cfg, seed, out: Path, threads: int):
    from .robin_resolvent import pde_residual, solve_resolvent_direct
    grid = _grid(cfg["grid"])
    p = _params(cfg["params"], grid.theta)
    f, g = _data(cfg, grid, seed)
    if f is None and g is None:
        f, g = _zero_data(grid)
    sol = solve_resolvent_direct(f, g, p, defect_steps=int(cfg["defect_steps"]))
    report = {"params": p.to_dict(), "info": sol.info,
              "max_abs": float(np.abs(sol.field.values).max()),
              "norms": sol.norm_report.to_json(),
              "expansion": sol.expansion.to_json()}
    if np.any(sol.field.values):
        report["residual"] = pde_residual(sol.field, f, g, p.mu, p.alpha)
    if cfg["save_field"]:
        save_field(out / "solution.txt", sol.field)
    return report, {}, EXIT_OK


def cmd_solve_heat(cfg, seed, out: Path, threads: int):
    from .heat_solver import (ParabolicProblem, heat_residual, manufactured_heat, solve_heat,
                              verify_wellposedness)
    grid = _grid(cfg["grid"])
    p = _params(cfg["params"], grid.theta)
    tc = cfg["time"]
    n_t = int(tc["n_t"])
    t = tc["t0"] + (tc["t1"] - tc["t0"]) * np.arange(n_t) / n_t
    U, F, G = manufactured_heat(grid, t, cfg["smooth_onset"])
    sol = solve_heat(ParabolicProblem(grid, t, tc["beta"], p, F, G))
    w = np.exp(-tc["beta"] * t)[:, None, None]
    err = float(np.abs(w * (sol.U - U)).max() / np.abs(w * U).max())
    rows = []
    for ell in cfg["ells"]:
        rep = verify_wellposedness(sol, int(ell), eval_s_min=cfg["eval_s_min"])
        rows.append({"ell": int(ell), "lhs": rep.get("lhs", int(ell), p.alpha),
                     "rhs": rep.get("rhs", int(ell), p.alpha),
                     "ratio": rep.get("ratio", int(ell), p.alpha)})
    write_csv(out / "wellposedness.csv", rows)
    report = {"weighted_relative_error": err, "causality_defect": sol.causality_defect(),
              "residual": heat_residual(sol), "wellposedness": rows,
              "info": {k: v for k, v in sol.info.items() if k != "active"}}
    return report, {"causality_defect": report["causality_defect"]}, EXIT_OK


def cmd_cascade(cfg, seed, out: Path, threads: int):
    from .robin_resolvent import (cascade_data, cascade_residual, solve_polynomial_cascade,
                                  solve_resolvent_direct)
    grid = _grid(cfg["grid"])
    p = _params(cfg["params"], grid.theta)
    seeds = {(int(n), int(m)): complex(re, im) for n, m, re, im in cfg["seeds"]}
    pu = solve_polynomial_cascade(None, None, p, n_phi=int(cfg["n_phi_coeff"]), seeds=seeds)
    report = {"expansion": pu.to_json(), "cascade_residual": cascade_residual(pu, None, None, p)}
    if cfg["cross_validate"]:
        if grid.n_phi != int(cfg["n_phi_coeff"]):
            raise ConfigError("config.n_phi_coeff", "must equal grid.n_phi for cross-validation")
        f, g = cascade_data(pu, grid, p.mu)
        sol = solve_resolvent_direct(f, g, p, extract=False, defect_steps=int(cfg["defect_steps"]),
                                     defect_order=int(cfg["defect_order"]))
        ref = pu.evaluate(grid).values
        report["cross_validation"] = float(np.abs(sol.field.values - ref).max() / np.abs(ref).max())
    return report, {}, EXIT_OK


def _run_ids(args):
    from .inequality_lab import run_suite
    ids, n, seed, wdir = args
    return run_suite(n, seed, ids=ids, witness_dir=wdir)


def cmd_verify_inequalities(cfg, seed, out: Path, threads: int):
    from .inequality_lab import REGISTRY, SHARPNESS_IDS, run_suite, sharpness_probe
    ids = list(REGISTRY) if cfg["ids"] == "all" else list(cfg["ids"])
    for i in ids:
        if i not in REGISTRY:
            raise ConfigError("config.ids", f"unknown inequality {i!r}")
    n = int(cfg["cases"])
    wdir = str(out / "witnesses")
    if threads > 1:
        chunks = [ids[k::threads] for k in range(threads) if ids[k::threads]]
        with ProcessPoolExecutor(len(chunks)) as ex:
            parts = list(ex.map(_run_ids, [(c, n, seed, wdir) for c in chunks]))
        results = {}
        for part in parts:
            results.update(part["results"])
        report = {"seed": seed, "cases_per_id": n, "slack": parts[0]["slack"],
                  "results": {i: results[i] for i in ids},
                  "sharpness": {i: sharpness_probe(i) for i in SHARPNESS_IDS if i in ids},
                  "failures": sum(r.get("failed", 0) for r in results.values()),
                  "errors": sum(1 for r in results.values() if "error" in r)}
    else:
        report = run_suite(n, seed, ids=ids, witness_dir=wdir)
    rows = [{"id": i, "n": r["n"], "passed": r["passed"], "failed": r["failed"],
             "max_ratio": r.get("max_ratio", float("nan"))} for i, r in report["results"].items()]
    write_csv(out / "inequalities.csv", rows)
    bad = report["failures"] or report["errors"]
    return report, {"failures": report["failures"]}, EXIT_FAIL if bad else EXIT_OK


def cmd_sweep_estimates(cfg, seed, out: Path, threads: int):
    from .robin_resolvent import FAMILIES, dilated_bump_data, sweep_estimates
    grid = _grid(cfg["grid"])
    p = _params(cfg["params"], grid.theta)
    fams = list(cfg["families"])
    for fam in fams:
        if fam not in FAMILIES:
            raise ConfigError("config.families", f"unknown family {fam!r}")
    with_f = cfg["with_f"]
    data = lambda gr, mu: dilated_bump_data(gr, mu, with_f=with_f)
    rows, slopes = [], {}
    for arg in cfg["mu_args"]:
        mus = [m * complex(math.cos(arg), math.sin(arg)) for m in cfg["mu_moduli"]]
        res = sweep_estimates(data, p, mus, grid, families=fams, eval_s_min=cfg["eval_s_min"])
        for r in res["rows"]:
            rows.append({"family": r["family"], "mu_abs": abs(r["mu"]), "mu_arg": float(arg),
                         "lhs": r["lhs"], "rhs": r["rhs"], "ratio": r["ratio"]})
        for fam, sl in res["slopes"].items():
            slopes[f"{fam}@{arg:.6f}"] = sl
    write_csv(out / "sweep.csv", rows)
    worst = max(abs(v) for v in slopes.values())
    ok = worst <= cfg["slope_tol"]
    report = {"slopes": slopes, "worst_abs_slope": worst, "within_tolerance": ok, "rows": rows}
    return report, {"worst_abs_slope": worst}, EXIT_OK if ok else EXIT_FAIL


def cmd_coercivity(cfg, seed, out: Path, threads: int):
    from .robin_resolvent import calibrate_coercivity, coercivity_check
    grid = _grid(cfg["grid"])
    mus = [complex(a, b) for a, b in cfg["mus"]]
    fields = [sample(TestFunctionSpec("random", 0.0, 1.0, seed=seed * 100003 + k), grid)
              for k in range(int(cfg["n_fields"]))]
    cal = calibrate_coercivity(fields[:int(cfg["n_calibration"])], mus)
    ratios = [coercivity_check(u, mu, cal["c0"], cal["c1"], cal["c2"])[2] for u in fields for mu in mus]
    c_star = float(min(ratios))
    report = {"calibration": cal, "c_star": c_star, "median_ratio": float(np.median(ratios)),
              "n_fields": len(fields), "mus": mus}
    write_csv(out / "coercivity.csv", [{"case": i, "ratio": r} for i, r in enumerate(ratios)])
    return report, {"c_star": c_star, "c0": cal["c0"], "c1": cal["c1"], "c2": cal["c2"]}, \
        EXIT_OK if c_star > 0 else EXIT_FAIL


COMMANDS = {
    "solve-neumann": cmd_solve_neumann,
    "solve-resolvent": cmd_solve_resolvent,
    "solve-heat": cmd_solve_heat,
    "cascade": cmd_cascade,
    "verify-inequalities": cmd_verify_inequalities,
    "sweep-estimates": cmd_sweep_estimates,
    "coercivity": cmd_coercivity,
}


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wedgeheat", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file merged over the defaults")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out-dir", default=".")
        sp.add_argument("--threads", type=int, default=1)
        if name == "verify-inequalities":
            sp.add_argument("--cases", help="cases per inequality, or 'all' for 1000")
        if name == "sweep-estimates":
            sp.add_argument("--theorem", help="comma-separated estimate families")
            sp.add_argument("--mu-grid", help="comma-separated |mu| values")
    return ap


def _apply_flags(cfg: dict, args) -> dict:
    if getattr(args, "cases", None):
        if args.cases == "all":
            cfg["cases"] = 1000
        else:
            try:
                cfg["cases"] = int(args.cases)
            except ValueError as exc:
                raise ConfigError("--cases", "expected an integer or 'all'") from exc
    if getattr(args, "theorem", None):
        cfg["families"] = args.theorem.split(",")
    if getattr(args, "mu_grid", None):
        try:
            cfg["mu_moduli"] = [float(x) for x in args.mu_grid.split(",")]
        except ValueError as exc:
            raise ConfigError("--mu-grid", "expected comma-separated numbers") from exc
    return cfg


def run(command: str, args) -> int:
    out = Path(args.out_dir)
    t0 = time.perf_counter()
    try:
        cfg = _apply_flags(load_config(command, args.config), args)
        out.mkdir(parents=True, exist_ok=True)
        report, headline, code = COMMANDS[command](cfg, args.seed, out, max(1, args.threads))
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GuardError, PoleError, GridError, SupportError, ContourError, ExponentError,
            ArithmeticError) as exc:
        print(f"numerical guard failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except RuntimeError as exc:   # solver failures
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_GUARD
    elapsed = time.perf_counter() - t0
    (out / "report.json").write_text(dump_json(report) + "\n")
    manifest = {
        "command": command,
        "config": cfg,
        "config_hash": config_hash(cfg, args.seed),
        "seed": args.seed,
        "threads": args.threads,
        "versions": {"wedgeheat": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "timings": {"total_seconds": elapsed},
        "results": headline,
        "exit_code": code,
    }
    (out / "manifest.json").write_text(dump_json(manifest) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
