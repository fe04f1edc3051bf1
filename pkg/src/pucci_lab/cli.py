"""Command-line experiment runner.

    pucci-lab KIND [--config PATH] [--out DIR] [--seed N] [--threads N]
    pucci-lab replay SUMMARY

Configs are TOML files with the blocks [operator], [domain], [numeric] and
[problem]. Every run computes all of its results in memory before writing
anything, so a failing run leaves no partial artifacts. The summary echoes
the normalised config and the seed; ``replay`` re-runs it and compares.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, backend
from .errors import ConfigError, PucciLabError, ReplayMismatch
from .expr import parse_scalar, parse_vector
from .grid import Disc, build_grid, domain_from_dict
from .io import field_csv, field_pgm, field_svg, sha256_text, table_csv

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

log = logging.getLogger("pucci_lab")

SCHEMA_VERSION = 1
KINDS = ("solve", "eigen", "strip-sweep", "below", "harnack", "holder", "liouville",
         "barrier-check", "hypothesis-check")
SEEDED_KINDS = ("harnack", "barrier-check", "hypothesis-check")
_SOLVE_KEYS = ("tol_res", "tol_step", "cfl", "max_sweeps", "blowup_factor", "epsilon", "growth_window")


# -- config -----------------------------------------------------------------


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


def _block(cfg: dict, name: str, required: bool = False) -> dict:
    blk = cfg.get(name)
    if blk is None:
        if required:
            raise ConfigError(f"missing [{name}] block")
        return {}
    if not isinstance(blk, dict):
        raise ConfigError(f"[{name}] must be a table")
    return blk


def _number(blk: dict, key: str, where: str, default=None, required: bool = False):
    if key not in blk:
        if required:
            raise ConfigError(f"missing key {key!r} in [{where}]")
        return default
    v = blk[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    return float(v)


def build_operator(cfg: dict, required: bool = True):
    from .operator import OperatorSpec

    blk = _block(cfg, "operator", required)
    if not blk and not required:
        return OperatorSpec(0.0, 1.0, 1.0, "pucci_plus")
    alpha = _number(blk, "alpha", "operator", required=True)
    a = _number(blk, "a", "operator", required=True)
    A = _number(blk, "A", "operator", default=a)
    kind = blk.get("kind", "pucci_plus")
    drift = parse_vector(blk["drift"]) if "drift" in blk else None
    potential = parse_scalar(blk["potential"]) if "potential" in blk else None
    if potential is not None and not callable(potential):
        const = potential
        potential = parse_scalar(repr(const))
    try:
        return OperatorSpec(alpha, a, A, kind, drift, potential,
                            _number(blk, "h_inf", "operator", 0.0), _number(blk, "V_inf", "operator", 0.0))
    except PucciLabError as exc:
        raise ConfigError(f"invalid [operator]: {exc}") from None


def build_domain(blk: dict):
    try:
        return domain_from_dict(blk)
    except PucciLabError as exc:
        raise ConfigError(str(exc)) from None


def build_solve_config(cfg: dict, base=None):
    from .solver import SolveConfig

    blk = _block(cfg, "numeric")
    base = base or SolveConfig()
    kw = {}
    for k in _SOLVE_KEYS:
        if k in blk:
            v = _number(blk, k, "numeric")
            kw[k] = int(v) if k in ("max_sweeps", "growth_window") else v
    try:
        return SolveConfig(**{**base.__dict__, **kw})
    except PucciLabError as exc:
        raise ConfigError(f"invalid [numeric]: {exc}") from None


def _h(cfg: dict, default: float) -> float:
    h = _number(_block(cfg, "numeric"), "h", "numeric", default)
    if not h > 0:
        raise ConfigError("numeric.h must be positive")
    return h


def _field_or_const(value, default=0.0):
    return parse_scalar(default if value is None else value)


@dataclass
class Plan:
    """A validated experiment ready to run."""

    kind: str
    config: dict
    seed: int
    runner: object
    meta: dict = field(default_factory=dict)


def _problem(cfg):
    return _block(cfg, "problem")


def plan_experiment(kind: str, cfg: dict, seed_override: int | None = None) -> Plan:
    """Validate the config for ``kind``; raises ConfigError without side effects."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    if "kind" in cfg and cfg["kind"] != kind:
        raise ConfigError(f"config is for kind {cfg['kind']!r}, not {kind!r}")
    cfg = json.loads(json.dumps(cfg))  # normalised deep copy (TOML -> JSON types)
    cfg["kind"] = kind
    seed = int(seed_override if seed_override is not None else cfg.get("seed", 0))
    cfg["seed"] = seed
    runner = _PLANNERS[kind](cfg, seed)
    return Plan(kind, cfg, seed, runner)


# -- individual experiments ---------------------------------------------------
# each planner validates eagerly and returns a closure producing (results, artifacts)


def _plan_solve(cfg, seed):
    from .solver import solve_dirichlet

    spec = build_operator(cfg)
    domain = build_domain(_block(cfg, "domain", True))
    h = _h(cfg, 1 / 32)
    scfg = build_solve_config(cfg)
    p = _problem(cfg)
    f, g = _field_or_const(p.get("f")), _field_or_const(p.get("g"))
    lam = _number(p, "lambda", "problem", 0.0)

    def run():
        grid = build_grid(domain, h)
        out = solve_dirichlet(spec, grid, f, g, lam, scfg)
        res = {**out.summary(), "sup": out.field.sup_norm(), "n_interior": grid.n_interior}
        if not out.converged:
            res["warning"] = f"solver stopped with status {out.status}"
        return res, _field_artifacts("field", out.field)

    return run


def _field_artifacts(name, fld):
    return {f"{name}.csv": field_csv(fld), f"{name}.svg": field_svg(fld, name), f"{name}.pgm": field_pgm(fld)}


def _plan_eigen(cfg, seed):
    from . import eigen

    spec = build_operator(cfg)
    domain = build_domain(_block(cfg, "domain", True))
    h = _h(cfg, 1 / 32)
    p = _problem(cfg)
    method = p.get("method", "up")
    if method not in ("up", "down", "bisect"):
        raise ConfigError("problem.method must be up, down or bisect")
    base = eigen.BISECT_CONFIG if method == "bisect" else eigen.EIGEN_CONFIG
    scfg = build_solve_config(cfg, base)
    tol = _number(p, "tol", "problem", 1e-6)
    lrange = p.get("lambda_range", [0.0, 100.0])
    if not (isinstance(lrange, list) and len(lrange) == 2):
        raise ConfigError("problem.lambda_range must be a pair")

    def run():
        grid = build_grid(domain, h)
        if method == "bisect":
            b = eigen.eigen_bisect(spec, grid, scfg, tuple(map(float, lrange)))
            return ({"lambda": b.lam, "bracket": list(b.bracket), "trials": len(b.trials)},
                    {"bisection.csv": table_csv(b.trials)})
        fn = eigen.eigen_up if method == "up" else eigen.eigen_down
        r = fn(spec, grid, scfg, tol=tol)
        trace = [{"iteration": i + 1, "lambda": v} for i, v in enumerate(r.trace)]
        return r.summary(), {**_field_artifacts("eigenfunction", r.eigenfunction), "trace.csv": table_csv(trace)}

    return run


def _plan_strip_sweep(cfg, seed):
    from . import eigen

    spec = build_operator(cfg)
    scfg = build_solve_config(cfg, eigen.EIGEN_CONFIG)
    p = _problem(cfg)
    Ms = [float(m) for m in p.get("M_values", [1.0, 2.0, 4.0])]
    factors = [float(s) for s in p.get("length_factors", [4.0, 8.0, 16.0])]
    nodes = int(p.get("nodes_across", 16))
    if not Ms or any(m <= 0 for m in Ms) or nodes < 2:
        raise ConfigError("problem.M_values must be positive and nodes_across >= 2")

    def run():
        rows, out = [], {}
        for M in Ms:
            # epsilon follows the spacing, so strips of every width are rescaled copies
            ex = eigen.eigen_exhaust(spec, M, scfg, [f * M for f in factors], h=M / nodes)
            out[repr(M)] = ex.summary()
            rows += [{"M": M, **r} for r in ex.rows()]
        products = [out[repr(M)]["product"] for M in Ms]
        spread = (max(products) - min(products)) / min(products)
        return {"strips": out, "products": products, "relative_spread": spread}, {"sweep.csv": table_csv(rows)}

    return run


def _plan_below(cfg, seed):
    from . import eigen

    spec = build_operator(cfg)
    domain = build_domain(_block(cfg, "domain", True))
    h = _h(cfg, 1 / 32)
    scfg = build_solve_config(cfg, eigen.EIGEN_CONFIG)
    p = _problem(cfg)
    frac = _number(p, "lambda_fraction", "problem", 0.5)
    f = _field_or_const(p.get("f"), "-maximum(0, 1 - 16*((x - 0.5)**2 + (y - 0.5)**2))")

    def run():
        grid = build_grid(domain, h)
        thr = eigen.eigen_up(spec, grid, scfg).lam
        r = eigen.solve_below(spec, grid, scfg, frac * thr, f, thr)
        return r.summary(), _field_artifacts("field", r.field)

    return run


def _plan_harnack(cfg, seed):
    from . import harnack

    spec = build_operator(cfg)
    outer = build_domain(_block(cfg, "domain") or {"kind": "disc", "center": [0, 0], "radius": 1.0})
    p = _problem(cfg)
    inner = build_domain(p.get("inner", {"kind": "disc", "center": [0, 0], "radius": 0.25}))
    trials = int(p.get("trials", 100))
    if trials < 1:
        raise ConfigError("problem.trials must be >= 1")
    h = _h(cfg, 1 / 16)
    scfg = build_solve_config(cfg, harnack.HARNACK_CONFIG)
    with_rhs = bool(p.get("with_rhs", False))
    x0, x1, y0, y1 = outer.bbox()
    centre = ((x0 + x1) / 2, (y0 + y1) / 2)
    bfam = harnack.trig_boundary_family(centre, int(p.get("modes", 5)), float(p.get("budget", 0.95)))

    def run():
        if with_rhs:
            ffam = harnack.bump_rhs_family(centre, 0.5 * min(x1 - x0, y1 - y0) / 2)
            r = harnack.measure_k_rhs(spec, ffam, outer, inner, trials, scfg, h, seed, bfam)
        else:
            r = harnack.measure_k(spec, bfam, outer, inner, trials, scfg, h, seed)
        return r.summary(), {"trials.csv": table_csv(r.rows)}

    return run


def _plan_holder(cfg, seed):
    from . import harnack
    from .solver import solve_dirichlet

    spec = build_operator(cfg)
    domain = build_domain(_block(cfg, "domain") or {"kind": "disc", "center": [0, 0], "radius": 1.0})
    h = _h(cfg, 1 / 64)
    scfg = build_solve_config(cfg, harnack.HARNACK_CONFIG)
    p = _problem(cfg)
    g = _field_or_const(p.get("g"), "1 + 0.5*x - 0.25*(x**3 - 3*x*y**2)")
    centre = p.get("center", [0.0, 0.0])
    R0 = _number(p, "R0", "problem", 16 * h)
    levels = int(p.get("levels", 3))

    def run():
        grid = build_grid(domain, h)
        out = solve_dirichlet(spec, grid, 0.0, g, 0.0, scfg)
        tr = harnack.oscillation_decay(out.field, tuple(centre), R0, levels)
        rows = [{"radius": r, "oscillation": o, "nodes": n} for r, o, n in zip(tr.radii, tr.oscillations, tr.nodes)]
        return ({"solve": out.summary(), **tr.to_dict()},
                {**_field_artifacts("field", out.field), "oscillation.csv": table_csv(rows)})

    return run


def _plan_liouville(cfg, seed):
    from . import harnack

    spec = build_operator(cfg)
    p = _problem(cfg)
    boxes = [float(b) for b in p.get("box_sizes", [4.0, 8.0, 16.0])]
    h = _h(cfg, 0.25)
    scfg = build_solve_config(cfg, harnack.HARNACK_CONFIG)
    g = _field_or_const(p.get("g")) if "g" in p else None

    def run():
        r = harnack.liouville_probe(spec, boxes, scfg, h, g)
        rows = [{"L": L, "oscillation": o, "sweeps": s} for L, o, s in zip(r.boxes, r.oscillations, r.sweeps)]
        return r.to_dict(), {"liouville.csv": table_csv(rows)}

    return run


def _plan_barrier_check(cfg, seed):
    from . import barrier

    spec = build_operator(cfg, required=False)
    p = _problem(cfg)
    names = p.get("presets", ["unit"])
    if any(n not in barrier.PRESETS for n in names):
        raise ConfigError(f"problem.presets must be drawn from {barrier.PRESETS}")
    gamma = _number(p, "gamma", "problem")
    n = int(p.get("samples", 100_000))
    sectors = bool(p.get("sectors", False))
    strip_exps = [float(g) for g in p.get("strip_gamma", [])]
    power = bool(p.get("power", False))

    def run():
        certs = {}
        for name in names:
            b = barrier.preset(name, gamma, spec.a, spec.A, spec.alpha, spec.h_inf, spec.V_inf)
            rep = barrier.verify_lemma1(spec, b, n, seed)
            certs[name] = {"barrier": b.to_dict(), **rep.to_dict()}
        res = {"operator": spec.to_dict(), "lemma1": certs,
               "pass": all(c["passed"] for c in certs.values())}
        if sectors or power:
            sec = barrier.verify_sectors(n, seed)
            res["sectors"] = sec.to_dict()
            res["pass"] &= sec.passed
            if power:
                pw = barrier.verify_lem1_power(spec.alpha, spec.a, spec.h_inf, sec.delta, n, seed)
                res["power"] = pw.to_dict()
        if strip_exps:
            res["strip"] = {repr(g): barrier.verify_strip_supersolution(spec.alpha, spec.a, spec.A, 1.0, g, n, seed)
                            .to_dict() for g in strip_exps}
            res["pass"] &= all(s["passed"] for s in res["strip"].values())
        res["samples"] = n
        return res, {}

    return run


def _plan_hypothesis_check(cfg, seed):
    from .operator import check_h1, check_h2, check_h5

    spec = build_operator(cfg, required=False)
    p = _problem(cfg)
    n = int(p.get("samples", 10_000))

    def run():
        res = {"H1": check_h1(spec, n, seed, tol=1e-10).to_dict(), "H2": check_h2(spec, n, seed).to_dict()}
        if spec.drift is not None:
            res["H5"] = check_h5(spec.drift, spec.alpha, n, seed).to_dict()
        res["pass"] = all(r["passed"] for r in res.values())
        return res, {}

    return run


_PLANNERS = {
    "solve": _plan_solve, "eigen": _plan_eigen, "strip-sweep": _plan_strip_sweep, "below": _plan_below,
    "harnack": _plan_harnack, "holder": _plan_holder, "liouville": _plan_liouville,
    "barrier-check": _plan_barrier_check, "hypothesis-check": _plan_hypothesis_check,
}


# -- running ------------------------------------------------------------------


def _jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def execute(plan: Plan, threads: int = 1) -> dict:
    """Run a plan in memory; returns the summary and the artifact contents."""
    t0 = time.perf_counter()
    results, artifacts = plan.runner()
    wall = time.perf_counter() - t0
    summary = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "kind": plan.kind,
        "seed": plan.seed,
        "config": plan.config,
        "results": _jsonable(results),
        "artifacts": {name: sha256_text(body) for name, body in sorted(artifacts.items())},
        "backend": backend.NAME,
        "threads": threads,
        "wall_time": wall,
    }
    return {"summary": summary, "artifacts": artifacts}


def write_outputs(out_dir: Path, run: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, body in run["artifacts"].items():
        path = out_dir / name
        if isinstance(body, bytes):
            path.write_bytes(body)
        else:
            path.write_text(body)
    path = out_dir / "summary.json"
    path.write_text(json.dumps(run["summary"], indent=2, sort_keys=True) + "\n")
    return path


def _first_difference(a, b, path="results"):
    if isinstance(a, dict) and isinstance(b, dict):
        for k in sorted(set(a) | set(b)):
            if k not in a or k not in b:
                return f"{path}.{k}"
            d = _first_difference(a[k], b[k], f"{path}.{k}")
            if d:
                return d
        return None
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return path
        for i, (x, y) in enumerate(zip(a, b)):
            d = _first_difference(x, y, f"{path}[{i}]")
            if d:
                return d
        return None
    return None if a == b else path


def replay(summary_path, out_dir: Path | None = None) -> dict:
    """Re-run a recorded experiment and require identical results and artifact hashes."""
    try:
        recorded = json.loads(Path(summary_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read summary {summary_path}: {exc}") from None
    for key in ("kind", "config", "seed", "results"):
        if key not in recorded:
            raise ConfigError(f"summary lacks {key!r}")
    if recorded.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {recorded.get('schema_version')!r}")
    cfg = dict(recorded["config"])
    plan = plan_experiment(recorded["kind"], cfg, int(recorded["seed"]))
    run = execute(plan)
    fresh = run["summary"]
    diff = _first_difference(recorded["results"], fresh["results"])
    if diff is None:
        diff = _first_difference(recorded.get("artifacts", {}), fresh["artifacts"], "artifacts")
    if diff is not None:
        raise ReplayMismatch(f"replay differs at {diff}", field=diff)
    if out_dir is not None:
        write_outputs(out_dir, run)
    return fresh


# -- entry point --------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pucci-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", type=Path)
        sp.add_argument("--out", type=Path, default=Path("out"))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, default=1)
    rp = sub.add_parser("replay")
    rp.add_argument("summary", type=Path)
    rp.add_argument("--out", type=Path)
    rp.add_argument("--threads", type=int, default=1)
    return parser


def _error_record(exc: Exception) -> dict:
    rec = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ReplayMismatch):
        rec["field"] = exc.field
    return rec


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if args.threads < 1:
        print(json.dumps({"error": "ConfigError", "message": "--threads must be >= 1"}), file=sys.stderr)
        return 2
    try:
        if args.command == "replay":
            fresh = replay(args.summary, args.out)
            print(json.dumps({"replay": "identical", "kind": fresh["kind"], "seed": fresh["seed"]}))
            return 0
        cfg = load_config(args.config) if args.config else {}
        plan = plan_experiment(args.command, cfg, args.seed)
    except ConfigError as exc:
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return 2
    except ReplayMismatch as exc:
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return 3
    except PucciLabError as exc:
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return 1
    try:
        run = execute(plan, args.threads)
    except PucciLabError as exc:
        # the failure itself is the structured record; no field artifacts are written
        rec = {"schema_version": SCHEMA_VERSION, "kind": plan.kind, "seed": plan.seed,
               "config": plan.config, **_error_record(exc)}
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "summary.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return 1
    path = write_outputs(args.out, run)
    print(json.dumps({"summary": str(path), "kind": plan.kind, "wall_time": run["summary"]["wall_time"]}))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
