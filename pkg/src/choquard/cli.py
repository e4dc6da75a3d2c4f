"""Command-line entry point: ``choquard <subcommand> [--config file.toml] [flags]``.

Flags override values from the config file.  Exit codes: 0 success,
1 scientific-check failure, 2 usage/config error, 3 numerical divergence.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import re
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .params import ParameterError, Potential, ProblemParams

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


SCHEMA = {
    "problem": {"N": int, "mu": float, "lambda": float, "beta": float, "beta_over_beta1": float,
                "indefinite_mode": bool},
    "potential": {"kind": str, "radius": float, "inner_radius": float, "half_width": float,
                  "ramp_width": float, "M0": float, "height_cap": (float, str), "center": list,
                  "allow_origin_outside": bool},
    "grid": {"n": int, "L": float, "self_term": str, "radial_m": int},
    "solver": {"tol": float, "max_iter": int, "pc_shift": float, "eigs_k": int},
    "output": {"dir": str, "snapshots": bool},
    "run": {"seed": int},
}


@dataclass
class RunConfig:
    subcommand: str = ""
    N: int = 4
    mu: float = 2.0
    lam: float = 0.0
    beta: float | None = None
    beta_over_beta1: float | None = None
    indefinite_mode: bool = False
    potential: dict = field(default_factory=lambda: {"kind": "ball_well"})
    n: int = 32
    L: float = 2.0
    self_term: str = "galerkin"
    radial_m: int = 20000
    tol: float = 1e-6
    max_iter: int = 400
    pc_shift: float = 10.0
    eigs_k: int = 5
    out_dir: str = "out"
    snapshots: bool = True
    seed: int = 0

    def hash(self):
        d = asdict(self)
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def params(self, beta=None, lam=None):
        return ProblemParams(self.N, self.mu, self.lam if lam is None else lam,
                             (self.beta or 0.0) if beta is None else beta, self.indefinite_mode)

    def make_potential(self):
        kw = dict(self.potential)
        if kw.get("height_cap") in ("unbounded", "inf", None) and "height_cap" in kw:
            kw["height_cap"] = None
        if "center" in kw:
            kw["center"] = tuple(float(c) for c in kw["center"])
        return Potential(**kw)


def _line_of(text, key, section=None):
    """Line number of `key = ...` (inside [section] if given) or of the header [key]."""
    start = 0
    lines = text.splitlines()
    if section is not None:
        start = next((i for i, l in enumerate(lines) if re.match(rf"\s*\[{re.escape(section)}\]", l)), 0)
    for i, line in enumerate(lines[start:], start + 1):
        if re.match(rf"\s*{re.escape(key)}\s*=", line) or re.match(rf"\s*\[{re.escape(key)}\]", line):
            return i
    return None


def load_config(path, cfg: RunConfig):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = p.read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None
    for sec, body in data.items():
        if sec not in SCHEMA:
            raise ConfigError(f"{path}:{_line_of(text, sec)}: unknown section [{sec}]")
        if not isinstance(body, dict):
            raise ConfigError(f"{path}:{_line_of(text, sec)}: [{sec}] must be a table")
        for key, val in body.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{path}:{_line_of(text, key, sec)}: unknown key '{key}' in [{sec}]")
            typ = SCHEMA[sec][key]
            ok = isinstance(val, typ) or (typ is float and isinstance(val, int) and not isinstance(val, bool))
            if isinstance(typ, tuple):
                ok = isinstance(val, (int, float, str)) and not isinstance(val, bool)
            if not ok:
                raise ConfigError(f"{path}:{_line_of(text, key, sec)}: '{key}' in [{sec}] has wrong type "
                                  f"{type(val).__name__}")
    pr = data.get("problem", {})
    for k, attr in [("N", "N"), ("mu", "mu"), ("lambda", "lam"), ("beta", "beta"),
                    ("beta_over_beta1", "beta_over_beta1"), ("indefinite_mode", "indefinite_mode")]:
        if k in pr:
            setattr(cfg, attr, pr[k])
    if "potential" in data:
        cfg.potential = dict(data["potential"])
    for k in ("n", "L", "self_term", "radial_m"):
        if k in data.get("grid", {}):
            setattr(cfg, k, data["grid"][k])
    for k in ("tol", "max_iter", "pc_shift", "eigs_k"):
        if k in data.get("solver", {}):
            setattr(cfg, k, data["solver"][k])
    if "dir" in data.get("output", {}):
        cfg.out_dir = data["output"]["dir"]
    if "snapshots" in data.get("output", {}):
        cfg.snapshots = data["output"]["snapshots"]
    if "seed" in data.get("run", {}):
        cfg.seed = data["run"]["seed"]
    return cfg


# --- output helpers ---------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist()) if x.size < 64 else None
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else str(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def write_json(path, obj, cfg):
    obj = dict(obj)
    obj["config_hash"] = cfg.hash()
    obj["config"] = _jsonable({k: v for k, v in asdict(cfg).items() if k != "out_dir"})
    Path(path).write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n")


def write_csv(path, rows, cfg, extra_cols=None):
    rows = [dict(r, **(extra_cols or {})) for r in rows]
    cols = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    buf.write(f"# config_hash={cfg.hash()}\n")
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    Path(path).write_text(buf.getvalue())


def _outdir(cfg):
    d = Path(cfg.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


# --- problem assembly ---------------------------------------------------------------

def _setup(cfg):
    from .functional import Problem
    from .grid import TensorGrid
    from .riesz import RieszOperator
    from .spectra import dirichlet_eigs
    grid = TensorGrid(cfg.N, cfg.n, cfg.L)
    pot = cfg.make_potential()
    op = RieszOperator(grid, cfg.mu, cfg.self_term)
    mask = pot.zero_mask(grid)
    beta1 = float(dirichlet_eigs(mask, grid, k=1, seed=cfg.seed)[0])
    beta = cfg.beta
    if cfg.beta_over_beta1 is not None:
        beta = cfg.beta_over_beta1 * beta1
    beta = beta or 0.0
    prob = Problem.build(cfg.params(beta=beta), grid, pot, op=op)
    return grid, pot, op, mask, beta1, prob


def _solver_cfg(cfg):
    from .solver import SolverConfig
    return SolverConfig(tol=cfg.tol, max_iter=cfg.max_iter, pc_shift=cfg.pc_shift)


# --- subcommands ------------------------------------------------------------------------

def cmd_constants(cfg, args):
    from .bubbles import constant_set
    if not (0 < cfg.mu < cfg.N):
        raise ConfigError(f"mu must lie in (0, N); got mu={cfg.mu}, N={cfg.N}")
    cs = constant_set(cfg.N, cfg.mu, cfg.radial_m)
    disc = abs(cs.S_HL - cs.S_HL_quotient) / cs.S_HL
    out = cs.to_dict()
    out["S_HL_relation_vs_quotient"] = disc
    out["agreement_ok"] = disc < 1e-2
    d = _outdir(cfg)
    write_json(d / "constants.json", out, cfg)
    print(json.dumps(_jsonable({k: out[k] for k in ("C_hls", "S", "S_HL", "S_HL_quotient", "c_star",
                                                     "S_HL_relation_vs_quotient")}), sort_keys=True))
    return EXIT_OK if disc < 1e-2 else EXIT_CHECK


def cmd_bubbles(cfg, args):
    from .bubbles import bubble_asymptotics
    eps = [float(x) for x in args.eps.split(",")] if args.eps else [0.1, 0.05, 0.025, 0.0125]
    out = bubble_asymptotics(cfg.N, cfg.mu, eps, args.delta, cfg.radial_m)
    d = _outdir(cfg)
    write_csv(d / "bubbles.csv", out["rows"], cfg)
    summary = {k: v for k, v in out.items() if k != "rows"}
    write_json(d / "bubbles.json", summary, cfg)
    print(json.dumps(_jsonable(summary), sort_keys=True))
    ok = abs(out["grad_exponent"] - (cfg.N - 2)) <= 0.5 and out.get("mass_ratio_variation", 1) < 0.1
    return EXIT_OK if ok else EXIT_CHECK


def _save_field(d, name, u, grid, cfg, label):
    from .grid import save_snapshot
    if cfg.snapshots:
        save_snapshot(d / f"{name}.f64", u, grid, label, {"config_hash": cfg.hash()})


def cmd_groundstate(cfg, args):
    from .bubbles import critical_level
    from .solver import ground_state_definite
    grid, pot, op, mask, beta1, prob = _setup(cfg)
    res = ground_state_definite(prob, None, _solver_cfg(cfg), beta1=beta1, potential=pot)
    cstar = critical_level(cfg.N, cfg.mu)
    out = res.summary()
    out.update({"beta1": beta1, "beta": prob.params.beta, "c_star": cstar,
                "below_threshold": res.energy is not None and res.level < cstar})
    d = _outdir(cfg)
    write_json(d / "groundstate.json", out, cfg)
    if res.energy is not None:
        _save_field(d, "groundstate", res.u, grid, cfg, "ground state")
    print(json.dumps(_jsonable({k: out[k] for k in ("level", "converged", "status", "c_star")}), sort_keys=True))
    if res.energy is None:
        return EXIT_DIVERGED
    return EXIT_OK if res.converged and out["below_threshold"] else EXIT_CHECK


def cmd_sweep_lambda(cfg, args):
    from .solver import ground_state_limit_problem, lambda_sweep
    grid, pot, op, mask, beta1, prob = _setup(cfg)
    lams = [float(x) for x in args.lambdas.split(",")]
    scfg = _solver_cfg(cfg)
    limit = ground_state_limit_problem(prob, mask, None, scfg, beta1)
    rows, verdict, _ = lambda_sweep(prob, pot, lams, limit, None, scfg)
    ok = all(verdict.values())
    d = _outdir(cfg)
    write_csv(d / "sweep_lambda.csv", rows, cfg, {"monotone_verdict": "pass" if ok else "fail"})
    write_json(d / "sweep_lambda.json", {"verdict": verdict, "limit_level": limit.level, "beta1": beta1}, cfg)
    print(json.dumps(_jsonable(verdict), sort_keys=True))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_sweep_beta(cfg, args):
    from .solver import beta_sweep
    grid, pot, op, mask, beta1, prob = _setup(cfg)
    fr = [float(x) for x in args.betas.split(",")]
    rows, verdict, _ = beta_sweep(prob, mask, [f * beta1 for f in fr], beta1, None, _solver_cfg(cfg))
    ok = all(verdict.values())
    d = _outdir(cfg)
    write_csv(d / "sweep_beta.csv", rows, cfg, {"monotone_verdict": "pass" if ok else "fail"})
    write_json(d / "sweep_beta.json", {"verdict": verdict, "beta1": beta1}, cfg)
    print(json.dumps(_jsonable(verdict), sort_keys=True))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_eigs(cfg, args):
    from .spectra import dirichlet_eigs, schrodinger_eigs
    grid, pot, op, mask, beta1, prob = _setup(cfg)
    k = cfg.eigs_k
    bj = dirichlet_eigs(mask, grid, k=k, seed=cfg.seed)
    lams = [float(x) for x in args.lambdas.split(",")] if args.lambdas else [cfg.lam]
    rows = []
    for lam in lams:
        sp = schrodinger_eigs(prob.with_params(lam=lam), k=k, beta1=beta1, seed=cfg.seed)
        for j in range(k):
            target = bj[j] - prob.params.beta
            rows.append({"lambda": lam, "j": j + 1, "zeta": sp.eigenvalues[j], "target": target,
                         "gap": abs(sp.eigenvalues[j] - target), "morse_index": sp.morse_index})
    d = _outdir(cfg)
    write_csv(d / "eigs.csv", rows, cfg)
    print(f"morse index at lambda={lams[-1]:g}: {rows[-1]['morse_index']}")
    return EXIT_OK


def cmd_indefinite(cfg, args):
    from .bubbles import critical_level
    from .solver import ground_state_indefinite
    from .spectra import schrodinger_eigs
    grid, pot, op, mask, beta1, prob = _setup(cfg)
    sp = schrodinger_eigs(prob, k=cfg.eigs_k, beta1=beta1, seed=cfg.seed)
    res = ground_state_indefinite(prob, sp, None, _solver_cfg(cfg), pot)
    cstar = critical_level(cfg.N, cfg.mu)
    out = res.summary()
    out.update({"morse_index": sp.morse_index, "eigenvalues": sp.eigenvalues.tolist(),
                "beta1": beta1, "c_star": cstar})
    d = _outdir(cfg)
    write_json(d / "indefinite.json", out, cfg)
    _save_field(d, "indefinite", res.u, grid, cfg, "indefinite ground state")
    ok = res.level < cstar and out.get("levels_rel_diff", 1.0) < 1e-3
    print(json.dumps(_jsonable({k: out.get(k) for k in ("level", "c_nested", "levels_rel_diff", "morse_index")}),
                     sort_keys=True))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_multiplicity(cfg, args):
    from .solver import multistart_multiplicity
    grid, pot, op, mask, beta1, prob = _setup(cfg)
    rmid = 0.5 * (pot.inner_radius + pot.radius) if pot.kind == "annulus_well" else 0.0
    r = 0.5 * (pot.radius - pot.inner_radius) if pot.kind == "annulus_well" else pot.radius / 2
    k = args.seeds
    seeds = [(rmid * np.cos(2 * np.pi * i / k), rmid * np.sin(2 * np.pi * i / k)) + (0.0,) * (cfg.N - 2)
             for i in range(k)]
    rep, _ = multistart_multiplicity(prob, pot, seeds, r, cfg=_solver_cfg(cfg))
    d = _outdir(cfg)
    write_json(d / "multiplicity.json", rep, cfg)
    print(json.dumps(_jsonable({"count": rep["count"], "inside": rep["alpha_c_in_omega_2r_plus"]})))
    return EXIT_OK


def cmd_validate(cfg, args):
    from .grid import TensorGrid
    from .params import validate_potential
    grid = TensorGrid(cfg.N, cfg.n, cfg.L)
    rep = validate_potential(cfg.make_potential(), grid)
    d = _outdir(cfg)
    write_json(d / "validate.json", rep.to_dict(), cfg)
    print(json.dumps(_jsonable(rep.to_dict()), sort_keys=True))
    return EXIT_OK if rep.ok else EXIT_CHECK


COMMANDS = {
    "constants": cmd_constants, "bubbles": cmd_bubbles, "groundstate": cmd_groundstate,
    "sweep-lambda": cmd_sweep_lambda, "sweep-beta": cmd_sweep_beta, "eigs": cmd_eigs,
    "indefinite": cmd_indefinite, "multiplicity": cmd_multiplicity, "validate": cmd_validate,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="choquard", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--N", type=int)
        p.add_argument("--mu", type=float)
        p.add_argument("--lam", "--lambda", dest="lam", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--beta-over-beta1", dest="beta_over_beta1", type=float)
        p.add_argument("--n", type=int)
        p.add_argument("--L", type=float)
        p.add_argument("--out", dest="out_dir")
        p.add_argument("--seed", type=int)
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--tol", type=float)
        if name == "bubbles":
            p.add_argument("--eps")
            p.add_argument("--delta", type=float, default=1.0)
        if name in ("sweep-lambda", "eigs"):
            p.add_argument("--lambdas", default="1e2,1e3,1e4" if name == "sweep-lambda" else None)
        if name == "sweep-beta":
            p.add_argument("--betas", default="0.3,0.1,0.03")
        if name == "multiplicity":
            p.add_argument("--seeds", type=int, default=8)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    cfg = RunConfig(subcommand=args.subcommand)
    try:
        if args.config:
            load_config(args.config, cfg)
        for k in ("N", "mu", "lam", "beta", "beta_over_beta1", "n", "L", "out_dir", "seed", "max_iter", "tol"):
            v = getattr(args, k, None)
            if v is not None:
                setattr(cfg, k, v)
        ProblemParams(cfg.N, cfg.mu, cfg.lam, cfg.beta or 0.0, cfg.indefinite_mode)
        return COMMANDS[args.subcommand](cfg, args)
    except (ConfigError, ParameterError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as err:  # numerical failures
        from .solver import DivergenceError
        from .spectra import EigenError, ReductionError
        if isinstance(err, (DivergenceError, EigenError, ReductionError, FloatingPointError)):
            print(f"numerical failure: {err}", file=sys.stderr)
            return EXIT_DIVERGED
        if isinstance(err, ValueError):
            print(f"error: {err}", file=sys.stderr)
            return EXIT_USAGE
        raise


if __name__ == "__main__":
    sys.exit(main())
