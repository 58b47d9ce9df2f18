"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 solver assumption violated,
4 Monte Carlo or residual check failed, 5 limit did not converge.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from typing import List, Optional

import numpy as np

from .config import ConfigError, RunConfig, load_config, step_function
from .errors import (
    AssumptionViolatedError,
    ConvergenceError,
    DomainError,
    InputError,
    LKFError,
    UnsupportedModelError,
)
from .fluctuation import (
    ExitProblem,
    LimitConfig,
    OneSidedStructure,
    one_sided_down,
    one_sided_down_resolvent,
    one_sided_up,
    one_sided_up_resolvent,
    resolvent_density,
    resolvent_integral,
    two_sided_down,
    two_sided_up,
)
from .levy import is_bounded_variation
from .measures import RadonMeasureSpec, SignedMeasureSpec, apply_T, inverse_t_mass
from .montecarlo import CensoringError, MCConfig, poissonization_experiment, simulate_suite
from .scale import ScaleFunction, verify_laplace
from .volterra import (
    make_grid,
    picard_solve,
    recursive_atomic_w,
    recursive_atomic_z,
    solve_generic,
    solve_u,
)
from .volterra.tables import SolveConfig

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_MC, EXIT_LIMIT = 0, 2, 3, 4, 5

IDENTITIES = (
    "two_sided_up",
    "two_sided_down",
    "resolvent_density",
    "resolvent_integral",
    "one_sided_down",
    "one_sided_down_resolvent",
    "one_sided_up",
    "one_sided_up_resolvent",
)
MC_IDENTITIES = {"two_sided_up": "up", "two_sided_down": "down", "resolvent_integral": "resolvent"}
CHECK_TOL = 1e-6


class CheckFailed(LKFError):
    """A verification step produced a result outside its tolerance."""


def _writer(buf):
    return csv.writer(buf, lineterminator="\n")


def _fmt(v) -> str:
    return repr(float(v))


def _header(buf, **meta):
    for k, v in meta.items():
        buf.write(f"# {k}={v}\n" if isinstance(v, str) else f"# {k}={v!r}\n")


def _solver_cfg(cfg: RunConfig, args) -> SolveConfig:
    step = args.step if args.step is not None else cfg.get("solver", "step", 1e-3)
    try:
        return SolveConfig(step=step)
    except InputError as exc:
        raise ConfigError("solver.step" if args.step is None else "--step", str(exc))


def _limit_cfg(cfg: RunConfig) -> LimitConfig:
    d = LimitConfig()
    kw = dict(
        growth_factor=cfg.get("limit", "growth_factor", d.growth_factor),
        rel_tol=cfg.get("limit", "rel_tol", d.rel_tol),
        abs_tol=cfg.get("limit", "abs_tol", d.abs_tol),
        max_extensions=cfg.get("limit", "max_extensions", d.max_extensions, kind=int),
        max_nodes=cfg.get("limit", "max_nodes", d.max_nodes, kind=int),
    )
    try:
        return LimitConfig(**kw)
    except InputError as exc:
        raise ConfigError("limit", str(exc))


def _q_values(cfg: RunConfig, default=0.0) -> List[float]:
    raw = cfg.problem.get("q", default)
    vals = raw if isinstance(raw, list) else [raw]
    try:
        out = [float(v) for v in vals]
    except (TypeError, ValueError):
        raise ConfigError("problem.q", f"cannot interpret {raw!r}")
    if not out or any(not (q >= 0 and math.isfinite(q)) for q in out):
        raise ConfigError("problem.q", "must be finite and >= 0")
    return out


def _driving_measure(cfg: RunConfig) -> RadonMeasureSpec:
    apply = cfg.get("solver", "apply_T", True, kind=None)
    if not isinstance(apply, bool):
        raise ConfigError("solver.apply_T", "must be true or false")
    return apply_T(cfg.measure, cfg.model) if apply else cfg.measure


def _raw_atoms(cfg: RunConfig, nu_T: RadonMeasureSpec, lo: float):
    """Atoms at or above ``lo`` with masses as the recursion expects them."""
    atoms = [(a, p) for a, p in zip(nu_T.atom_levels, nu_T.atom_masses) if a >= lo]
    if not atoms:
        return []
    levels, masses = zip(*atoms)
    try:
        raw = inverse_t_mass(np.array(masses), cfg.model)
    except DomainError as exc:
        raise ConfigError("measure.atoms", str(exc))
    return list(zip(levels, raw.tolist()))


# -- commands ----------------------------------------------------------------

def cmd_scale(cfg: RunConfig, args) -> str:
    q = cfg.get("scale", "q", None)
    if q is None:
        q = _q_values(cfg)[0]
    lo = cfg.get("scale", "lo", 0.0)
    hi = cfg.get("scale", "hi", 2.0)
    step = args.step if args.step is not None else cfg.get("scale", "step", 0.01)
    if not (step > 0 and hi >= lo):
        raise ConfigError("scale.step", "need step > 0 and hi >= lo")
    sf = ScaleFunction(cfg.model, q)
    n = int(round((hi - lo) / step))
    xs = np.linspace(lo, hi, n + 1) if n > 0 else np.array([lo])
    buf = io.StringIO()
    _header(buf, command="scale", q=q, phi=sf.phi)
    w = _writer(buf)
    w.writerow(["x", "W", "Z"])
    W, Z = sf.w(xs), sf.z(xs)
    for x, a, b in zip(xs, W, Z):
        w.writerow([_fmt(x), _fmt(a), _fmt(b)])
    if args.check:
        thetas = cfg.get("scale", "thetas", None, kind=None)
        thetas = [sf.phi + s for s in (0.5, 1.0, 2.0, 4.0)] if thetas is None else [float(t) for t in thetas]
        worst = 0.0
        for theta in thetas:
            if not theta > sf.phi:
                raise ConfigError("scale.thetas", f"theta={theta!r} must exceed Phi(q)={sf.phi!r}")
            upper = math.ceil(25.0 / (theta - sf.phi)) + 1.0
            res = verify_laplace(sf, theta, upper)
            worst = max(worst, res)
            buf.write(f"# laplace_residual theta={theta!r} upper={upper!r} residual={res!r}\n")
        if worst >= CHECK_TOL:
            args._failure = CheckFailed(f"Laplace residual {worst!r} >= {CHECK_TOL!r}")
    return buf.getvalue()


def cmd_solve(cfg: RunConfig, args) -> str:
    kind = str(cfg.problem.get("kind", "W")).upper()
    if kind not in ("W", "Z", "U"):
        raise ConfigError("problem.kind", f"expected W, Z or U, got {kind!r}")
    q = _q_values(cfg)[0]
    scfg = _solver_cfg(cfg, args)
    lo_window = cfg.measure.window[0]
    base = cfg.get("problem", "base", lo_window if math.isfinite(lo_window) else 0.0)
    hi = cfg.get("problem", "hi", required=True)
    if not hi >= base:
        raise ConfigError("problem.hi", "must be >= problem.base")
    nu_T = _driving_measure(cfg)
    minus = cfg.measure_minus
    driving = SignedMeasureSpec(nu_T, minus) if minus is not None else nu_T
    extra = tuple(minus.atom_levels) + tuple(minus.breakpoints) if minus is not None else ()

    if kind == "U":
        eta = cfg.get("problem", "eta", 0.0)
        d_level = cfg.get("problem", "d_level", base)
        if minus is not None:
            raise ConfigError("measure_minus", "not supported for kind U")
        sf = ScaleFunction(cfg.model, q + eta)
        grid = make_grid(min(base, d_level), max(hi, d_level), scfg.step, nu_T, extra=(d_level,))
        table = solve_u(sf, nu_T, eta, d_level, grid)
        h = None
    else:
        sf = ScaleFunction(cfg.model, q)
        grid = make_grid(base, hi, scfg.step, nu_T, extra=extra)
        h = sf.w if kind == "W" else sf.z
        table = solve_generic(sf, h, driving, base, grid, kind=kind)

    oracle_col = None
    if args.oracle is not None:
        if kind == "U":
            raise ConfigError("--oracle", "oracles are available for W and Z only")
        if args.oracle == "recursive":
            if cfg.measure.has_density() or minus is not None:
                raise ConfigError("measure.density", "the recursive oracle needs a purely atomic measure")
            atoms = _raw_atoms(cfg, nu_T, base)
            rec = recursive_atomic_w if kind == "W" else recursive_atomic_z
            oracle_col = np.asarray(rec(sf, atoms, table.nodes, base), dtype=float)
        else:
            oracle_col = picard_solve(sf, h, driving, base, grid, scfg).values

    buf = io.StringIO()
    _header(buf, command="solve", kind=table.kind, base=table.base, q=q, step=scfg.step)
    w = _writer(buf)
    if oracle_col is None:
        w.writerow(["x", "value"])
        for x, v in zip(table.nodes, table.values):
            w.writerow([_fmt(x), _fmt(v)])
    else:
        w.writerow(["x", "value", args.oracle])
        for x, v, o in zip(table.nodes, table.values, oracle_col):
            w.writerow([_fmt(x), _fmt(v), _fmt(o)])
        diff = float(np.max(np.abs(table.values - oracle_col)))
        buf.write(f"# max_abs_diff={diff!r}\n")
    return buf.getvalue()


def _identity_names(cfg: RunConfig, allowed) -> List[str]:
    raw = cfg.problem.get("identity")
    if raw is None:
        raise ConfigError("problem.identity", "missing")
    names = raw if isinstance(raw, list) else [raw]
    for name in names:
        if name not in allowed:
            raise ConfigError("problem.identity", f"unknown identity {name!r}; expected one of {', '.join(allowed)}")
    return [str(n) for n in names]


def _f(cfg: RunConfig):
    f = step_function(cfg.problem.get("f", 1.0), "problem.f")
    if isinstance(f, float):
        val = f
        return val, lambda z: np.full(np.shape(z), val)
    return f, f


def _inputs(**kv) -> str:
    return ";".join(f"{k}={v!r}" for k, v in kv.items())


def _evaluate(name: str, cfg: RunConfig, q: float, scfg: SolveConfig):
    """Analytic value of identity ``name`` and a description of its inputs."""
    x = cfg.get("problem", "x", required=True)
    if name.startswith("one_sided_up"):
        b = cfg.get("problem", "b", required=True)
        s = OneSidedStructure(cfg.measure, cfg.get("problem", "eta", 0.0), cfg.get("problem", "d_level", x))
        kv = dict(q=q, x=x, b=b, eta=s.eta, d_level=s.d_level)
        if name == "one_sided_up":
            return one_sided_up(cfg.model, q, s, x, b, scfg), kv
        y = cfg.get("problem", "y", required=True)
        return one_sided_up_resolvent(cfg.model, q, s, x, b, y, scfg), dict(kv, y=y)
    c = cfg.get("problem", "c", required=True)
    if name.startswith("one_sided_down"):
        p = ExitProblem(cfg.model, q, cfg.measure, c, x)
        kv = dict(q=q, x=x, c=c)
        lim = _limit_cfg(cfg)
        if name == "one_sided_down":
            return one_sided_down(p, lim, scfg), kv
        y = cfg.get("problem", "y", required=True)
        return one_sided_down_resolvent(p, y, lim, scfg), dict(kv, y=y)
    b = cfg.get("problem", "b", required=True)
    p = ExitProblem(cfg.model, q, cfg.measure, c, x, b)
    kv = dict(q=q, x=x, c=c, b=b)
    if name == "two_sided_up":
        return two_sided_up(p, scfg), kv
    if name == "two_sided_down":
        return two_sided_down(p, scfg), kv
    if name == "resolvent_density":
        y = cfg.get("problem", "y", required=True)
        return resolvent_density(p, y, scfg), dict(kv, y=y)
    shown, f = _f(cfg)
    return resolvent_integral(p, f, scfg), dict(kv, f=shown if isinstance(shown, float) else shown.pairs())


def _problem_errors(fn):
    """Re-key InputErrors raised while building problems as config errors."""
    try:
        return fn()
    except (ConfigError, AssumptionViolatedError, ConvergenceError):
        raise
    except (InputError, DomainError) as exc:
        raise ConfigError("problem", str(exc))


def cmd_identity(cfg: RunConfig, args) -> str:
    names = _identity_names(cfg, IDENTITIES)
    scfg = _solver_cfg(cfg, args)
    buf = io.StringIO()
    _header(buf, command="identity", step=scfg.step)
    w = _writer(buf)
    w.writerow(["identity", "inputs", "value"])
    for q in _q_values(cfg):
        for name in names:
            value, kv = _problem_errors(lambda: _evaluate(name, cfg, q, scfg))
            w.writerow([name, _inputs(**kv), _fmt(value)])
    return buf.getvalue()


def _mc_config(cfg: RunConfig, args) -> MCConfig:
    seed = args.seed if args.seed is not None else cfg.get("mc", "seed", MCConfig.seed, kind=int)
    try:
        return MCConfig(
            n_paths=cfg.get("mc", "n_paths", MCConfig.n_paths, kind=int),
            seed=seed,
            euler_dt=cfg.get("mc", "euler_dt", MCConfig.euler_dt),
            time_cap=cfg.get("mc", "time_cap", MCConfig.time_cap),
        )
    except InputError as exc:
        raise ConfigError("mc", str(exc))


def cmd_mc_verify(cfg: RunConfig, args) -> str:
    names = cfg.mc.get("identities", list(MC_IDENTITIES))
    if not isinstance(names, list) or any(n not in MC_IDENTITIES for n in names):
        raise ConfigError("mc.identities", f"expected a subset of {', '.join(MC_IDENTITIES)}")
    mc = _mc_config(cfg, args)
    scfg = _solver_cfg(cfg, args)
    threshold = args.threshold if args.threshold is not None else cfg.get("mc", "threshold", 3.0)
    allowance = cfg.get("mc", "bias_allowance", 0.0)
    x = cfg.get("problem", "x", required=True)
    c = cfg.get("problem", "c", required=True)
    b = cfg.get("problem", "b", required=True)
    shown, f = _f(cfg)
    buf = io.StringIO()
    _header(buf, command="mc-verify", n_paths=mc.n_paths, seed=mc.seed, step=scfg.step,
            threshold=threshold, bias_allowance=allowance,
            scheme="exact" if is_bounded_variation(cfg.model) else f"euler dt={mc.euler_dt!r}")
    w = _writer(buf)
    w.writerow(["identity", "inputs", "analytic", "estimate", "std_error", "z_score"])
    failures = []
    for q in _q_values(cfg):
        p = _problem_errors(lambda: ExitProblem(cfg.model, q, cfg.measure, c, x, b))
        suite = _problem_errors(lambda: simulate_suite(cfg.model, cfg.measure, q, x, c, b, shown, mc))
        for name in names:
            if name == "two_sided_up":
                analytic = two_sided_up(p, scfg)
            elif name == "two_sided_down":
                analytic = two_sided_down(p, scfg)
            else:
                analytic = resolvent_integral(p, f, scfg)
            r = suite[MC_IDENTITIES[name]].against(analytic)
            kv = dict(q=q, x=x, c=c, b=b)
            if name == "resolvent_integral":
                kv["f"] = shown if isinstance(shown, float) else shown.pairs()
            w.writerow([name, _inputs(**kv), _fmt(r.analytic), _fmt(r.estimate), _fmt(r.std_error), _fmt(r.z_score)])
            if abs(r.estimate - r.analytic) > threshold * r.std_error + allowance * abs(r.analytic):
                failures.append(f"{name} q={q!r} z={r.z_score!r}")
    if failures:
        args._failure = CheckFailed("Monte Carlo check failed: " + "; ".join(failures))
    return buf.getvalue()


def cmd_converge_test(cfg: RunConfig, args) -> str:
    n_values = cfg.get("converge", "n_values", [10, 100, 1000], kind=None)
    if not isinstance(n_values, list) or not n_values:
        raise ConfigError("converge.n_values", "must be a nonempty array of integers")
    reps = cfg.get("converge", "reps", 50, kind=int)
    lo_window = cfg.measure.window[0]
    y = cfg.get("converge", "y", lo_window if math.isfinite(lo_window) else 0.0)
    T_hi = cfg.get("converge", "T_hi", required=True)
    seed = args.seed if args.seed is not None else cfg.get("converge", "seed", 20240601, kind=int)
    q = _q_values(cfg)[0]
    scfg = _solver_cfg(cfg, args)
    report = _problem_errors(
        lambda: poissonization_experiment(cfg.model, cfg.measure, q, y, T_hi, n_values, reps, seed, step=scfg.step)
    )
    buf = io.StringIO()
    _header(buf, command="converge-test", q=q, y=y, T_hi=T_hi, reps=reps, seed=seed, step=scfg.step)
    w = _writer(buf)
    w.writerow(["n", "mean_sup_sq_error", "mean_sup_sq_error_z"])
    for n, ew, ez in report.rows():
        w.writerow([n, _fmt(ew), _fmt(ez)])
    return buf.getvalue()


COMMANDS = {
    "scale": cmd_scale,
    "solve": cmd_solve,
    "identity": cmd_identity,
    "mc-verify": cmd_mc_verify,
    "converge-test": cmd_converge_test,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lkf", description="Scale functions and exit identities for killed Levy processes.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="PATH", help="TOML run configuration")
        p.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--step", type=float, metavar="H", help="grid step override")
        if name == "scale":
            p.add_argument("--check", action="store_true", help="append Laplace transform residuals")
        if name == "solve":
            p.add_argument("--oracle", choices=("recursive", "picard"))
        if name == "mc-verify":
            p.add_argument("--threshold", type=float, help="largest accepted |z| (default 3)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    for attr in ("check", "oracle", "threshold"):
        if not hasattr(args, attr):
            setattr(args, attr, None)
    args._failure = None
    try:
        cfg = load_config(args.config)
        text = COMMANDS[args.command](cfg, args)
    except AssumptionViolatedError as exc:
        print(f"lkf: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except ConvergenceError as exc:
        print(f"lkf: limit did not converge: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except CensoringError as exc:
        print(f"lkf: {exc}", file=sys.stderr)
        return EXIT_MC
    except (InputError, DomainError, UnsupportedModelError) as exc:
        print(f"lkf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args._failure is not None:
        print(f"lkf: {args._failure}", file=sys.stderr)
        return EXIT_MC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
