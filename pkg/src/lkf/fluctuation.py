"""Exit identities for a Levy process killed by an additive functional.

Every identity is a ratio or combination of generalized scale functions
solved on a grid.  The limits b -> inf and c -> -inf are taken by geometric
extension with a monotonicity check on the sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import DomainError, InputError, LimitNotConvergedError
from .levy import LevyModel
from .measures import PiecewiseConstant, RadonMeasureSpec, apply_T, one_sided_measure
from .scale import ScaleFunction
from .volterra.grid import make_grid
from .volterra.sweep import eval_forcing, solve_u, solve_w_rows, sweep
from .volterra.tables import SolveConfig


@dataclass(frozen=True)
class ExitProblem:
    """Killed exit problem from ``x`` out of ``[c, b]``; ``b = inf`` for one-sided problems."""

    model: LevyModel
    q: float
    nu: RadonMeasureSpec
    c: float
    x: float
    b: float = math.inf

    def __post_init__(self):
        if not self.q >= 0:
            raise DomainError(f"q must be >= 0, got {self.q!r}")
        if not (math.isfinite(self.c) and math.isfinite(self.x)):
            raise InputError("c and x must be finite")
        if not self.c <= self.x <= self.b:
            raise InputError(f"need c <= x <= b, got c={self.c!r}, x={self.x!r}, b={self.b!r}")
        if not self.c < self.b:
            raise InputError("need c < b")
        lo, hi = self.nu.window
        if self.c < lo or (math.isfinite(self.b) and self.b > hi):
            raise InputError(f"[c, b] = [{self.c!r}, {self.b!r}] is not inside window {self.nu.window!r}")


@dataclass(frozen=True)
class LimitConfig:
    """Geometric extension policy for b -> inf.

    Stops when successive iterates differ by less than ``rel_tol`` relative
    or ``abs_tol`` absolute; ``mono_slack`` is the tolerated monotonicity breach.
    ``max_nodes`` caps the grid re-solved per extension when nu has
    unbounded support (each re-solve costs O(nodes^2)).
    """

    growth_factor: float = 2.0
    rel_tol: float = 1e-8
    max_extensions: int = 40
    abs_tol: float = 1e-10
    mono_slack: float = 1e-9
    max_nodes: int = 16384

    def __post_init__(self):
        if not self.growth_factor > 1:
            raise InputError("growth_factor must exceed 1")
        if not (self.rel_tol > 0 and self.abs_tol >= 0 and self.mono_slack >= 0):
            raise InputError("tolerances must be positive")
        if self.max_extensions < 1:
            raise InputError("max_extensions must be >= 1")
        if self.max_nodes < 2:
            raise InputError("max_nodes must be >= 2")


@dataclass(frozen=True)
class OneSidedStructure:
    """Killing ``1_{z >= d} nu1(dz) + eta 1_{z < d} dz``."""

    nu1: RadonMeasureSpec
    eta: float
    d_level: float

    def __post_init__(self):
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise InputError(f"eta must be finite and >= 0, got {self.eta!r}")
        if not isinstance(self.nu1.density, PiecewiseConstant):
            raise InputError("one-sided structure needs a piecewise-constant density for nu1")

    def full_measure(self, lo: float) -> RadonMeasureSpec:
        return one_sided_measure(self.nu1, self.eta, self.d_level, lo=min(lo, self.d_level))


def _structure(s) -> OneSidedStructure:
    return s if isinstance(s, OneSidedStructure) else OneSidedStructure(*s)


# -- two-sided ---------------------------------------------------------------

@lru_cache(maxsize=64)
def _two_sided_tables(p: ExitProblem, step: float):
    sf = ScaleFunction(p.model, p.q)
    nu_T = apply_T(p.nu, p.model)
    grid = make_grid(p.c, p.b, step, nu_T, extra=(p.x,))
    _, W = sweep(sf, sf.w, nu_T, p.c, grid)
    _, Z = sweep(sf, sf.z, nu_T, p.c, grid)
    return sf, nu_T, grid, W, Z


def _finite_b(p: ExitProblem):
    if not math.isfinite(p.b):
        raise InputError("two-sided identities need a finite b")


def _at(grid, values, x):
    return float(values[grid.index(x)])


def two_sided_up(p: ExitProblem, cfg: SolveConfig = SolveConfig()) -> float:
    """``E_x[exp(-q tau_b - A); tau_b < tau_c]``."""
    _finite_b(p)
    _, _, grid, W, _ = _two_sided_tables(p, cfg.step)
    return _at(grid, W, p.x) / _at(grid, W, p.b)


def two_sided_down(p: ExitProblem, cfg: SolveConfig = SolveConfig()) -> float:
    """``E_x[exp(-q tau_c - A); tau_c < tau_b]``."""
    _finite_b(p)
    _, _, grid, W, Z = _two_sided_tables(p, cfg.step)
    ratio = _at(grid, W, p.x) / _at(grid, W, p.b)
    return _at(grid, Z, p.x) - _at(grid, Z, p.b) * ratio


@lru_cache(maxsize=32)
def _resolvent_rows(p: ExitProblem, step: float, extra: Tuple[float, ...] = ()):
    sf = ScaleFunction(p.model, p.q)
    nu_T = apply_T(p.nu, p.model)
    grid = make_grid(p.c, p.b, step, nu_T, extra=(p.x,) + extra)
    rows = solve_w_rows(sf, nu_T, grid, [p.x, p.b])
    return grid, rows[0], rows[1]


def _density_raw(p: ExitProblem, step: float, extra=()):
    grid, wx, wb = _resolvent_rows(p, step, tuple(extra))
    ratio = wx[0] / wb[0]
    return grid, ratio * wb - wx, ratio * wb


def resolvent_density_raw(p: ExitProblem, y: float, cfg: SolveConfig = SolveConfig()) -> float:
    """Unclipped resolvent density at ``y`` (may be slightly negative from quadrature)."""
    _finite_b(p)
    if not p.c <= y <= p.b:
        raise InputError(f"y={y!r} outside [c, b]")
    grid, dens, _ = _density_raw(p, cfg.step, (y,))
    return float(dens[grid.index(y)])


def resolvent_density(p: ExitProblem, y: float, cfg: SolveConfig = SolveConfig()) -> float:
    return max(resolvent_density_raw(p, y, cfg), 0.0)


def resolvent_integral(p: ExitProblem, f: Callable, cfg: SolveConfig = SolveConfig()) -> float:
    """``E_x int_0^{exit} exp(-q t - A_t) f(X_t) dt`` by trapezoid over the grid.

    ``W(x, .)`` jumps to zero just right of x, so [c, x] and [x, b] are
    integrated separately.
    """
    _finite_b(p)
    grid, dens, right = _density_raw(p, cfg.step)
    nodes = grid.nodes
    fv = eval_forcing(f, nodes)
    i = grid.index(p.x)
    left = np.trapezoid(fv[: i + 1] * dens[: i + 1], nodes[: i + 1])
    right_part = np.trapezoid(fv[i:] * right[i:], nodes[i:])
    return float(left + right_part)


# -- one-sided downward ------------------------------------------------------

def _limit(seq_fn, b_values, lim: LimitConfig, direction: int, what: str):
    """Iterate ``seq_fn(b)`` over ``b_values`` until it settles.

    ``direction`` is -1 for a nonincreasing and +1 for a nondecreasing sequence.
    """
    history = []
    for b in b_values:
        v = seq_fn(b)
        if not math.isfinite(v):
            raise LimitNotConvergedError(f"{what}: non-finite iterate at b={b!r}", history[-2:])
        if history:
            prev = history[-1]
            slack = lim.mono_slack * max(1.0, abs(prev))
            if direction * (v - prev) < -slack:
                raise LimitNotConvergedError(
                    f"{what}: sequence is not monotone at b={b!r}", [prev, v]
                )
            if abs(v - prev) <= max(lim.rel_tol * abs(v), lim.abs_tol):
                history.append(v)
                return v, history
        history.append(v)
    raise LimitNotConvergedError(f"{what}: no convergence after {len(history)} extensions", history[-2:])


class _Extender:
    """Solutions with bases c (and y) on ``[c, hi]`` extended beyond the support of nu."""

    def __init__(self, p: ExitProblem, step: float, ys=(), max_nodes: int = LimitConfig.max_nodes):
        self.p = p
        self.max_nodes = max_nodes
        self.sf = ScaleFunction(p.model, p.q)
        self.nu_T = apply_T(p.nu, p.model)
        if p.nu.window[1] != math.inf:
            raise InputError("b -> inf limits need a measure window extending to +inf")
        self.support = self.nu_T.support_hi()
        self.step = step
        self.ys = tuple(ys)
        # -inf support means nu vanishes
        self.bounded = self.support < math.inf
        top = max([p.c + step, p.x] + list(self.ys) + ([self.support] if self.bounded else []))
        self.top = top
        if self.bounded:
            self._prepare(top)

    def _prepare(self, hi):
        if (hi - self.p.c) / self.step > self.max_nodes:
            raise LimitNotConvergedError(
                f"b={hi!r} needs more than {self.max_nodes} grid nodes; the measure has unbounded support"
            )
        grid = make_grid(self.p.c, hi, self.step, self.nu_T, extra=(self.p.x,) + self.ys)
        self.grid = grid
        sf = self.sf
        self.disc_c, self.Wc = sweep(sf, sf.w, self.nu_T, self.p.c, grid)
        _, self.Zc = sweep(sf, sf.z, self.nu_T, self.p.c, grid)
        self.cols = {}
        for y in self.ys:
            self.cols[y] = sweep(sf, sf.w, self.nu_T, y, grid)
        self.hi = hi

    def values(self, b: float):
        """``(W(b,c), Z(b,c), {y: W(b,y)})`` for ``b`` beyond the prepared grid."""
        if not self.bounded:
            self._prepare(b)
            out_y = {y: float(H[-1]) for y, (_, H) in self.cols.items()}
            return float(self.Wc[-1]), float(self.Zc[-1]), out_y
        sf, c = self.sf, self.p.c
        Wb = self.disc_c.extend(b, sf.w(b - c), self.Wc)
        Zb = self.disc_c.extend(b, sf.z(b - c), self.Zc)
        out_y = {y: disc.extend(b, sf.w(b - y), H) for y, (disc, H) in self.cols.items()}
        return Wb, Zb, out_y

    def at_x(self, y=None):
        """``W(x, c)``, ``Z(x, c)`` and optionally ``W(x, y)`` on the current grid."""
        i = self.grid.index(self.p.x)
        wy = None
        if y is not None:
            disc, H = self.cols[y]
            j = int(np.searchsorted(disc.nodes, self.p.x))
            wy = float(H[j]) if j < disc.nodes.size and disc.nodes[j] == self.p.x else 0.0
        return float(self.Wc[i]), float(self.Zc[i]), wy

    def b_sequence(self, lim: LimitConfig):
        span = max(self.top - self.p.c, 1.0)
        for k in range(1, lim.max_extensions + 1):
            yield self.p.c + span * lim.growth_factor**k


def limit_C(p: ExitProblem, cfg: SolveConfig = SolveConfig(), lim: LimitConfig = LimitConfig()):
    """``lim_b Z(b,c)/W(b,c)`` and the iterates that led to it (nonincreasing)."""
    ext = _Extender(p, cfg.step, max_nodes=lim.max_nodes)

    def ratio(b):
        W, Z, _ = ext.values(b)
        return Z / W

    return _limit(ratio, ext.b_sequence(lim), lim, -1, "Z/W limit")


def limit_c(p: ExitProblem, y: float, cfg: SolveConfig = SolveConfig(), lim: LimitConfig = LimitConfig()):
    """``lim_b W(b,y)/W(b,c)`` and its iterates (nondecreasing, bounded by 1)."""
    if y < p.c:
        raise InputError("need y >= c")
    ext = _Extender(p, cfg.step, ys=(y,), max_nodes=lim.max_nodes)

    def ratio(b):
        W, _, wy = ext.values(b)
        return wy[y] / W

    return _limit(ratio, ext.b_sequence(lim), lim, +1, "W(b,y)/W(b,c) limit")


def one_sided_down(p: ExitProblem, lim: LimitConfig = LimitConfig(), cfg: SolveConfig = SolveConfig()) -> float:
    """``E_x[exp(-q tau_c - A); tau_c < inf]`` = ``Z(x,c) - C(c) W(x,c)``."""
    ext = _Extender(p, cfg.step, max_nodes=lim.max_nodes)

    def ratio(b):
        W, Z, _ = ext.values(b)
        return Z / W

    C, _ = _limit(ratio, ext.b_sequence(lim), lim, -1, "Z/W limit")
    W, Z, _ = ext.at_x()
    return Z - C * W


def one_sided_down_resolvent(p: ExitProblem, y: float, lim: LimitConfig = LimitConfig(), cfg: SolveConfig = SolveConfig()) -> float:
    """Resolvent density at ``y`` for the process killed below ``c``: ``c(y,c) W(x,c) - W(x,y)``."""
    if y < p.c:
        raise InputError("need y >= c")
    ext = _Extender(p, cfg.step, ys=(y,), max_nodes=lim.max_nodes)

    def ratio(b):
        W, _, wy = ext.values(b)
        return wy[y] / W

    cy, _ = _limit(ratio, ext.b_sequence(lim), lim, +1, "W(b,y)/W(b,c) limit")
    W, _, Wy = ext.at_x(y)
    return max(cy * W - Wy, 0.0)


# -- one-sided upward --------------------------------------------------------

def _u_table(model: LevyModel, q: float, s: OneSidedStructure, lo: float, hi: float, step: float, extra=()):
    sf = ScaleFunction(model, s.eta + q)
    nu1_T = apply_T(s.nu1, model)
    lo = min(lo, s.d_level)
    grid = make_grid(lo, max(hi, s.d_level), step, nu1_T, extra=(s.d_level,) + tuple(extra))
    return solve_u(sf, nu1_T, s.eta, s.d_level, grid)


def one_sided_up(model: LevyModel, q: float, structured, x: float, b: float, cfg: SolveConfig = SolveConfig(), lim: Optional[LimitConfig] = None) -> float:
    """``E_x[exp(-q tau_b - A); tau_b < inf]`` = ``u(x)/u(b)``.

    u is solved directly from its own equation, so ``lim`` is accepted for
    interface symmetry only; see :func:`one_sided_up_diagnostic` for the
    c -> -inf approximation.
    """
    s = _structure(structured)
    if not x <= b:
        raise InputError("need x <= b")
    u = _u_table(model, q, s, x, b, cfg.step, extra=(x, b))
    return u.at_node(x) / u.at_node(b)


def one_sided_up_diagnostic(model: LevyModel, q: float, structured, x: float, cs=(-2.0, -4.0, -8.0), cfg: SolveConfig = SolveConfig(), extrapolate: bool = True):
    """``|W(x,c)/W^(eta+q)(-c) - u(x)|`` for each c; should shrink as c decreases.

    The first-order discretisation error grows with the window length and
    would mask the convergence in c, so by default both sides are
    Richardson-extrapolated from steps h and h/2.
    """
    s = _structure(structured)
    sf_q = ScaleFunction(model, q)
    sf_eq = ScaleFunction(model, s.eta + q)
    steps = (cfg.step, 0.5 * cfg.step) if extrapolate else (cfg.step,)

    def combine(vals):
        return 2.0 * vals[1] - vals[0] if extrapolate else vals[0]

    u = combine([_u_table(model, q, s, x, x, h, extra=(x,)).at_node(x) for h in steps])
    out = []
    for c in cs:
        if not c < min(x, s.d_level):
            raise InputError("each c must lie below x and d_level")
        nu_T = apply_T(s.full_measure(c), model)
        vals = []
        for h in steps:
            grid = make_grid(c, x, h, nu_T, extra=(x,))
            _, W = sweep(sf_q, sf_q.w, nu_T, c, grid)
            vals.append(float(W[-1]))
        out.append(abs(combine(vals) / sf_eq.w(-c) - u))
    return out


def one_sided_up_resolvent(model: LevyModel, q: float, structured, x: float, b: float, y: float, cfg: SolveConfig = SolveConfig()) -> float:
    """Resolvent density at ``y`` of the process killed above ``b``."""
    s = _structure(structured)
    if not x <= b:
        raise InputError("need x <= b")
    if y > b:
        return 0.0
    u = _u_table(model, q, s, min(x, y), b, cfg.step, extra=(x, b, y))
    ratio = u.at_node(x) / u.at_node(b)
    sf = ScaleFunction(model, q)
    nu_T = apply_T(s.full_measure(y), model)
    grid = make_grid(y, b, cfg.step, nu_T, extra=(x,) if x >= y else ())
    disc, W = sweep(sf, sf.w, nu_T, y, grid)
    wb = float(W[-1])
    wx = float(W[grid.index(x)]) if x >= y else 0.0
    return max(ratio * wb - wx, 0.0)
