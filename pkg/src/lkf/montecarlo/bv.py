"""Exact event-driven simulation for bounded-variation models.

Between jumps the path moves up linearly at speed d, so it creeps over every
level and its local time at a level a grows by 1/d per visit.  Along an
upward segment the functional ``A`` is accumulated piece by piece between
critical levels (atoms, density breakpoints, f breakpoints, c, b); on each
piece the density and f are constant and the discounted time integral has a
closed form.
"""
from __future__ import annotations

import math
import warnings
from typing import Optional, Union

import numpy as np

from ..errors import InputError
from ..levy import LevyModel, drift_d, is_bounded_variation
from ..measures import PiecewiseConstant, RadonMeasureSpec
from .common import CensoringError, MCConfig, MCResult, PathState, gather, run_blocks


def _piece_values(fn, levels: np.ndarray) -> np.ndarray:
    """Value of a right-continuous step function on each interval between levels."""
    out = np.empty(levels.size - 1)
    for j in range(levels.size - 1):
        lo, hi = levels[j], levels[j + 1]
        pt = lo if math.isfinite(lo) else hi - 1.0
        out[j] = float(fn(pt))
    return out


def _as_step(f) -> PiecewiseConstant:
    if f is None:
        return None
    if isinstance(f, PiecewiseConstant):
        return f
    if isinstance(f, (int, float)):
        return PiecewiseConstant([-1e300], [float(f)])
    raise InputError("exact simulation supports f given as a constant or PiecewiseConstant")


class _Layout:
    def __init__(self, model: LevyModel, nu: RadonMeasureSpec, c: float, b: float, f):
        self.d = drift_d(model)
        self.rate = model.jumps.rate if model.jumps is not None else 0.0
        self.mean_size = model.jumps.mean_size if model.jumps is not None else 0.0
        self.atom_levels = nu.atom_levels
        self.atom_masses = nu.atom_masses
        f = _as_step(f)
        self.f = f
        pts = [c, b] + self.atom_levels.tolist() + nu.breakpoints.tolist()
        if f is not None:
            pts += f.breakpoints.tolist()
        pts = [p for p in pts if math.isfinite(p) and abs(p) < 1e299]
        self.levels = np.unique(np.concatenate([[-np.inf], pts, [np.inf]]))
        self.omega = _piece_values(nu.density_at, self.levels)
        if np.any(self.omega < 0):
            raise InputError("killing density must be nonnegative")
        self.fvals = _piece_values(f, self.levels) if f is not None else None
        # atom mass (raw) sitting at each level, and its column index
        self.level_mass = np.zeros(self.levels.size)
        self.level_atom = np.full(self.levels.size, -1)
        for k, (a, p) in enumerate(zip(self.atom_levels, self.atom_masses)):
            j = int(np.searchsorted(self.levels, a))
            self.level_mass[j] = p
            self.level_atom[j] = k


def _bv_block(rng, n, lay: _Layout, q, x0, c, b, mc: MCConfig, track: bool):
    st = PathState.start(n, x0, lay.atom_levels.size)
    R = np.zeros(n)
    A_atoms = np.zeros(n)
    up = np.zeros(n)
    down = np.zeros(n)
    censored = np.zeros(n, dtype=bool)
    alive = np.arange(n)
    landings = 0
    d = lay.d
    while alive.size:
        x = st.x[alive]
        t = st.t[alive]
        A = st.A[alive]
        m = alive.size
        if lay.rate > 0:
            tau = rng.exponential(1.0 / lay.rate, size=m)
        else:
            tau = np.full(m, np.inf)
        with np.errstate(invalid="ignore"):
            x1 = x + d * tau
        hit = x1 >= b
        seg_end = np.where(hit, b, x1)
        r = R[alive]
        for j in range(lay.levels.size - 1):
            L, U = lay.levels[j], lay.levels[j + 1]
            p = lay.level_mass[j]
            if p > 0:
                crossed = (x < L) & ((L < seg_end) | (hit & (L == seg_end)))
                if np.any(crossed):
                    A = A + np.where(crossed, p / d, 0.0)
                    A_atoms[alive[crossed]] += p / d
                    if track:
                        st.local_counts[alive[crossed], lay.level_atom[j]] += 1
            lo = np.clip(x, L, U)
            hi = np.clip(seg_end, L, U)
            dt = (hi - lo) / d
            if not np.any(dt > 0):
                continue
            w = lay.omega[j]
            if lay.fvals is not None and lay.fvals[j] != 0:
                k = q + w
                if k > 0:
                    frac = -np.expm1(-k * dt) / k
                else:
                    frac = dt
                r = r + lay.fvals[j] * np.exp(-q * t - A) * frac
            t = t + dt
            if w:
                A = A + w * dt
        if not np.all(A >= st.A[alive]):
            raise AssertionError("additive functional decreased along a path")
        R[alive] = r
        # exits upward at b
        st.t[alive], st.A[alive], st.x[alive] = t, A, seg_end
        up[alive[hit]] = np.exp(-q * t[hit] - A[hit])
        cont = ~hit
        idx = alive[cont]
        jumps = rng.exponential(lay.mean_size, size=idx.size) if lay.rate > 0 else np.zeros(idx.size)
        xn = seg_end[cont] - jumps
        st.x[idx] = xn
        below = xn < c
        down[idx[below]] = np.exp(-q * t[cont][below] - A[cont][below])
        # landing exactly on an atom level has probability zero; count it anyway
        if lay.atom_levels.size and np.any(~below):
            on = np.isin(xn, lay.atom_levels) & ~below
            if np.any(on):
                landings += int(on.sum())
                pos = np.searchsorted(lay.atom_levels, xn[on])
                st.A[idx[on]] += lay.atom_masses[pos] / d
                A_atoms[idx[on]] += lay.atom_masses[pos] / d
        still = idx[~below]
        over = st.t[still] > mc.time_cap
        censored[still[over]] = True
        alive = still[~over]
    return {"up": up, "down": down, "resolvent": R, "censored": censored,
            "A": st.A, "A_atoms": A_atoms, "counts": st.local_counts, "landings": landings}


def _check(model, nu, c, x, b):
    if not is_bounded_variation(model):
        raise InputError("exact simulation needs a bounded-variation model")
    if not c <= x <= b:
        raise InputError("need c <= x <= b")


def _run(model, nu, q, x, c, b, mc, f, track=False):
    _check(model, nu, c, x, b)
    lay = _Layout(model, nu, c, b, f)
    res = run_blocks(mc, lambda rng, n: _bv_block(rng, n, lay, q, x, c, b, mc, track))
    n_cens = int(gather(res, "censored").sum())
    if n_cens:
        if q == 0 and nu.is_zero():
            raise CensoringError(f"{n_cens} paths hit time_cap={mc.time_cap!r} with no discounting or killing")
        warnings.warn(f"{n_cens} paths censored at time_cap={mc.time_cap!r}", RuntimeWarning)
    return res, n_cens


def simulate_bv_exit(model: LevyModel, nu: RadonMeasureSpec, q: float, x: float, c: float, b: float, mc: MCConfig):
    """``(up, down)`` estimates of the killed two-sided exit transforms."""
    res, n_cens = _run(model, nu, q, x, c, b, mc, None)
    return (MCResult.from_samples(gather(res, "up"), n_cens),
            MCResult.from_samples(gather(res, "down"), n_cens))


def simulate_bv_suite(model, nu, q, x, c, b, f, mc: MCConfig):
    """Up, down and resolvent estimates from one set of paths."""
    res, n_cens = _run(model, nu, q, x, c, b, mc, f)
    return {k: MCResult.from_samples(gather(res, k), n_cens) for k in ("up", "down", "resolvent")}


def simulate_bv_paths(model, nu, q, x, c, b, mc: MCConfig):
    """Raw per-path arrays (weights, A, atom part of A, per-atom visit counts)."""
    res, _ = _run(model, nu, q, x, c, b, mc, None, track=True)
    return {k: (gather(res, k) if k != "landings" else sum(r[k] for r in res)) for k in res[0]}
