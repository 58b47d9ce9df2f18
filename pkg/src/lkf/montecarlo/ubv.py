"""Euler-Maruyama simulation of Brownian motion with drift killed at rate omega(X).

Exit is checked at step ends only, which biases exit probabilities by
O(sqrt(dt)); callers should allow for it.
"""
from __future__ import annotations

import math
import warnings

import numpy as np

from ..errors import InputError, UnsupportedModelError
from ..levy import LevyModel
from ..measures import RadonMeasureSpec
from .common import CensoringError, MCConfig, MCResult, gather, run_blocks


def _ubv_block(rng, n, model, omega, f, q, x0, c, b, mc: MCConfig):
    dt = mc.euler_dt
    sd = model.sigma * math.sqrt(dt)
    drift = model.gamma * dt
    up = np.zeros(n)
    down = np.zeros(n)
    R = np.zeros(n)
    censored = np.zeros(n, dtype=bool)
    # state of the surviving paths only
    idx = np.arange(n)
    x = np.full(n, float(x0))
    A = np.zeros(n)
    r = np.zeros(n)
    t = 0.0
    while idx.size:
        if f is not None:
            r += np.exp(-q * t - A) * f(x) * dt
        if omega is not None:
            A += omega(x) * dt
        x += drift + sd * rng.standard_normal(idx.size)
        t += dt
        out_up = x >= b
        out_dn = x <= c
        done = out_up | out_dn
        if done.any():
            w = np.exp(-q * t - A[done])
            up[idx[done]] = np.where(out_up[done], w, 0.0)
            down[idx[done]] = np.where(out_dn[done], w, 0.0)
            R[idx[done]] = r[done]
            keep = ~done
            idx, x, A, r = idx[keep], x[keep], A[keep], r[keep]
        if t > mc.time_cap and idx.size:
            censored[idx] = True
            R[idx] = r
            break
    return {"up": up, "down": down, "resolvent": R, "censored": censored}


def _prepare(model: LevyModel, nu: RadonMeasureSpec, x, c, b):
    if model.sigma == 0 or model.jumps is not None:
        raise UnsupportedModelError("Euler simulation is implemented for Brownian motion with drift")
    if nu.atoms:
        raise InputError("local-time atoms are not simulated for unbounded variation; use the atomic recursion")
    if not c <= x <= b:
        raise InputError("need c <= x <= b")
    return nu.density if nu.has_density() else None


def _as_fn(f):
    if f is None:
        return None
    if isinstance(f, (int, float)):
        val = float(f)
        return lambda z: np.full(np.shape(z), val)
    return f


def _run(model, nu, q, x, c, b, mc, f):
    omega = _prepare(model, nu, x, c, b)
    fn = _as_fn(f)
    res = run_blocks(mc, lambda rng, n: _ubv_block(rng, n, model, omega, fn, q, x, c, b, mc))
    n_cens = int(gather(res, "censored").sum())
    if n_cens:
        if q == 0 and nu.is_zero():
            raise CensoringError(f"{n_cens} paths hit time_cap={mc.time_cap!r} with no discounting or killing")
        warnings.warn(f"{n_cens} paths censored at time_cap={mc.time_cap!r}", RuntimeWarning)
    return res, n_cens


def simulate_ubv_exit(model: LevyModel, nu: RadonMeasureSpec, q: float, x: float, c: float, b: float, mc: MCConfig):
    """``(up, down)`` for a Brownian model killed by a density-only measure."""
    res, n_cens = _run(model, nu, q, x, c, b, mc, None)
    return (MCResult.from_samples(gather(res, "up"), n_cens),
            MCResult.from_samples(gather(res, "down"), n_cens))


def simulate_ubv_suite(model, nu, q, x, c, b, f, mc: MCConfig):
    res, n_cens = _run(model, nu, q, x, c, b, mc, f)
    return {k: MCResult.from_samples(gather(res, k), n_cens) for k in ("up", "down", "resolvent")}
