"""Replacing the diffuse part of a killing measure by a scaled Poisson random measure.

For ``nu = nu_a + nu_d`` and ``N_n`` Poisson with intensity ``n nu_d``, the
measure ``nu_a + N_n / n`` is purely atomic, so its scale function is solved
exactly; the experiment reports how fast it approaches the solution for nu.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..errors import InputError
from ..levy import LevyModel
from ..measures import PiecewiseConstant, RadonMeasureSpec, apply_T
from ..scale import ScaleFunction
from ..volterra.grid import make_grid
from ..volterra.sweep import Discretization, sweep


@dataclass(frozen=True)
class ConvergenceReport:
    n_values: tuple
    mean_sup_sq_w: tuple
    mean_sup_sq_z: tuple
    reps: int

    def rows(self):
        return list(zip(self.n_values, self.mean_sup_sq_w, self.mean_sup_sq_z))


def sample_poisson_atoms(density: PiecewiseConstant, lo: float, hi: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted atom locations of a Poisson random measure with intensity ``n * density`` on [lo, hi]."""
    F_lo = density.antiderivative(lo)
    total = density.antiderivative(hi) - F_lo
    if total <= 0:
        return np.zeros(0)
    k = rng.poisson(n * total)
    u = F_lo + rng.uniform(0.0, total, size=k)
    # invert the piecewise-linear antiderivative
    bp = np.concatenate([[lo], density.breakpoints[(density.breakpoints > lo) & (density.breakpoints < hi)], [hi]])
    Fb = density.antiderivative(bp)
    pos = np.interp(u, Fb, bp)
    return np.sort(pos)


def _atomic_solution(sf, h, levels, masses_T, y, eval_nodes):
    """Exact solution for a purely atomic driving measure, evaluated on ``eval_nodes``."""
    nodes = np.unique(np.concatenate([[y], levels]))
    nu = RadonMeasureSpec(tuple(zip(levels.tolist(), masses_T.tolist())))
    disc = Discretization(sf, nu, nodes)
    H = disc.forward(h(nodes - y))
    out = h(eval_nodes - y)
    for i0 in range(0, eval_nodes.size, 512):
        blk = eval_nodes[i0:i0 + 512]
        out[i0:i0 + 512] += disc.block(blk, 0, disc.n) @ H
    return out


def poissonization_experiment(
    model: LevyModel,
    nu: RadonMeasureSpec,
    q: float,
    y: float,
    T_hi: float,
    n_values: Sequence[int],
    reps: int,
    seed: int,
    step: float = 1e-3,
) -> ConvergenceReport:
    """Mean of ``sup_{[y, T_hi]} |W_T(nu_n) - W_T(nu)|^2`` (and the Z analogue) for each n."""
    n_values = [int(n) for n in n_values]
    if not n_values:
        raise InputError("n_values must not be empty")
    if any(n < 1 for n in n_values) or reps < 1:
        raise InputError("n values and reps must be positive")
    if not isinstance(nu.density, PiecewiseConstant):
        raise InputError("the diffuse part must be piecewise constant for sampling")
    sf = ScaleFunction(model, q)
    nu_T = apply_T(nu, model)
    grid = make_grid(y, T_hi, step, nu_T)
    _, W_ref = sweep(sf, sf.w, nu_T, y, grid)
    _, Z_ref = sweep(sf, sf.z, nu_T, y, grid)
    nodes = grid.nodes
    atoms = [(a, p) for a, p in nu.atoms if y <= a <= T_hi]
    base_levels = np.array([a for a, _ in atoms])
    base_masses = np.array([p for _, p in atoms])

    mean_w, mean_z = [], []
    for n in n_values:
        sq_w, sq_z = [], []
        for rep in range(reps):
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), n, rep])))
            pts = sample_poisson_atoms(nu.density, y, T_hi, n, rng)
            if np.unique(pts).size != pts.size or np.isin(pts, base_levels).any():
                raise InputError("sampled Poisson atoms collided; multiplicity must be one")
            levels = np.concatenate([base_levels, pts])
            masses = np.concatenate([base_masses, np.full(pts.size, 1.0 / n)])
            order = np.argsort(levels)
            levels, masses = levels[order], masses[order]
            nu_n = RadonMeasureSpec(tuple(zip(levels.tolist(), masses.tolist())))
            masses_T = apply_T(nu_n, model).atom_masses if levels.size else masses
            W_n = _atomic_solution(sf, sf.w, levels, masses_T, y, nodes)
            Z_n = _atomic_solution(sf, sf.z, levels, masses_T, y, nodes)
            sq_w.append(float(np.max(np.abs(W_n - W_ref)) ** 2))
            sq_z.append(float(np.max(np.abs(Z_n - Z_ref)) ** 2))
        mean_w.append(float(np.mean(sq_w)))
        mean_z.append(float(np.mean(sq_z)))
    return ConvergenceReport(tuple(n_values), tuple(mean_w), tuple(mean_z), reps)
