"""Forward-sweep solver for measure-driven Volterra equations.

The equation

    H(x) = h(x - y) + int_{[y, x]} W(x - z) H(z) mu(dz)

is discretised on grid nodes x_0 = y < x_1 < ... < x_N.  Atoms of ``mu`` sit
on nodes and enter exactly.  On each cell [x_k, x_{k+1}] the unknown is
frozen at its left node and the remaining factor ``W(x_i - z) m(z)`` is
integrated by two-point Gauss-Legendre (exact up to O(h^4) because density
breakpoints are nodes).  The scheme is first order in the step, explicit in
the density part, and keeps the self-weight of an atom at x_i on the
diagonal, ``1 - W(0) mu{x_i}``.
"""
from __future__ import annotations

from collections.abc import Sequence
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from ..errors import AssumptionViolatedError, InputError, OffGridAtomError
from ..measures import RadonMeasureSpec, SignedMeasureSpec, as_signed
from ..scale import ScaleFunction
from .grid import GridSpec
from .tables import ScaleTable, SolveConfig

_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)
_BLOCK_ELEMS = 2_000_000


def _eval_density(driving, z: np.ndarray) -> np.ndarray:
    try:
        m = np.asarray(driving.density_at(z), dtype=float)
        if m.shape == z.shape:
            return m
    except (TypeError, ValueError):
        pass
    return np.vectorize(lambda t: float(driving.density_at(t)))(z)


def eval_forcing(h: Callable, s: np.ndarray) -> np.ndarray:
    """Evaluate ``h`` on an array, falling back to a scalar loop."""
    try:
        out = np.asarray(h(s), dtype=float)
        if out.shape != s.shape:
            raise ValueError
    except (TypeError, ValueError):
        out = np.array([float(h(v)) for v in np.ravel(s)]).reshape(s.shape)
    if not np.all(np.isfinite(out)):
        raise InputError("forcing function h returned non-finite values")
    return out


class Discretization:
    """Kernel weights of the scheme on a fixed node set."""

    def __init__(self, sf: ScaleFunction, driving, nodes: np.ndarray):
        driving = as_signed(driving)
        self.sf = sf
        self.driving = driving
        self.nodes = np.asarray(nodes, dtype=float)
        n = self.n = self.nodes.size

        levels = np.asarray(driving.atom_levels, dtype=float)
        masses = np.asarray(driving.atom_masses, dtype=float)
        sel = (levels >= self.nodes[0]) & (levels <= self.nodes[-1]) & (masses != 0)
        idx = np.searchsorted(self.nodes, levels[sel])
        bad = (idx >= n) | (self.nodes[np.minimum(idx, n - 1)] != levels[sel])
        if np.any(bad):
            raise OffGridAtomError(f"atom levels {levels[sel][bad].tolist()!r} are not grid nodes")
        self.atom_idx = idx
        self.atom_mass = masses[sel]
        self.pm = np.zeros(n)
        self.pm[idx] = self.atom_mass

        self.cell_idx = np.zeros(0, dtype=int)
        self.zg = np.zeros((0, 2))
        self.gw = np.zeros((0, 2))
        if n > 1 and driving.has_density():
            half = 0.5 * np.diff(self.nodes)
            mid = self.nodes[:-1] + half
            zg = mid[:, None] + half[:, None] * _GAUSS[None, :]
            gw = _eval_density(driving, zg) * half[:, None]
            active = np.nonzero(np.any(gw != 0, axis=1))[0]
            self.cell_idx, self.zg, self.gw = active, zg[active], gw[active]

        self.diag = 1.0 - sf.w_at_zero * self.pm

    @property
    def trivial(self) -> bool:
        return self.atom_idx.size == 0 and self.cell_idx.size == 0

    def check_denominators(self) -> None:
        bad = np.nonzero(self.diag <= 0)[0]
        if bad.size:
            i = int(bad[0])
            raise AssumptionViolatedError(float(self.nodes[i]), float(self.diag[i]))

    def cell_masses(self) -> np.ndarray:
        """Integral of the density over every cell (length n-1)."""
        out = np.zeros(max(self.n - 1, 0))
        out[self.cell_idx] = self.gw.sum(axis=1)
        return out

    def block(self, xs, k0: int, k1: int) -> np.ndarray:
        """Weights ``A[x, k]`` multiplying H(x_k) in the value at ``x``, for k in [k0, k1)."""
        xs = np.asarray(xs, dtype=float)
        A = np.zeros((xs.size, k1 - k0))
        sel = (self.atom_idx >= k0) & (self.atom_idx < k1)
        if np.any(sel):
            cols = self.atom_idx[sel]
            A[:, cols - k0] += self.sf.w(xs[:, None] - self.nodes[cols][None, :]) * self.atom_mass[sel]
        sel = (self.cell_idx >= k0) & (self.cell_idx < k1)
        if np.any(sel):
            cols = self.cell_idx[sel]
            # only cells left of the largest x contribute
            keep = self.zg[sel][:, 0] < xs.max()
            if np.any(keep):
                cols = cols[keep]
                kern = self.sf.w(xs[:, None, None] - self.zg[sel][keep][None, :, :])
                A[:, cols - k0] += np.einsum("rcg,cg->rc", kern, self.gw[sel][keep])
        return A

    def _block_size(self) -> int:
        return int(max(16, min(512, _BLOCK_ELEMS // max(self.n, 1))))

    def forward(self, F: np.ndarray) -> np.ndarray:
        """Solve ``(I - A) H = F`` for one or several right-hand sides."""
        self.check_denominators()
        F = np.asarray(F, dtype=float)
        if self.trivial:
            return F.copy()
        H = np.empty_like(F)
        bs = self._block_size()
        for i0 in range(0, self.n, bs):
            i1 = min(self.n, i0 + bs)
            xs = self.nodes[i0:i1]
            rhs = F[i0:i1].copy()
            if i0 > 0:
                rhs += self.block(xs, 0, i0) @ H[:i0]
            B = -self.block(xs, i0, i1)
            B[np.diag_indices_from(B)] = self.diag[i0:i1]
            H[i0:i1] = solve_triangular(B, rhs, lower=True, check_finite=False)
        return H

    def adjoint(self, E: np.ndarray) -> np.ndarray:
        """Solve ``(I - A)^T V = E``; rows of the solution operator are ``V^T``."""
        self.check_denominators()
        E = np.asarray(E, dtype=float)
        if self.trivial:
            return E.copy()
        V = np.empty_like(E)
        bs = self._block_size()
        ends = list(range(self.n, 0, -bs))
        for k1 in ends:
            k0 = max(0, k1 - bs)
            rhs = E[k0:k1].copy()
            if k1 < self.n:
                rhs += self.block(self.nodes[k1:], k0, k1).T @ V[k1:]
            B = -self.block(self.nodes[k0:k1], k0, k1)
            B[np.diag_indices_from(B)] = self.diag[k0:k1]
            V[k0:k1] = solve_triangular(B, rhs, lower=True, trans="T", check_finite=False)
        return V

    def extend(self, x: float, forcing: float, H: np.ndarray) -> float:
        """Value at a point ``x`` right of every node and of the measure's support."""
        return float(forcing + self.block(np.array([x]), 0, self.n)[0] @ H)


def _base_grid(grid: GridSpec, y: float) -> GridSpec:
    if not grid.contains(y):
        raise InputError(f"base point {y!r} is not a grid node")
    return grid.from_base(y)


def _check_nonnegative(nu) -> None:
    if isinstance(nu, SignedMeasureSpec):
        raise InputError("expected a nonnegative measure, got a signed one")


def sweep(sf: ScaleFunction, h: Callable, driving, y: float, grid: GridSpec):
    """Return ``(discretization, values)`` on the nodes of ``grid`` at or above ``y``."""
    g = _base_grid(grid, y)
    disc = Discretization(sf, driving, g.nodes)
    hv = eval_forcing(h, g.nodes - y)
    return disc, disc.forward(hv)


def solve_generic(sf: ScaleFunction, h: Callable, driving, y: float, grid: GridSpec, kind: str = "generic") -> ScaleTable:
    disc, H = sweep(sf, h, driving, y, grid)
    return ScaleTable(float(y), disc.nodes, H, kind, sf.q, grid.step)


def solve_w(sf: ScaleFunction, nu_T: RadonMeasureSpec, y: float, grid: GridSpec) -> ScaleTable:
    _check_nonnegative(nu_T)
    return solve_generic(sf, sf.w, nu_T, y, grid, kind="W")


def _definition_z(sf: ScaleFunction, nu_T, grid: GridSpec, c: float) -> np.ndarray:
    """``1 + int W_nu(x, y) nu(dy) + q int W_nu(x, y) dy`` from the two-argument family."""
    fam = solve_w_family(sf, nu_T, grid.from_base(c))
    M = fam.matrix
    disc = fam.disc
    nodes = disc.nodes
    out = np.ones(nodes.size)
    out += M[:, disc.atom_idx] @ disc.atom_mass
    cm = disc.cell_masses()
    if cm.size:
        # cell k is inside [c, x_i] for k < i; W_nu(x_i, .) vanishes right of x_i
        avg = 0.5 * (M[:, :-1] + M[:, 1:])
        lower = np.tril(np.ones_like(avg), k=-1)
        out += (avg * lower) @ cm
        if sf.q:
            out += sf.q * ((avg * lower) @ np.diff(nodes))
    return out


def solve_z(sf: ScaleFunction, nu_T: RadonMeasureSpec, c: float, grid: GridSpec, cfg: SolveConfig = None, cross_check=None) -> ScaleTable:
    """Z-type solution with base ``c``.

    When the node count is at most ``cfg.cross_check_limit`` (or
    ``cross_check`` is True) Z is also rebuilt from its definition through the
    W family and the largest gap is stored as ``meta['definition_discrepancy']``.
    """
    _check_nonnegative(nu_T)
    cfg = cfg or SolveConfig(step=grid.step)
    disc, H = sweep(sf, sf.z, nu_T, c, grid)
    meta = {}
    do_check = cross_check if cross_check is not None else disc.n <= cfg.cross_check_limit
    if do_check:
        alt = _definition_z(sf, nu_T, grid, c)
        meta["definition_discrepancy"] = float(np.max(np.abs(alt - H)))
    return ScaleTable(float(c), disc.nodes, H, "Z", sf.q, grid.step, meta)


class ScaleFamily(Sequence):
    """All W tables ``x -> W_nu(x, y_j)`` for bases ``y_j`` running over the grid."""

    def __init__(self, disc: Discretization, matrix: np.ndarray, step: float):
        self.disc = disc
        self.nodes = disc.nodes
        self.matrix = matrix
        self.step = step
        self.q = disc.sf.q

    def __len__(self):
        return self.nodes.size

    def __getitem__(self, j):
        if isinstance(j, slice):
            return [self[i] for i in range(*j.indices(len(self)))]
        j = range(len(self))[j]
        return ScaleTable(float(self.nodes[j]), self.nodes[j:], self.matrix[j:, j], "W", self.q, self.step)

    def _idx(self, v: float) -> int:
        i = int(np.searchsorted(self.nodes, v))
        if i >= self.nodes.size or self.nodes[i] != v:
            raise InputError(f"{v!r} is not a node of this family")
        return i

    def at(self, x: float, y: float) -> float:
        return float(self.matrix[self._idx(x), self._idx(y)])

    def row(self, x: float) -> np.ndarray:
        """``y -> W_nu(x, y)`` over every node (zero for y > x)."""
        return self.matrix[self._idx(x)].copy()

    def column(self, y: float) -> ScaleTable:
        return self[self._idx(y)]


def solve_w_family(sf: ScaleFunction, nu_T: RadonMeasureSpec, grid: GridSpec) -> ScaleFamily:
    """One W table per node as base; a single triangular solve with n right-hand sides."""
    _check_nonnegative(nu_T)
    disc = Discretization(sf, nu_T, grid.nodes)
    F = sf.w(grid.nodes[:, None] - grid.nodes[None, :])
    return ScaleFamily(disc, disc.forward(F), grid.step)


def solve_w_rows(sf: ScaleFunction, nu_T, grid: GridSpec, xs) -> np.ndarray:
    """Rows ``y -> W_nu(x, y)`` for each node ``x`` in ``xs``, without forming the family."""
    disc = Discretization(sf, nu_T, grid.nodes)
    idx = [int(np.searchsorted(grid.nodes, x)) for x in xs]
    for x, i in zip(xs, idx):
        if i >= grid.nodes.size or grid.nodes[i] != x:
            raise InputError(f"{x!r} is not a grid node")
    E = np.zeros((disc.n, len(idx)))
    E[idx, np.arange(len(idx))] = 1.0
    V = disc.adjoint(E)
    rows = np.zeros((len(idx), disc.n))
    bs = disc._block_size()
    for k0 in range(0, disc.n, bs):
        k1 = min(disc.n, k0 + bs)
        F = sf.w(grid.nodes[k0:k1, None] - grid.nodes[None, :])
        rows += V[k0:k1].T @ F
    return rows


def solve_u(sf_eta_q: ScaleFunction, nu1_T: RadonMeasureSpec, eta: float, d_level: float, grid: GridSpec) -> ScaleTable:
    """Solution of the one-sided u-equation on the whole grid.

    Below ``d_level`` it equals ``exp(Phi(eta+q) x)``; above, the driving
    measure is ``T(nu1) - eta dz``.
    """
    if eta < 0:
        raise InputError("eta must be nonnegative")
    _check_nonnegative(nu1_T)
    if not grid.contains(d_level):
        raise InputError(f"d_level {d_level!r} must be a grid node")
    ph = sf_eta_q.phi
    if eta > 0:
        minus = RadonMeasureSpec.lebesgue(eta, d_level, window=nu1_T.window)
        driving = SignedMeasureSpec(nu1_T, minus)
    else:
        driving = nu1_T
    disc, H = sweep(sf_eta_q, lambda s: np.exp(ph * (s + d_level)), driving, d_level, grid)
    below = grid.nodes[grid.nodes < d_level]
    values = np.concatenate([np.exp(ph * below), H])
    return ScaleTable(float(d_level), grid.nodes, values, "U", sf_eta_q.q, grid.step, {"eta": eta})
