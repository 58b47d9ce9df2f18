"""Solver grids: a uniform lattice with atoms, breakpoints and query points inserted."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from ..errors import InputError, OffGridAtomError

_SNAP_REL = 1e-12


@dataclass(frozen=True, eq=False)
class GridSpec:
    lo: float
    hi: float
    step: float
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 1:
            raise InputError("grid needs at least one node")
        if np.any(np.diff(nodes) <= 0):
            raise InputError("grid nodes must be strictly increasing")
        if nodes[0] != self.lo or nodes[-1] != self.hi:
            raise InputError("grid nodes must start at lo and end at hi")
        if nodes.size > 1 and np.max(np.diff(nodes)) > self.step * (1 + 1e-9):
            raise InputError("grid gap exceeds step")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    def __len__(self):
        return self.nodes.size

    def index(self, x: float) -> int:
        """Index of node ``x``; raises if ``x`` is not a node."""
        i = int(np.searchsorted(self.nodes, x))
        if i < self.nodes.size and self.nodes[i] == x:
            return i
        raise InputError(f"{x!r} is not a grid node")

    def contains(self, x: float) -> bool:
        i = int(np.searchsorted(self.nodes, x))
        return i < self.nodes.size and self.nodes[i] == x

    def from_base(self, y: float) -> "GridSpec":
        """Sub-grid starting at node ``y``."""
        i = self.index(y)
        return GridSpec(float(y), self.hi, self.step, self.nodes[i:])

    def same_as(self, other: "GridSpec") -> bool:
        return self.nodes.shape == other.nodes.shape and bool(np.all(self.nodes == other.nodes))


def _snap(points: np.ndarray, lattice: np.ndarray, scale: float) -> np.ndarray:
    """Replace lattice nodes lying within rounding distance of an inserted point."""
    if not points.size:
        return lattice
    idx = np.clip(np.searchsorted(lattice, points), 1, lattice.size - 1)
    for cand in (idx - 1, idx):
        close = np.abs(lattice[cand] - points) <= _SNAP_REL * scale
        lattice = lattice.copy()
        lattice[cand[close]] = points[close]
    return lattice


def make_grid(lo: float, hi: float, step: float, measure=None, extra: Iterable[float] = ()) -> GridSpec:
    """Uniform nodes on ``[lo, hi]`` plus atom levels, density breakpoints and ``extra``."""
    lo, hi, step = float(lo), float(hi), float(step)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise InputError("grid bounds must be finite")
    if not step > 0:
        raise InputError(f"step must be positive, got {step!r}")
    if hi < lo:
        raise InputError(f"grid [{lo!r}, {hi!r}] is reversed")
    if hi == lo:
        return GridSpec(lo, hi, step, np.array([lo]))
    n = max(1, int(math.ceil((hi - lo) / step - 1e-9)))
    lattice = np.linspace(lo, hi, n + 1)
    pts = list(extra)
    if measure is not None:
        pts.extend(np.asarray(measure.atom_levels, dtype=float).tolist())
        pts.extend(np.asarray(measure.breakpoints, dtype=float).tolist())
    p = np.asarray([v for v in pts if lo <= v <= hi], dtype=float)
    scale = max(1.0, abs(lo), abs(hi))
    lattice = _snap(p, lattice, scale)
    nodes = np.unique(np.concatenate([lattice, p]))
    return GridSpec(lo, hi, step, nodes)


def check_atoms_on_grid(grid: GridSpec, levels, lo: Optional[float] = None) -> None:
    levels = np.asarray(levels, dtype=float)
    lo = grid.lo if lo is None else lo
    inside = levels[(levels >= lo) & (levels <= grid.hi)]
    missing = inside[~np.isin(inside, grid.nodes)]
    if missing.size:
        raise OffGridAtomError(f"atom levels {missing.tolist()!r} are not grid nodes")
