"""Exact scale functions for finitely many atoms, by recursion over the atoms."""
from __future__ import annotations

import numpy as np

from ..errors import InputError
from ..measures import kill_factor
from ..scale import ScaleFunction


def _validate(atoms):
    atoms = [(float(a), float(p)) for a, p in atoms]
    levels = [a for a, _ in atoms]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise InputError("atom levels must be strictly increasing")
    if any(not p > 0 for _, p in atoms):
        raise InputError("atom masses must be positive")
    return atoms


def _recursive(sf: ScaleFunction, atoms, x, y, base):
    atoms = _validate(atoms)
    levels = np.array([a for a, _ in atoms])
    factors = kill_factor(np.array([p for _, p in atoms]), sf.model) if atoms else np.zeros(0)
    # s[k] = value of the (k-1)-atom function at (a_k, y)
    s = np.zeros(len(atoms))
    for k in range(len(atoms)):
        s[k] = base(levels[k] - y) + np.sum(factors[:k] * sf.w(levels[k] - levels[:k]) * s[:k])
    xa = np.asarray(x, dtype=float)
    out = np.asarray(base(xa - y), dtype=float)
    for k in range(len(atoms)):
        out = out + factors[k] * sf.w(xa - levels[k]) * s[k]
    return float(out) if np.ndim(out) == 0 else out


def recursive_atomic_w(sf: ScaleFunction, atoms, x, y):
    """W for the functional ``sum p_i L^{a_i}``; raw masses ``p_i``."""
    return _recursive(sf, atoms, x, y, sf.w)


def recursive_atomic_z(sf: ScaleFunction, atoms, x, y):
    return _recursive(sf, atoms, x, y, sf.z)
