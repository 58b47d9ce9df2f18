"""Revuz measures of additive functionals on a working window.

A measure is a finite list of atoms plus a nonnegative density.  The density
is usually :class:`PiecewiseConstant`, but any vectorised callable works for
the solvers (its integral is then taken numerically).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .errors import DomainError, InputError
from .levy import LevyModel, drift_d, is_bounded_variation


class PiecewiseConstant:
    """Right-continuous step function ``m(z) = values[k]`` on ``[bp[k], bp[k+1])``.

    Zero to the left of the first breakpoint; the last value extends to +inf.
    """

    def __init__(self, breakpoints: Sequence[float] = (), values: Sequence[float] = ()):
        bp = np.asarray(breakpoints, dtype=float).ravel()
        vals = np.asarray(values, dtype=float).ravel()
        if bp.shape != vals.shape:
            raise InputError("density breakpoints and values differ in length")
        if bp.size and np.any(np.diff(bp) <= 0):
            raise InputError("density breakpoints must be strictly increasing")
        if np.any(~np.isfinite(bp)) or np.any(~np.isfinite(vals)):
            raise InputError("density breakpoints and values must be finite")
        self.breakpoints = bp
        self.values = vals
        # cumulative integral at each breakpoint
        if bp.size:
            self._cum = np.concatenate([[0.0], np.cumsum(vals[:-1] * np.diff(bp))])
        else:
            self._cum = np.zeros(0)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "PiecewiseConstant":
        pairs = [tuple(p) for p in pairs]
        for p in pairs:
            if len(p) != 2:
                raise InputError(f"density entry {p!r} is not a [breakpoint, value] pair")
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    @classmethod
    def constant(cls, value: float, start: float = -np.finfo(float).max / 4) -> "PiecewiseConstant":
        return cls([start], [value])

    def pairs(self) -> list:
        return [[float(b), float(v)] for b, v in zip(self.breakpoints, self.values)]

    def __call__(self, z):
        za = np.asarray(z, dtype=float)
        if not self.breakpoints.size:
            out = np.zeros_like(za)
        else:
            k = np.searchsorted(self.breakpoints, za, side="right") - 1
            out = np.where(k >= 0, self.values[np.clip(k, 0, None)], 0.0)
        return float(out) if out.ndim == 0 else out

    def antiderivative(self, z):
        """``int_{-inf}^z m``; finite because m vanishes left of the first breakpoint."""
        za = np.asarray(z, dtype=float)
        if not self.breakpoints.size:
            out = np.zeros_like(za)
        else:
            k = np.searchsorted(self.breakpoints, za, side="right") - 1
            kc = np.clip(k, 0, None)
            with np.errstate(invalid="ignore"):
                tail = np.where(self.values[kc] == 0, 0.0, self.values[kc] * (za - self.breakpoints[kc]))
            out = np.where(k >= 0, self._cum[kc] + tail, 0.0)
        return float(out) if out.ndim == 0 else out

    def integral(self, a: float, b: float) -> float:
        return float(self.antiderivative(b) - self.antiderivative(a))

    def is_zero(self) -> bool:
        return not np.any(self.values != 0)

    def scaled(self, factor: float) -> "PiecewiseConstant":
        return PiecewiseConstant(self.breakpoints, factor * self.values)

    def __eq__(self, other):
        return (
            isinstance(other, PiecewiseConstant)
            and np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.breakpoints.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return f"PiecewiseConstant({self.pairs()!r})"


def _integrate_callable(fn: Callable, a: float, b: float, breaks=()) -> float:
    if b <= a:
        return 0.0
    pts = sorted(p for p in breaks if a < p < b)
    return float(integrate.quad(lambda z: float(fn(z)), a, b, points=pts or None, limit=200)[0])


@dataclass(frozen=True)
class RadonMeasureSpec:
    """Atoms ``sum p_i delta_{a_i}`` plus density ``m(z) dz`` on ``window``."""

    atoms: Tuple[Tuple[float, float], ...] = ()
    density: Callable = field(default_factory=PiecewiseConstant)
    window: Tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        atoms = tuple((float(a), float(p)) for a, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "window", (float(self.window[0]), float(self.window[1])))
        lo, hi = self.window
        if not lo < hi:
            raise InputError(f"window {self.window!r} is empty")
        levels = [a for a, _ in atoms]
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise InputError("atom levels must be strictly increasing")
        for a, p in atoms:
            if not (math.isfinite(a) and lo <= a <= hi):
                raise InputError(f"atom level {a!r} outside window {self.window!r}")
            if not (p > 0 and math.isfinite(p)):
                raise InputError(f"atom mass at {a!r} must be positive and finite, got {p!r}")
        if isinstance(self.density, PiecewiseConstant) and np.any(self.density.values < 0):
            raise InputError("density must be nonnegative")

    # -- constructors -----------------------------------------------------
    @classmethod
    def atomic(cls, atoms, window=(-math.inf, math.inf)) -> "RadonMeasureSpec":
        return cls(atoms=tuple(atoms), window=window)

    @classmethod
    def lebesgue(cls, rate: float, lo: float, hi: float = math.inf, window=None) -> "RadonMeasureSpec":
        """``rate * dz`` restricted to ``[lo, hi)``."""
        bps, vals = [lo], [rate]
        if math.isfinite(hi):
            bps.append(hi)
            vals.append(0.0)
        win = window if window is not None else (-math.inf, math.inf)
        return cls(density=PiecewiseConstant(bps, vals), window=win)

    @classmethod
    def zero(cls, window=(-math.inf, math.inf)) -> "RadonMeasureSpec":
        return cls(window=window)

    # -- views ------------------------------------------------------------
    @property
    def atom_levels(self) -> np.ndarray:
        return np.array([a for a, _ in self.atoms], dtype=float)

    @property
    def atom_masses(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms], dtype=float)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.asarray(getattr(self.density, "breakpoints", ()), dtype=float)

    def density_at(self, z):
        return self.density(z)

    def has_density(self) -> bool:
        if isinstance(self.density, PiecewiseConstant):
            return not self.density.is_zero()
        return True

    def is_zero(self) -> bool:
        return not self.atoms and not self.has_density()

    def support_hi(self) -> float:
        """Smallest s such that the measure puts no mass on (s, inf)."""
        top = max((a for a, _ in self.atoms), default=-math.inf)
        if self.has_density():
            if not isinstance(self.density, PiecewiseConstant):
                return self.window[1]
            vals = self.density.values
            if vals[-1] != 0:
                return self.window[1]
            nz = np.nonzero(vals)[0]
            top = max(top, float(self.density.breakpoints[nz[-1] + 1]))
        return min(top, self.window[1])

    def density_integral(self, a: float, b: float) -> float:
        if isinstance(self.density, PiecewiseConstant):
            return self.density.integral(a, b)
        return _integrate_callable(self.density, a, b)

    def with_window(self, window) -> "RadonMeasureSpec":
        return RadonMeasureSpec(self.atoms, self.density, window)

    def to_config(self) -> dict:
        out = {"atoms": [[a, p] for a, p in self.atoms], "window": list(self.window)}
        if isinstance(self.density, PiecewiseConstant):
            out["density"] = self.density.pairs()
        return out


@dataclass(frozen=True)
class SignedMeasureSpec:
    """``plus - minus``; both parts must share a window."""

    plus: RadonMeasureSpec
    minus: RadonMeasureSpec = None

    def __post_init__(self):
        if self.minus is None:
            object.__setattr__(self, "minus", RadonMeasureSpec.zero(self.plus.window))
        if self.plus.window != self.minus.window:
            raise InputError("signed measure parts must share a window")

    @property
    def window(self):
        return self.plus.window

    @property
    def atom_levels(self) -> np.ndarray:
        return np.union1d(self.plus.atom_levels, self.minus.atom_levels)

    @property
    def atom_masses(self) -> np.ndarray:
        """Net mass at each level of :attr:`atom_levels`."""
        levels = self.atom_levels
        net = np.zeros_like(levels)
        for spec, sign in ((self.plus, 1.0), (self.minus, -1.0)):
            if spec.atoms:
                idx = np.searchsorted(levels, spec.atom_levels)
                net[idx] += sign * spec.atom_masses
        return net

    @property
    def breakpoints(self) -> np.ndarray:
        return np.union1d(self.plus.breakpoints, self.minus.breakpoints)

    def density_at(self, z):
        return np.asarray(self.plus.density_at(z)) - np.asarray(self.minus.density_at(z))

    def has_density(self) -> bool:
        return self.plus.has_density() or self.minus.has_density()

    def is_zero(self) -> bool:
        return self.plus.is_zero() and self.minus.is_zero()

    def support_hi(self) -> float:
        return max(self.plus.support_hi(), self.minus.support_hi())


def as_signed(nu) -> SignedMeasureSpec:
    return nu if isinstance(nu, SignedMeasureSpec) else SignedMeasureSpec(nu)


def t_mass(p, model: LevyModel):
    """Image of an atom mass under T: ``d (1 - exp(-p/d))``, or ``p`` without a drift."""
    p = np.asarray(p, dtype=float)
    if not is_bounded_variation(model):
        return p
    d = drift_d(model)
    return -d * np.expm1(-p / d)


def inverse_t_mass(m, model: LevyModel):
    """Raw mass p whose T-image is ``m`` (requires ``m < d`` in the BV case)."""
    m = np.asarray(m, dtype=float)
    if not is_bounded_variation(model):
        return m
    d = drift_d(model)
    if np.any(m >= d):
        raise DomainError("T-image mass must be below the drift d")
    return -d * np.log1p(-m / d)


def kill_factor(p, model: LevyModel):
    """``d (exp(p/d) - 1)``, the weight used by the atomic recursions (``p`` for UBV)."""
    p = np.asarray(p, dtype=float)
    if not is_bounded_variation(model):
        return p
    d = drift_d(model)
    return d * np.expm1(p / d)


def apply_T(nu: RadonMeasureSpec, model: LevyModel) -> RadonMeasureSpec:
    """Map atom masses through T; the diffuse part is left untouched."""
    if not nu.atoms or not is_bounded_variation(model):
        return nu
    masses = t_mass(nu.atom_masses, model)
    atoms = tuple(zip(nu.atom_levels.tolist(), masses.tolist()))
    return RadonMeasureSpec(atoms, nu.density, nu.window)


def total_mass(nu: RadonMeasureSpec, interval) -> float:
    lo, hi = float(interval[0]), float(interval[1])
    if lo > hi:
        raise DomainError(f"interval {interval!r} is reversed")
    if lo < nu.window[0] or hi > nu.window[1]:
        raise DomainError(f"interval {interval!r} is not inside window {nu.window!r}")
    atoms = math.fsum(p for a, p in nu.atoms if lo <= a <= hi)
    return atoms + nu.density_integral(lo, hi)


def check_T_dominated(nu: RadonMeasureSpec, model: LevyModel) -> bool:
    """Whether ``T(nu) <= nu`` holds atom by atom with an identical density."""
    mapped = apply_T(nu, model)
    if mapped.density is not nu.density:
        return False
    if not np.array_equal(mapped.atom_levels, nu.atom_levels):
        return False
    return bool(np.all(mapped.atom_masses <= nu.atom_masses))


def measure_from_config(cfg: dict) -> RadonMeasureSpec:
    """Build a measure from ``atoms``, ``density`` and ``window`` keys."""
    window = cfg.get("window", [-math.inf, math.inf])
    if len(window) != 2:
        raise InputError("window must be [lo, hi]")
    win = tuple(_parse_float(w) for w in window)
    atoms = cfg.get("atoms", [])
    for entry in atoms:
        if len(entry) != 2:
            raise InputError(f"atom entry {entry!r} is not a [level, mass] pair")
    density = PiecewiseConstant.from_pairs(cfg.get("density", []))
    return RadonMeasureSpec(tuple((float(a), float(p)) for a, p in atoms), density, win)


def _parse_float(v) -> float:
    if isinstance(v, str):
        return float(v.strip())  # accepts "inf", "-inf"
    return float(v)


def one_sided_measure(
    nu1: RadonMeasureSpec, eta: float, d_level: float, lo: Optional[float] = None
) -> RadonMeasureSpec:
    """``1_{z >= d} nu1(dz) + eta 1_{z < d} dz`` on ``[lo, nu1.window[1]]``."""
    if eta < 0:
        raise InputError("eta must be nonnegative")
    atoms = tuple((a, p) for a, p in nu1.atoms if a >= d_level)
    if not isinstance(nu1.density, PiecewiseConstant):
        raise InputError("one-sided structure needs a piecewise-constant density")
    dens = nu1.density
    start = lo if lo is not None else nu1.window[0]
    if not math.isfinite(start):
        start = -1e300
    bps = [start, d_level]
    vals = [eta, float(dens(d_level))]
    for b, v in zip(dens.breakpoints, dens.values):
        if b > d_level:
            bps.append(float(b))
            vals.append(float(v))
    window = (lo if lo is not None else nu1.window[0], nu1.window[1])
    if start >= d_level:
        bps, vals = bps[1:], vals[1:]
    return RadonMeasureSpec(atoms, PiecewiseConstant(bps, vals), window)
