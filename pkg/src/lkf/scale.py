"""Closed-form q-scale functions W^(q) and Z^(q).

For every supported family ``1/(psi(theta) - q) = N(theta) / (lead * prod(theta - r_i))``
with ``N(theta) = mu + theta`` when there are jumps and ``N = 1`` otherwise.
Inverting term by term gives ``W(x) = F[r_1, ..., r_k] / lead``, the divided
difference over the roots of ``F(r) = N(r) exp(r x)``.  Divided differences
are evaluated in a form that stays accurate when two roots merge (q = 0 with
psi'(0) = 0), which is the common driftless Brownian case.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, UnsupportedModelError
from .levy import LevyModel, drift_d, is_bounded_variation, laplace_roots, phi, psi, psi_prime

_ROOT_CHECK_TOL = 1e-8


_NEAR = 0.25
# Taylor coefficients of sinh(t)/t in t^2; truncation error below 1e-16 for |t| < 0.25
_SINHC_COEF = [1.0 / math.factorial(2 * k + 1) for k in range(6)][::-1]


def _sinhc(t):
    t2 = t * t
    acc = _SINHC_COEF[0]
    for c in _SINHC_COEF[1:]:
        acc = acc * t2 + c
    return acc


def _exp_divdiff(a: float, b: float, x):
    """``(exp(a x) - exp(b x)) / (a - b)`` for ``a >= b`` and ``x >= 0``, confluent-safe.

    The direct difference loses only ``eps / (a - b)`` in absolute terms, so it
    is used unless the roots are close relative to the range of ``x``.
    """
    m = 0.5 * (a + b)
    h = 0.5 * (a - b)
    with np.errstate(over="ignore", invalid="ignore"):
        if h == 0.0:
            return x * np.exp(m * x) if m else x.copy()
        xmax = np.max(x) if np.size(x) else 0.0
        if h * xmax < _NEAR:
            return x * np.exp(m * x) * _sinhc(h * x)
        return (np.exp(a * x) - np.exp(b * x)) / (a - b)


def _phi1(t):
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        return np.where(t == 0.0, 1.0, np.expm1(t) / np.where(t == 0.0, 1.0, t))


@dataclass(frozen=True)
class ScaleFunction:
    """The q-scale function of ``model``.

    ``w_at_zero`` is 0 for unbounded variation and ``1/d`` otherwise.
    """

    model: LevyModel
    q: float = 0.0
    w_at_zero: float = field(init=False)
    roots: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.q >= 0 and math.isfinite(self.q)):
            raise DomainError(f"q must be finite and >= 0, got {self.q!r}")
        if self.model.family not in ("pure_drift", "brownian", "cramer_lundberg", "mixed"):
            raise UnsupportedModelError(f"no closed form for family {self.model.family!r}")
        roots = laplace_roots(self.model, self.q)
        ref = phi(self.model, self.q)
        if abs(roots[0] - ref) > _ROOT_CHECK_TOL * max(1.0, ref):
            raise UnsupportedModelError(
                f"closed-form root {roots[0]!r} disagrees with Phi(q)={ref!r}"
            )
        object.__setattr__(self, "roots", roots)
        w0 = 1.0 / drift_d(self.model) if is_bounded_variation(self.model) else 0.0
        object.__setattr__(self, "w_at_zero", w0)

    @property
    def phi(self) -> float:
        return float(self.roots[0])

    @property
    def _lead(self) -> float:
        return 0.5 * self.model.sigma**2 if self.model.sigma > 0 else self.model.gamma

    def _numer(self, r):
        return self.model.jumps.mu + r if self.model.jumps is not None else 1.0

    def _F2(self, a: float, b: float, x):
        # (N e^{rx})[a, b] by the Leibniz rule
        out = self._numer(a) * _exp_divdiff(a, b, x)
        if self.model.jumps is not None:
            out = out + np.exp(b * x)
        return out

    def _w_positive(self, x):
        r = self.roots
        if r.size == 1:
            return np.exp(r[0] * x) / self._lead
        if r.size == 2:
            return self._F2(r[0], r[1], x) / self._lead
        # r0 - r2 > mu, so the outer division is well conditioned
        return (self._F2(r[0], r[1], x) - self._F2(r[1], r[2], x)) / (r[0] - r[2]) / self._lead

    def w(self, x):
        """W^(q)(x), zero on the negative half-line; scalar or array."""
        xa = np.asarray(x, dtype=float)
        if xa.ndim == 0:
            if xa > 0:
                return float(self._w_positive(np.array([float(xa)]))[0])
            return self.w_at_zero if xa == 0 else 0.0
        val = self._w_positive(np.maximum(xa, 0.0))
        out = np.where(xa > 0, val, 0.0)
        if self.w_at_zero:
            out[xa == 0] = self.w_at_zero
        return out

    def w_bar(self, x):
        """``int_0^x W^(q)``; closed form by residues, available for q > 0."""
        if self.q == 0:
            raise DomainError("w_bar closed form is implemented for q > 0 only")
        xa = np.asarray(x, dtype=float)
        out = np.zeros_like(xa)
        pos = xa > 0
        xp = xa[pos]
        acc = np.zeros_like(xp)
        for r in self.roots:
            acc += xp * _phi1(r * xp) / psi_prime(self.model, r)
        out[pos] = acc
        return float(out) if out.ndim == 0 else out

    def z(self, x):
        """Z^(q)(x) = 1 + q * int_0^x W^(q)."""
        xa = np.asarray(x, dtype=float)
        if self.q == 0:
            out = np.ones_like(xa)
        else:
            out = 1.0 + self.q * np.asarray(self.w_bar(xa))
        return float(out) if np.ndim(out) == 0 else out

    def with_q(self, q: float) -> "ScaleFunction":
        return ScaleFunction(self.model, q)


def w_q(sf: ScaleFunction, x):
    return sf.w(x)


def z_q(sf: ScaleFunction, x):
    return sf.z(x)


def verify_laplace(sf: ScaleFunction, theta: float, upper: float) -> float:
    """Residual of the defining Laplace transform, by adaptive quadrature.

    Raises DomainError when ``theta <= Phi(q)`` or when the truncation tail
    bound ``exp((Phi(q) - theta) * upper)`` exceeds 1e-10.
    """
    if not theta > sf.phi:
        raise DomainError(f"theta={theta!r} must exceed Phi(q)={sf.phi!r}")
    if math.exp((sf.phi - theta) * upper) >= 1e-10:
        raise DomainError(f"upper={upper!r} too small for a 1e-10 truncation tail")
    # panels keep quad away from the near-zero tail where it wastes evaluations
    edges = np.linspace(0.0, upper, int(max(4, math.ceil(upper))) + 1)
    total = math.fsum(
        integrate.quad(lambda u: math.exp(-theta * u) * sf.w(u), lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        for lo, hi in zip(edges[:-1], edges[1:])
    )
    return abs(total - 1.0 / (psi(sf.model, theta) - sf.q))


def shift_residual(sf: ScaleFunction, lam: float, x: float, d_level: float, grid) -> float:
    """Trapezoid residual of ``W^(q+l)(u) - W^(q)(u) = l int W^(q+l)(x-z) W^(q)(z-d) dz``."""
    if x < d_level:
        raise DomainError("shift_residual needs x >= d_level")
    if lam == 0:
        return 0.0
    sf_l = sf.with_q(sf.q + lam)
    nodes = np.asarray(grid.nodes, dtype=float)
    z = np.unique(np.concatenate([[d_level, x], nodes[(nodes > d_level) & (nodes < x)]]))
    integrand = sf_l.w(x - z) * sf.w(z - d_level)
    integral = np.trapezoid(integrand, z) if hasattr(np, "trapezoid") else np.trapz(integrand, z)
    lhs = sf_l.w(x - d_level) - sf.w(x - d_level)
    return float(abs(lhs - lam * integral))
