"""Spectrally negative Levy models with exponential (Cramer-Lundberg type) jumps.

A model is ``X_t = gamma*t + sigma*B_t - (compound Poisson with Exp(mu) jumps)``.
Because the jumps have finite mean, ``gamma`` is taken to be the natural drift,
so the Laplace exponent is

    psi(theta) = gamma*theta + sigma^2 theta^2 / 2 - a*theta/(mu + theta).

For ``sigma == 0`` the model has bounded variation and ``gamma`` is the drift
``d`` appearing in ``W(0) = 1/d``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InputError

_PHI_ABS_TOL = 1e-12


@dataclass(frozen=True)
class FiniteActivityJumps:
    """Compound Poisson downward jumps with exponential magnitudes.

    rate:      jump intensity ``a``
    mean_size: mean jump magnitude ``1/mu``
    """

    rate: float
    mean_size: float

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise InputError(f"jump rate must be positive and finite, got {self.rate!r}")
        if not (self.mean_size > 0 and math.isfinite(self.mean_size)):
            raise InputError(f"jump mean_size must be positive and finite, got {self.mean_size!r}")

    @property
    def mu(self) -> float:
        return 1.0 / self.mean_size


@dataclass(frozen=True)
class LevyModel:
    """Parameters ``(sigma, gamma, jumps)`` of a spectrally negative Levy process."""

    sigma: float = 0.0
    gamma: float = 0.0
    jumps: Optional[FiniteActivityJumps] = None

    def __post_init__(self):
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise InputError(f"sigma must be a nonnegative finite number, got {self.sigma!r}")
        if not math.isfinite(self.gamma):
            raise InputError(f"gamma must be finite, got {self.gamma!r}")
        if self.sigma == 0 and not self.gamma > 0:
            # sigma = 0 and d <= 0 is a (negative of a) subordinator
            raise InputError(
                "a bounded-variation model needs a strictly positive drift d; "
                f"got gamma={self.gamma!r}"
            )

    @classmethod
    def brownian(cls, sigma: float, drift: float = 0.0) -> "LevyModel":
        return cls(sigma=sigma, gamma=drift)

    @classmethod
    def cramer_lundberg(cls, d: float, rate: float, mean_size: float) -> "LevyModel":
        return cls(sigma=0.0, gamma=d, jumps=FiniteActivityJumps(rate, mean_size))

    @classmethod
    def pure_drift(cls, d: float) -> "LevyModel":
        return cls(sigma=0.0, gamma=d)

    @property
    def family(self) -> str:
        """One of ``pure_drift``, ``brownian``, ``cramer_lundberg``, ``mixed``."""
        if self.sigma > 0:
            return "mixed" if self.jumps is not None else "brownian"
        return "cramer_lundberg" if self.jumps is not None else "pure_drift"


def is_bounded_variation(model: LevyModel) -> bool:
    # the only jump family supported has finite activity
    return model.sigma == 0


def drift_d(model: LevyModel) -> float:
    """Natural drift ``d`` of a bounded-variation model."""
    if not is_bounded_variation(model):
        raise DomainError("drift d is only defined for bounded-variation models (sigma = 0)")
    return model.gamma


def psi(model: LevyModel, theta):
    """Laplace exponent; accepts scalars or arrays of ``theta >= 0``."""
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0) or np.any(np.isnan(th)):
        raise DomainError("psi is defined for theta >= 0 only")
    out = _psi_ext(model, th)
    return float(out) if out.ndim == 0 else out


def _psi_ext(model: LevyModel, theta):
    """Rational continuation of psi, valid for any theta != -mu."""
    th = np.asarray(theta, dtype=float)
    out = model.gamma * th + 0.5 * model.sigma**2 * th * th
    if model.jumps is not None:
        mu = model.jumps.mu
        out = out - model.jumps.rate * th / (mu + th)
    return out


def psi_prime(model: LevyModel, theta):
    th = np.asarray(theta, dtype=float)
    out = model.gamma + model.sigma**2 * th
    if model.jumps is not None:
        mu = model.jumps.mu
        out = out - model.jumps.rate * mu / (mu + th) ** 2
    return float(out) if np.ndim(out) == 0 else out


def phi(model: LevyModel, q: float) -> float:
    """Right inverse ``Phi(q) = sup{lambda >= 0 : psi(lambda) = q}``.

    psi is convex with psi(0) = 0 <= q, so ``{psi <= q}`` is an interval
    containing 0 and bisection on ``[0, hi]`` lands on its right end.
    """
    if not q >= 0:
        raise DomainError(f"phi needs q >= 0, got {q!r}")
    if q == 0 and psi_prime(model, 0.0) >= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(2000):
        if _psi_ext(model, hi) > q:
            break
        lo, hi = hi, 2.0 * hi
    else:  # pragma: no cover - cannot happen for a valid model
        raise DomainError("could not bracket Phi(q); malformed model")
    for _ in range(200):
        if hi - lo <= _PHI_ABS_TOL * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if _psi_ext(model, mid) > q:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def laplace_roots(model: LevyModel, q: float) -> np.ndarray:
    """All real roots of ``psi(theta) = q`` (rational continuation), descending.

    The first entry is Phi(q).  Two roots for the Brownian and Cramer-Lundberg
    families, three for the mixed family, one for pure drift.
    """
    if not q >= 0:
        raise DomainError(f"q must be >= 0, got {q!r}")
    fam = model.family
    if fam == "pure_drift":
        return np.array([q / model.gamma])
    if fam == "brownian":
        s2 = model.sigma**2
        g = model.gamma
        disc = math.sqrt(g * g + 2.0 * q * s2)
        # roots of s2/2 th^2 + g th - q, product -2q/s2
        if g >= 0:
            r2 = -(g + disc) / s2
            r1 = (-2.0 * q / s2) / r2 if r2 != 0 else 0.0
        else:
            r1 = (-g + disc) / s2
            r2 = (-2.0 * q / s2) / r1 if r1 != 0 else 0.0
        return np.array([r1 + 0.0, r2 + 0.0])
    mu = model.jumps.mu
    a = model.jumps.rate
    if fam == "cramer_lundberg":
        d = model.gamma
        # (d th - q)(mu + th) - a th = d th^2 + B th - q mu
        B = d * mu - q - a
        disc = math.sqrt(B * B + 4.0 * d * q * mu)
        if B > 0:
            r2 = -(B + disc) / (2.0 * d)
            r1 = (-q * mu / d) / r2
        else:
            r1 = (-B + disc) / (2.0 * d)
            r2 = (-q * mu / d) / r1 if r1 != 0 else 0.0
        return np.array([r1 + 0.0, r2 + 0.0])
    # mixed: (s2/2 th^2 + g th - q)(mu + th) - a th
    s2h = 0.5 * model.sigma**2
    g = model.gamma
    coeffs = [s2h, s2h * mu + g, g * mu - q - a, -q * mu]
    if q == 0:
        quad = np.roots(coeffs[:3])
        roots = np.concatenate([[0.0], np.real(quad)])
    else:
        roots = np.real(np.roots(coeffs))
        for _ in range(3):  # Newton polish
            p = np.polyval(coeffs, roots)
            dp = np.polyval(np.polyder(coeffs), roots)
            roots = roots - np.where(dp != 0, p / np.where(dp != 0, dp, 1.0), 0.0)
    return np.sort(roots)[::-1]
