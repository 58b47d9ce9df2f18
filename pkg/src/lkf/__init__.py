"""Generalized scale functions of spectrally negative Levy processes killed by additive functionals."""
from .levy import FiniteActivityJumps, LevyModel, drift_d, is_bounded_variation, phi, psi
from .measures import RadonMeasureSpec, SignedMeasureSpec, PiecewiseConstant, apply_T, total_mass
from .scale import ScaleFunction, z_q, w_q

__version__ = "0.1.0"
