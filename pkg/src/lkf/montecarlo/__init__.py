"""Monte Carlo estimators for the killed exit identities."""
from ..levy import is_bounded_variation
from .bv import simulate_bv_exit, simulate_bv_paths, simulate_bv_suite
from .common import CensoringError, MCConfig, MCResult, PathState, block_rng, worker_count
from .poisson import ConvergenceReport, poissonization_experiment, sample_poisson_atoms
from .ubv import simulate_ubv_exit, simulate_ubv_suite


def simulate_resolvent(model, nu, q, x, c, b, f, mc: MCConfig) -> MCResult:
    """Estimate ``E_x int_0^{exit} exp(-q t - A_t) f(X_t) dt``."""
    if is_bounded_variation(model):
        return simulate_bv_suite(model, nu, q, x, c, b, f, mc)["resolvent"]
    return simulate_ubv_suite(model, nu, q, x, c, b, f, mc)["resolvent"]


def simulate_suite(model, nu, q, x, c, b, f, mc: MCConfig) -> dict:
    """Up, down and resolvent estimates from one set of paths."""
    if is_bounded_variation(model):
        return simulate_bv_suite(model, nu, q, x, c, b, f, mc)
    return simulate_ubv_suite(model, nu, q, x, c, b, f, mc)


__all__ = [
    "CensoringError",
    "ConvergenceReport",
    "MCConfig",
    "MCResult",
    "PathState",
    "block_rng",
    "poissonization_experiment",
    "sample_poisson_atoms",
    "simulate_bv_exit",
    "simulate_bv_paths",
    "simulate_bv_suite",
    "simulate_resolvent",
    "simulate_suite",
    "simulate_ubv_exit",
    "simulate_ubv_suite",
    "worker_count",
]
