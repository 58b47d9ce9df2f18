"""Residuals of structural identities satisfied by the W family."""
from __future__ import annotations

import numpy as np

from ..errors import InputError
from ..measures import as_signed
from ..scale import ScaleFunction
from .grid import GridSpec
from .sweep import ScaleFamily, solve_w_rows
from .tables import ScaleTable


def integrate_on_nodes(nodes: np.ndarray, values: np.ndarray, measure, lo: float, hi: float) -> float:
    """``int_{[lo, hi]} F d(measure)`` for F known at the nodes.

    Atoms are taken exactly; on each cell the density mass multiplies the
    average of F at the two ends.
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    signed = as_signed(measure)
    total = 0.0
    for part, sign in ((signed.plus, 1.0), (signed.minus, -1.0)):
        if part.is_zero():
            continue
        for a, p in part.atoms:
            if lo <= a <= hi:
                i = int(np.searchsorted(nodes, a))
                if i >= nodes.size or nodes[i] != a:
                    raise InputError(f"atom {a!r} is not a node")
                total += sign * p * values[i]
        if part.has_density():
            i0 = int(np.searchsorted(nodes, lo))
            i1 = int(np.searchsorted(nodes, hi, side="right")) - 1
            for k in range(i0, i1):
                mass = part.density_integral(nodes[k], nodes[k + 1])
                if mass:
                    total += sign * mass * 0.5 * (values[k] + values[k + 1])
    return total


def _column(table, y: float, nodes: np.ndarray) -> np.ndarray:
    """``u -> W(u, y)`` on ``nodes`` (zero left of y)."""
    if isinstance(table, ScaleFamily):
        table = table.column(y)
    if not isinstance(table, ScaleTable):
        raise InputError("expected a ScaleTable or ScaleFamily")
    out = np.zeros(nodes.size)
    mask = nodes >= table.base
    sub = nodes[mask]
    if not np.array_equal(sub, table.nodes[: sub.size]) or sub.size != table.nodes.size:
        raise InputError("tables are not on the same grid")
    out[mask] = table.values
    return out


def measure_comparison_residual(table1: ScaleFamily, table2, nu1, nu2, x: float, y: float) -> float:
    """Residual of ``W1(x,y) - W2(x,y) = int_{[y,x]} W1(x,u) W2(u,y) (nu1 - nu2)(du)``.

    ``table1`` is the family of nu1 (its rows give u -> W1(x, u));
    ``table2`` is a table or family of nu2 containing base ``y``.
    """
    if not isinstance(table1, ScaleFamily):
        raise InputError("table1 must be a ScaleFamily")
    nodes = table1.nodes
    if isinstance(table2, ScaleFamily) and not np.array_equal(table2.nodes, nodes):
        raise InputError("tables are not on the same grid")
    w1_row = table1.row(x)
    w2_col = _column(table2, y, nodes)
    integrand = w1_row * w2_col
    integral = integrate_on_nodes(nodes, integrand, nu1, y, x) - integrate_on_nodes(nodes, integrand, nu2, y, x)
    lhs = table1.at(x, y) - w2_col[int(np.searchsorted(nodes, x))]
    return float(abs(lhs - integral))


def alternative_form_residual(sf: ScaleFunction, nu_T, x: float, y: float, grid: GridSpec) -> float:
    """Residual of ``W_nu(x,y) = W(x-y) + int_{[y,x]} W_nu(x,z) W(z-y) nu(dz)``."""
    if x < y:
        raise InputError("need x >= y")
    g = grid.from_base(y)
    if as_signed(nu_T).is_zero():
        return 0.0
    row = solve_w_rows(sf, nu_T, g, [x])[0]
    integrand = row * sf.w(g.nodes - y)
    integral = integrate_on_nodes(g.nodes, integrand, nu_T, y, x)
    return float(abs(row[0] - sf.w(x - y) - integral))
