"""Exact discrete optimal transport (W1 when the ground cost is a metric)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import BACKEND, STATUS_OPTIMAL, kernels
from .cost import EUCLIDEAN, CostSpec, cost_matrix
from .measures import as_measure

DEFAULT_MAX_VARS = 250_000


class SolverError(RuntimeError):
    """Numerical failure inside a transport solver."""


class CapExceededError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Coupling:
    """Transport plan ``gamma`` with its row and column marginal weights."""

    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def marginal_violation(self) -> float:
        """L1 violation over rows plus columns."""
        return float(np.abs(self.matrix.sum(axis=1) - self.row_marginal).sum()
                     + np.abs(self.matrix.sum(axis=0) - self.col_marginal).sum())

    def max_marginal_error(self) -> float:
        return float(max(np.abs(self.matrix.sum(axis=1) - self.row_marginal).max(),
                         np.abs(self.matrix.sum(axis=0) - self.col_marginal).max()))


@dataclass(frozen=True, eq=False)
class OtSolution:
    coupling: Coupling
    cost_value: float
    solver_meta: dict = field(default_factory=dict)

    @property
    def matrix(self) -> np.ndarray:
        return self.coupling.matrix

    def to_dict(self) -> dict:
        return {"w1": self.cost_value,
                "coupling": self.coupling.matrix.tolist(),
                **{k: v for k, v in self.solver_meta.items()
                   if k not in ("f", "g")}}


def resolve_costs(source, target, costs) -> np.ndarray:
    """Cost matrix from a :class:`CostSpec` or a precomputed array."""
    if costs is None:
        costs = EUCLIDEAN
    if isinstance(costs, CostSpec):
        return cost_matrix(source, target, costs)
    C = np.asarray(costs, dtype=np.float64)
    a, b = as_measure(source), as_measure(target)
    if C.shape != (a.size, b.size):
        raise ValueError(f"cost matrix shape {C.shape} != {(a.size, b.size)}")
    if not np.all(np.isfinite(C)) or np.any(C < 0):
        raise ValueError("cost entries must be finite and nonnegative")
    return C


def transport_lp(a, b, C, max_vars=DEFAULT_MAX_VARS):
    """Solve the transportation LP on raw weight vectors.

    Zero weights are pruned before the solve and reinserted as zero rows or
    columns. Returns ``(plan, f, g, n_pivots)`` with dual potentials ``f, g``
    (NaN on pruned entries).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    rows = np.flatnonzero(a > 0)
    cols = np.flatnonzero(b > 0)
    if max_vars is not None and rows.size * cols.size > max_vars:
        raise CapExceededError(
            f"{rows.size}x{cols.size} transport problem exceeds the exact "
            f"solver cap of {max_vars} variables; use the entropic solver "
            "(sinkhorn) or raise max_vars")
    a_p, b_p = a[rows], b[cols]
    # equalize total mass to the last ulp so the LP is exactly balanced
    a_p = a_p / a_p.sum()
    b_p = b_p / b_p.sum()
    sub = np.ascontiguousarray(C[np.ix_(rows, cols)])
    plan_p, f_p, g_p, n_piv, status = kernels.network_simplex(a_p, b_p, sub)
    if status != STATUS_OPTIMAL:
        raise SolverError("network simplex hit its pivot cap")
    plan = np.zeros(C.shape)
    plan[np.ix_(rows, cols)] = plan_p
    f = np.full(a.shape, np.nan)
    g = np.full(b.shape, np.nan)
    f[rows] = f_p
    g[cols] = g_p
    return plan, f, g, n_piv


def solve_exact(source, target, costs=None,
                max_vars: int | None = DEFAULT_MAX_VARS) -> OtSolution:
    """Optimal coupling of two discrete measures.

    Parameters
    ----------
    source, target : DiscreteMeasure, LabeledSample or point array
    costs : CostSpec or ndarray, optional
        Ground cost (default euclidean) or a precomputed ``(N_S, N_T)``
        matrix.
    max_vars : int or None
        Upper bound on ``N_S * N_T`` after pruning zero weights.

    Returns
    -------
    OtSolution
        ``cost_value`` is ``<C, gamma>_F``; ``solver_meta`` carries the dual
        potentials and the dual objective.
    """
    mu, nu = as_measure(source), as_measure(target)
    C = resolve_costs(mu, nu, costs)
    plan, f, g, n_piv = transport_lp(mu.weights, nu.weights, C, max_vars)
    value = float(np.sum(plan * C))
    dual = float(np.nansum(f * mu.weights) + np.nansum(g * nu.weights))
    meta = {"solver": "network_simplex", "backend": BACKEND,
            "iterations": int(n_piv), "status": "optimal",
            "dual_value": dual, "f": f, "g": g}
    return OtSolution(Coupling(plan, mu.weights, nu.weights), value, meta)


def w1(source, target, costs=None, max_vars: int | None = DEFAULT_MAX_VARS) -> float:
    """Exact transport cost; W1 for a metric ground cost."""
    return solve_exact(source, target, costs, max_vars).cost_value
