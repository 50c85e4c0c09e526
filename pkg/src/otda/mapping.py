"""Barycentric mapping of source samples through a coupling."""

from __future__ import annotations

import numpy as np

from .measures import DiscreteMeasure, LabeledSample, as_measure
from .ot_entropic import EntropicConfig, GroupRegConfig, sinkhorn, sinkhorn_group
from .ot_exact import Coupling, solve_exact

SOLVERS = ("exact", "sinkhorn", "sinkhorn_group")


class MappingError(ValueError):
    pass


def barycentric_map(coupling, target_points) -> np.ndarray:
    """``diag(gamma 1)^-1 gamma X_T``: each source row sent to the
    coupling-weighted mean of the target points."""
    G = coupling.matrix if isinstance(coupling, Coupling) else np.asarray(coupling, float)
    Y = np.asarray(target_points, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if G.shape[1] != Y.shape[0]:
        raise MappingError(
            f"coupling has {G.shape[1]} columns for {Y.shape[0]} target points")
    mass = G.sum(axis=1)
    bad = np.flatnonzero(mass <= 0)
    if bad.size:
        raise MappingError(f"unmatched source point {int(bad[0])} (zero row sum)")
    # normalizing rows first keeps permutation plans bit-exact
    return (G / mass[:, None]) @ Y


def transport(source, target, costs=None, solver="exact", entropic=None,
              group=None, source_labels=None):
    """Dispatch to one of the coupling solvers."""
    if solver == "exact":
        return solve_exact(source, target, costs)
    if solver == "sinkhorn":
        return sinkhorn(source, target, costs, entropic or EntropicConfig())
    if solver == "sinkhorn_group":
        if not isinstance(source, LabeledSample):
            source = LabeledSample(as_measure(source), source_labels)
        return sinkhorn_group(source, target, costs, entropic or EntropicConfig(),
                              group or GroupRegConfig())
    raise MappingError(f"unknown solver {solver!r}; expected one of {SOLVERS}")


def adapt(source_labeled: LabeledSample, target, costs=None, solver_choice="exact",
          solver_cfgs: dict | None = None) -> LabeledSample:
    """Map labeled source points into the target domain.

    ``solver_cfgs`` may hold ``entropic`` (:class:`EntropicConfig`) and
    ``group`` (:class:`GroupRegConfig`).
    """
    cfgs = solver_cfgs or {}
    nu = as_measure(target)
    sol = transport(source_labeled, nu, costs, solver_choice,
                    cfgs.get("entropic"), cfgs.get("group"))
    mapped = barycentric_map(sol.coupling, nu.points)
    return LabeledSample(DiscreteMeasure(mapped, source_labeled.weights),
                         source_labeled.labels, source_labeled.domain_tag)
