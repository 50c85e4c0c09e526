"""Fixed-support W1 barycenters and the multi-source adaptation pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.special import logsumexp

from .cost import EUCLIDEAN, CostSpec, cost_matrix
from .mapping import barycentric_map
from .measures import DiscreteMeasure, LabeledSample, as_measure
from .ot_entropic import EntropicConfig
from .ot_exact import SolverError, solve_exact


@dataclass(frozen=True)
class BarycenterConfig:
    """Barycenter problem settings.

    Parameters
    ----------
    weights_a : sequence of float or None
        Nonnegative input weights summing to one; uniform when ``None``.
    support : array or DiscreteMeasure or None
        Fixed support; ``None`` uses the union of the input supports.
    solver : {'exact', 'entropic'}
    entropic : EntropicConfig
        Used by the entropic solver (iterative Bregman projections).
    max_outer_iters, tolerance : int, float
        Iteration cap and stopping threshold (L1 change of the barycenter
        weights) for the entropic solver.
    """

    weights_a: tuple | None = None
    support: object = None
    solver: str = "exact"
    entropic: EntropicConfig = field(default_factory=lambda: EntropicConfig(epsilon_reg=1e-2))
    max_outer_iters: int = 5000
    tolerance: float = 1e-9
    costs: CostSpec = EUCLIDEAN

    def __post_init__(self):
        if self.solver not in ("exact", "entropic"):
            raise ValueError(f"unknown barycenter solver {self.solver!r}")
        if self.weights_a is not None:
            a = np.asarray(self.weights_a, dtype=np.float64)
            if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-12:
                raise ValueError("barycenter weights must be >= 0 and sum to 1")


def union_support(measures) -> np.ndarray:
    """Distinct support points of all measures, in first-seen order."""
    pts = np.vstack([as_measure(m).points for m in measures])
    _, idx = np.unique(pts, axis=0, return_index=True)
    return pts[np.sort(idx)]


def _support_points(cfg, inputs):
    if cfg.support is None or (isinstance(cfg.support, str) and cfg.support == "auto"):
        return union_support(inputs)
    if isinstance(cfg.support, (DiscreteMeasure, LabeledSample)):
        return as_measure(cfg.support).points
    S = np.asarray(cfg.support, dtype=np.float64)
    return S[:, None] if S.ndim == 1 else S


def _heavy_input(S, inputs, a):
    """Weights on ``S`` of an input carrying at least half the total weight.

    For a metric cost such an input is itself a minimizer: for any ``nu``,
    ``sum_k a_k W(mu_i, mu_k) <= (1 - a_i) W(mu_i, nu) + sum_{k != i} a_k W(nu, mu_k)``
    by the triangle inequality, and ``1 - a_i <= a_i``. Returns ``None``
    when no input qualifies or its support is not contained in ``S``.
    """
    i = int(np.argmax(a))
    if a[i] < 0.5:
        return None
    index = {tuple(p): k for k, p in enumerate(S)}
    w = np.zeros(S.shape[0])
    mu = inputs[i]
    for p, m in zip(mu.points, mu.weights):
        if m == 0:
            continue
        k = index.get(tuple(p))
        if k is None:
            return None
        w[k] += m
    return w


def _barycenter_lp(S, inputs, a, spec):
    """Joint LP: min sum_i a_i <C_i, P_i> s.t. P_i 1 = w, P_i^T 1 = b_i."""
    K = S.shape[0]
    rhs = []
    n_vars = K
    offsets = []
    for mu in inputs:
        cols = np.flatnonzero(mu.weights > 0)
        offsets.append((n_vars, cols))
        n_vars += K * cols.size
    A_parts = []
    c = np.zeros(n_vars)
    row = 0
    for i, (mu, (off, cols)) in enumerate(zip(inputs, offsets)):
        n = cols.size
        C = cost_matrix(S, mu.points[cols], spec)
        c[off:off + K * n] = a[i] * C.ravel()
        # row sums equal w
        r = np.repeat(np.arange(K), n) + row
        A_parts.append((r, off + np.arange(K * n), np.ones(K * n)))
        A_parts.append((row + np.arange(K), np.arange(K), -np.ones(K)))
        rhs.append(np.zeros(K))
        row += K
        # column sums equal b_i
        r = np.tile(np.arange(n), K) + row
        A_parts.append((r, off + np.arange(K * n), np.ones(K * n)))
        rhs.append(mu.weights[cols] / mu.weights[cols].sum())
        row += n
    # mass normalization pins w to the simplex
    A_parts.append((np.full(K, row), np.arange(K), np.ones(K)))
    rhs.append(np.ones(1))
    row += 1
    rr = np.concatenate([p[0] for p in A_parts])
    cc = np.concatenate([p[1] for p in A_parts])
    vv = np.concatenate([p[2] for p in A_parts])
    A = sp.csr_matrix((vv, (rr, cc)), shape=(row, n_vars))
    res = linprog(c, A_eq=A, b_eq=np.concatenate(rhs), bounds=(0, None),
                  method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise SolverError(f"barycenter LP failed: {res.message}")
    w = np.clip(res.x[:K], 0.0, None)
    return w / w.sum()


def _barycenter_ibp(S, inputs, a, spec, cfg):
    """Iterative Bregman projections in the log domain."""
    eps = cfg.entropic.epsilon_reg
    logK, log_b = [], []
    for mu in inputs:
        cols = np.flatnonzero(mu.weights > 0)
        logK.append(-cost_matrix(S, mu.points[cols], spec) / eps)
        log_b.append(np.log(mu.weights[cols] / mu.weights[cols].sum()))
    K = S.shape[0]
    log_u = [np.zeros(K) for _ in inputs]
    log_p = np.full(K, -np.log(K))
    for it in range(int(cfg.max_outer_iters)):
        log_Kv = []
        for i in range(len(inputs)):
            log_v = log_b[i] - logsumexp(logK[i] + log_u[i][:, None], axis=0)
            log_Kv.append(logsumexp(logK[i] + log_v[None, :], axis=1))
        new = sum(a[i] * log_Kv[i] for i in range(len(inputs)))
        new -= logsumexp(new)
        for i in range(len(inputs)):
            log_u[i] = new - log_Kv[i]
        change = float(np.abs(np.exp(new) - np.exp(log_p)).sum())
        log_p = new
        if change <= cfg.tolerance:
            break
    return np.exp(log_p)


def barycenter_objective(candidate, inputs, weights_a, costs=EUCLIDEAN) -> float:
    """``sum_i a_i W1(candidate, mu_i)`` with the exact solver."""
    return float(sum(w * solve_exact(candidate, mu, costs, max_vars=None).cost_value
                     for w, mu in zip(weights_a, inputs)))


def barycenter(inputs, cfg: BarycenterConfig | None = None):
    """Weighted W1 barycenter on a fixed support.

    Returns
    -------
    (DiscreteMeasure, float)
        Barycenter weights on the support and the achieved
        ``sum_i a_i W1(barycenter, mu_i)``, evaluated with the exact solver.
    """
    cfg = cfg or BarycenterConfig()
    inputs = [as_measure(m) for m in inputs]
    if not inputs:
        raise ValueError("at least one input measure is required")
    a = (np.full(len(inputs), 1.0 / len(inputs)) if cfg.weights_a is None
         else np.asarray(cfg.weights_a, dtype=np.float64))
    if a.size != len(inputs):
        raise ValueError(f"{a.size} weights for {len(inputs)} inputs")
    S = _support_points(cfg, inputs)
    for mu in inputs:
        if mu.dim != S.shape[1]:
            raise ValueError(f"dimension mismatch: {mu.dim} vs support {S.shape[1]}")
    # sq_euclidean is not a metric, so the shortcut does not apply to it
    metric = cfg.costs.kind != "sq_euclidean"
    heavy = _heavy_input(S, inputs, a) if metric else None
    if cfg.solver == "exact" and heavy is not None:
        w = heavy
    elif cfg.solver == "exact":
        w = _barycenter_lp(S, inputs, a, cfg.costs)
    else:
        w = _barycenter_ibp(S, inputs, a, cfg.costs, cfg)
    bary = DiscreteMeasure(S, w)
    return bary, barycenter_objective(bary, inputs, a, cfg.costs)


def _prune(mu: DiscreteMeasure) -> DiscreteMeasure:
    keep = mu.weights > 0
    return DiscreteMeasure(mu.points[keep], mu.weights[keep])


def multisource_adapt(sources, target, alphas, costs=EUCLIDEAN,
                      cfg: BarycenterConfig | None = None):
    """Barycenter-then-transport adaptation from several labeled sources.

    The intermediate measure minimizes
    ``(1/N) sum_j alpha_j W1(mu_j, mu) + W1(mu, mu_T)``, solved as one
    weighted barycenter of ``{mu_j: alpha_j / N} + {mu_T: 1}`` (renormalized).
    Each source is mapped to it and on to the target by composing the two
    barycentric maps.

    Returns
    -------
    (LabeledSample, dict)
        Mapped source points (labels kept, weights ``alpha_j / n_j``) and a
        report of the transport terms, including the barycenter itself.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    sources = list(sources)
    N = len(sources)
    if N == 0:
        raise ValueError("at least one source is required")
    if alphas.size != N or np.any(alphas < 0) or abs(alphas.sum() - 1.0) > 1e-12:
        raise ValueError("alphas must be nonnegative, one per source, and sum to 1")
    cfg = cfg or BarycenterConfig(costs=costs)
    mu_T = as_measure(target)
    family = [s.measure for s in sources] + [mu_T]
    fam_w = np.r_[alphas / N, 1.0]
    fam_w = fam_w / fam_w.sum()
    bcfg = BarycenterConfig(weights_a=tuple(fam_w), support=cfg.support,
                            solver=cfg.solver, entropic=cfg.entropic,
                            max_outer_iters=cfg.max_outer_iters,
                            tolerance=cfg.tolerance, costs=costs)
    bary, bary_obj = barycenter(family, bcfg)
    core = _prune(bary)

    to_target = solve_exact(core, mu_T, costs, max_vars=None)
    core_mapped = barycentric_map(to_target.coupling, mu_T.points)
    w1_bary_target = to_target.cost_value

    mapped, labels, weights = [], [], []
    w1_src_bary, w1_src_target = [], []
    for j, src in enumerate(sources):
        sol = solve_exact(src.measure, core, costs, max_vars=None)
        w1_src_bary.append(sol.cost_value)
        mapped.append(barycentric_map(sol.coupling, core_mapped))
        w1_src_target.append(solve_exact(src.measure, mu_T, costs, max_vars=None).cost_value)
        labels.append(src.labels if src.labels is not None else np.zeros(src.size, int))
        weights.append(alphas[j] * src.weights)
    has_labels = all(s.labels is not None for s in sources)
    out = LabeledSample(DiscreteMeasure(np.vstack(mapped), np.concatenate(weights)),
                        np.concatenate(labels) if has_labels else None, "mapped")
    src_bary = float(np.dot(alphas, w1_src_bary))
    report = {
        "n_sources": N,
        "alphas": alphas.tolist(),
        "sum_alpha_w1_source_target": float(np.dot(alphas, w1_src_target)),
        "per_source_w1_target": w1_src_target,
        "per_source_w1_barycenter": w1_src_bary,
        "w1_barycenter_target": w1_bary_target,
        "sum_alpha_w1_source_barycenter": src_bary,
        "eq1_objective": src_bary / N + w1_bary_target,
        "triangle_rhs": src_bary + N * w1_bary_target,
        "barycenter_objective": bary_obj,
        "barycenter_support_size": int(core.size),
        "barycenter": bary.to_dict(),
    }
    return out, report
