"""Total variation, KL, and an empirical audit of the W1 / TV / KL chain."""

from __future__ import annotations

import math

import numpy as np

from .cost import EUCLIDEAN, cost_matrix
from .measures import DiscreteMeasure, as_measure
from .ot_exact import solve_exact


class SupportMismatch(ValueError):
    pass


def _weights_on_shared_support(p, q):
    if isinstance(p, DiscreteMeasure) or isinstance(q, DiscreteMeasure):
        mp, mq = as_measure(p), as_measure(q)
        if mp.points.shape != mq.points.shape or not np.array_equal(mp.points, mq.points):
            raise SupportMismatch("measures must share the same support points in the same order")
        return mp.weights, mq.weights
    pw = np.asarray(p, dtype=np.float64)
    qw = np.asarray(q, dtype=np.float64)
    if pw.shape != qw.shape:
        raise SupportMismatch(f"support sizes differ: {pw.shape} vs {qw.shape}")
    return pw, qw


def l1_distance(p, q) -> float:
    pw, qw = _weights_on_shared_support(p, q)
    return float(np.abs(pw - qw).sum())


def total_variation(p, q) -> float:
    """Half-L1 total variation ``(1/2) sum_i |p_i - q_i|``."""
    return 0.5 * l1_distance(p, q)


def kl_divergence(p, q) -> float:
    """``sum_i p_i log(p_i / q_i)``; ``+inf`` when ``p`` is not dominated by ``q``."""
    pw, qw = _weights_on_shared_support(p, q)
    mask = pw > 0
    if np.any(qw[mask] <= 0):
        return math.inf
    return float(np.sum(pw[mask] * np.log(pw[mask] / qw[mask])))


def chain_row(points, p, q, costs=EUCLIDEAN, diam=None) -> dict | None:
    """All chain quantities and inequality flags for one pair, or ``None``
    when the KL divergence is infinite."""
    kl = kl_divergence(p, q)
    if not math.isfinite(kl):
        return None
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if diam is None:
        diam = float(cost_matrix(pts, pts, costs).max())
    mu = DiscreteMeasure(pts, p)
    nu = DiscreteMeasure(pts, q)
    w = solve_exact(mu, nu, costs).cost_value
    l1 = l1_distance(p, q)
    tv = 0.5 * l1
    chain_rhs = math.sqrt(2.0 * diam * kl)
    tol = 1e-9
    return {
        "w1": w, "diam": diam, "tv_half": tv, "l1": l1, "kl": kl,
        "diam_tv_half": diam * tv, "diam_l1": diam * l1,
        "pinsker_tv": math.sqrt(kl / 2.0),
        "diam_pinsker": diam * math.sqrt(kl / 2.0),
        "chain_rhs": chain_rhs,
        "w1_le_diam_l1": w <= diam * l1 + tol,
        "w1_le_diam_tv_half": w <= diam * tv + tol,
        "pinsker_holds": tv <= math.sqrt(kl / 2.0) + tol,
        "printed_chain_half": (w <= diam * tv + tol) and (diam * tv <= chain_rhs + tol),
        "printed_chain_l1": (w <= diam * l1 + tol) and (diam * l1 <= chain_rhs + tol),
        "printed_right_half": diam * tv <= chain_rhs + tol,
        "printed_right_l1": diam * l1 <= chain_rhs + tol,
    }


def ckp_chain_audit(pairs, points, costs=EUCLIDEAN):
    """Audit ``W1 <= diam * TV <= sqrt(2 diam KL)`` under both TV conventions.

    Parameters
    ----------
    pairs : iterable of (p, q)
        Weight vectors on the shared support ``points``.

    Returns
    -------
    rows : list of dict
    summary : dict
        Pass rates of each inequality and the number of skipped
        (infinite-KL) pairs.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    diam = float(cost_matrix(pts, pts, costs).max())
    rows, skipped = [], 0
    for p, q in pairs:
        r = chain_row(pts, p, q, costs, diam)
        if r is None:
            skipped += 1
        else:
            rows.append(r)
    flags = ("w1_le_diam_l1", "w1_le_diam_tv_half", "pinsker_holds",
             "printed_chain_half", "printed_chain_l1",
             "printed_right_half", "printed_right_l1")
    summary = {"n_pairs": len(rows), "skipped_infinite_kl": skipped, "diam": diam}
    for f in flags:
        summary[f"rate_{f}"] = (float(np.mean([r[f] for r in rows])) if rows else float("nan"))
    return rows, summary


def random_pairs(n_pairs: int, n_support: int, seed: int = 0, concentration: float = 1.0):
    """Dirichlet weight pairs with strictly positive ``q``."""
    rng = np.random.default_rng(seed)
    for _ in range(n_pairs):
        p = rng.dirichlet(np.full(n_support, concentration))
        q = rng.dirichlet(np.full(n_support, concentration))
        q = np.maximum(q, 1e-12)
        yield p, q / q.sum()
