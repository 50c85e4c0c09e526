"""Simple hypothesis classes, empirical errors and joint-error estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import DiscreteMeasure, LabeledSample, make_empirical

KINDS = ("knn1", "linear")


class LearnerError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """A trained classifier ``h: R^d -> {0, 1}``.

    ``kind`` is ``'nearest_neighbor'`` (with ``k``, training points and
    labels) or ``'linear_threshold'`` (with ``weights`` and ``bias``).
    For ``k > 1`` the neighbors vote with ``train_weights`` when given.
    """

    kind: str
    k: int = 1
    train_points: np.ndarray | None = None
    train_labels: np.ndarray | None = None
    weights: np.ndarray | None = None
    bias: float = 0.0
    train_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "nearest_neighbor":
            if self.k < 1 or self.k % 2 == 0:
                raise LearnerError("k must be a positive odd integer")
        elif self.kind == "linear_threshold":
            if not np.all(np.isfinite(self.weights)) or not np.isfinite(self.bias):
                raise LearnerError("linear weights must be finite")
        else:
            raise LearnerError(f"unknown hypothesis kind {self.kind!r}")

    @property
    def class_id(self) -> str:
        return f"knn{self.k}" if self.kind == "nearest_neighbor" else "linear"

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if self.kind == "linear_threshold":
            return (X @ self.weights + self.bias > 0).astype(np.int64)
        P, y = self.train_points, self.train_labels
        out = np.empty(X.shape[0], dtype=np.int64)
        chunk = max(1, 2_000_000 // max(P.shape[0], 1))
        for s in range(0, X.shape[0], chunk):
            d = X[s:s + chunk, None, :] - P[None, :, :]
            D = np.einsum("ijk,ijk->ij", d, d)
            if self.k == 1:
                # argmin returns the lowest index among exact ties
                out[s:s + chunk] = y[np.argmin(D, axis=1)]
            else:
                idx = np.argsort(D, axis=1, kind="stable")[:, :self.k]
                w = (np.ones(P.shape[0]) if self.train_weights is None
                     else self.train_weights)[idx]
                ones = (w * y[idx]).sum(axis=1)
                zeros = (w * (1 - y[idx])).sum(axis=1)
                # a tied weighted vote falls back to the nearest neighbor
                vote = np.where(ones == zeros, y[idx[:, 0]], ones > zeros)
                out[s:s + chunk] = vote.astype(np.int64)
        return out


@dataclass(frozen=True)
class ErrorReport:
    value: float
    n_points: int
    loss: str = "zero_one"


def _kind(kind: str) -> tuple[str, int]:
    if kind in ("knn1", "nearest_neighbor"):
        return "nearest_neighbor", 1
    if kind.startswith("knn") and kind[3:].isdigit():
        return "nearest_neighbor", int(kind[3:])
    if kind in ("linear", "linear_threshold"):
        return "linear_threshold", 0
    raise LearnerError(f"unknown hypothesis class {kind!r}; expected knn<k> or linear")


def fit_linear(X, y, sample_weight=None, ridge: float = 1e-6) -> Hypothesis:
    """Weighted ridge least squares on +-1 targets, thresholded at zero."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if np.unique(y[sample_weight > 0] if sample_weight is not None else y).size < 2:
        raise LearnerError("linear_threshold needs both classes present")
    w = np.ones(X.shape[0]) if sample_weight is None else np.asarray(sample_weight, float)
    w = w / w.sum()
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    t = 2.0 * y - 1.0
    G = A.T @ (A * w[:, None])
    reg = ridge * np.eye(A.shape[1])
    reg[-1, -1] = 0.0
    theta = np.linalg.solve(G + reg, A.T @ (w * t))
    return Hypothesis("linear_threshold", weights=theta[:-1], bias=float(theta[-1]))


def train(sample: LabeledSample, kind: str = "knn1", sample_weight=None) -> Hypothesis:
    """Fit a hypothesis of the given class to a labeled sample."""
    y = sample.require_labels()
    name, k = _kind(kind)
    if name == "nearest_neighbor":
        tw = None
        if k > 1:
            tw = np.array(sample.weights if sample_weight is None else sample_weight,
                          dtype=np.float64)
        return Hypothesis(name, k=k, train_points=np.array(sample.points),
                          train_labels=np.array(y), train_weights=tw)
    sw = sample.weights if sample_weight is None else sample_weight
    return fit_linear(sample.points, y, sw)


def error(h: Hypothesis, sample: LabeledSample) -> ErrorReport:
    """Weighted zero-one disagreement with the sample's labels."""
    y = sample.require_labels()
    if h.kind == "linear_threshold" and sample.measure.dim != h.weights.size:
        raise LearnerError("dimension mismatch")
    if h.kind == "nearest_neighbor" and sample.measure.dim != h.train_points.shape[1]:
        raise LearnerError("dimension mismatch")
    wrong = h.predict(sample.points) != y
    # exactly rounded, so uniform weights give exact fractions like 1.0
    value = math.fsum(sample.weights[wrong])
    return ErrorReport(min(max(value, 0.0), 1.0), sample.size)


def combined_error(h, target_sample, source_sample, alpha: float) -> float:
    """``alpha * err_T(h) + (1 - alpha) * err_S(h)``."""
    if not 0.0 <= alpha <= 1.0:
        raise LearnerError(f"alpha={alpha} outside [0, 1]")
    return alpha * error(h, target_sample).value + (1.0 - alpha) * error(h, source_sample).value


def _check_alphas(alphas, n):
    a = np.asarray(alphas, dtype=np.float64)
    if a.size != n:
        raise LearnerError(f"{a.size} weights for {n} sources")
    if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-12:
        raise LearnerError("source weights must be nonnegative and sum to 1")
    return a


def weighted_multisource_error(h, source_samples, alphas) -> float:
    """``sum_j alpha_j err_{S_j}(h)``."""
    a = _check_alphas(alphas, len(source_samples))
    return float(sum(aj * error(h, s).value for aj, s in zip(a, source_samples)))


def pooled(samples, weights=None) -> LabeledSample:
    """Concatenate labeled samples; ``weights[j]`` is sample ``j``'s total mass."""
    pts = np.vstack([s.points for s in samples])
    labels = np.concatenate([s.require_labels() for s in samples])
    if weights is None:
        return LabeledSample(make_empirical(pts), labels, "pooled")
    w = np.concatenate([wj * s.weights for wj, s in zip(weights, samples)])
    return LabeledSample(DiscreteMeasure(pts, w), labels, "pooled")


def train_combined(target_sample, source_sample, alpha: float, kind="linear") -> Hypothesis:
    """Minimizer (within the class) of the combined error at ``alpha``.

    For the linear class this is the weighted least-squares fit with mass
    ``alpha`` on the target points and ``1 - alpha`` on the source points.
    """
    if not 0.0 <= alpha <= 1.0:
        raise LearnerError(f"alpha={alpha} outside [0, 1]")
    if alpha == 1.0:
        return train(target_sample, kind)
    if alpha == 0.0:
        return train(source_sample, kind)
    return train(pooled([target_sample, source_sample], [alpha, 1.0 - alpha]), kind)


def train_multisource(source_samples, alphas, kind="linear") -> Hypothesis:
    a = _check_alphas(alphas, len(source_samples))
    keep = [j for j in range(len(source_samples)) if a[j] > 0]
    return train(pooled([source_samples[j] for j in keep], a[keep]), kind)


def estimate_lambda_joint(source_labeled, target_labeled, kind="knn1",
                          n_restarts: int = 32, seed: int = 0,
                          return_candidates: bool = False):
    """Class-restricted estimate of ``min_h err_S(h) + err_T(h)``.

    Candidates: the fit on the pooled sample, the source-only and
    target-only fits, and (linear class) seeded random perturbations of the
    pooled fit. Returns ``(lambda_hat, h)``, plus the list of
    ``(hypothesis, value)`` candidates when ``return_candidates`` is set.
    """
    source_labeled.require_labels()
    target_labeled.require_labels()
    name, _ = _kind(kind)
    candidates = []
    pool = pooled([source_labeled, target_labeled], [0.5, 0.5])
    for sample in (pool, source_labeled, target_labeled):
        try:
            candidates.append(train(sample, kind))
        except LearnerError:
            continue
    if name == "linear_threshold" and candidates:
        rng = np.random.default_rng(seed)
        base = candidates[0]
        scale = np.linalg.norm(np.r_[base.weights, base.bias]) or 1.0
        for _ in range(n_restarts):
            dw = rng.standard_normal(base.weights.size + 1) * 0.25 * scale
            candidates.append(Hypothesis("linear_threshold", weights=base.weights + dw[:-1],
                                         bias=base.bias + float(dw[-1])))
    if not candidates:
        raise LearnerError("no hypothesis could be trained for lambda estimation")
    values = [error(h, source_labeled).value + error(h, target_labeled).value
              for h in candidates]
    best = int(np.argmin(values))
    if return_candidates:
        return float(values[best]), candidates[best], list(zip(candidates, values))
    return float(values[best]), candidates[best]
