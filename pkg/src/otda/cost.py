"""Ground costs between supports and cost-matrix construction.

The kernel-induced cost is the RKHS distance
``c(x, y) = ||phi(x) - phi(y)|| = sqrt(k(x,x) - 2 k(x,y) + k(y,y))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import as_measure

COST_KINDS = ("euclidean", "sq_euclidean", "kernel_induced")


class CostError(ValueError):
    pass


@dataclass(frozen=True)
class CostSpec:
    """Ground cost descriptor.

    Parameters
    ----------
    kind : {'euclidean', 'sq_euclidean', 'kernel_induced'}
    sigma : float, optional
        Gaussian kernel bandwidth, required for ``kernel_induced``.
    kernel_bound : float
        ``K`` with ``0 <= k(x, y) <= K``; fixed to 1 for the Gaussian kernel.
    """

    kind: str = "euclidean"
    sigma: float | None = None
    kernel_bound: float = 1.0

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise CostError(f"unknown cost kind {self.kind!r}")
        if self.kind == "kernel_induced":
            if self.sigma is None or not self.sigma > 0:
                raise CostError("kernel_induced cost needs a gaussian sigma > 0")
            if self.kernel_bound != 1.0:
                raise CostError("gaussian kernel has kernel_bound 1")
        if not self.kernel_bound > 0:
            raise CostError("kernel_bound must be > 0")

    @classmethod
    def from_dict(cls, d: dict | None) -> "CostSpec":
        if not d:
            return cls()
        unknown = set(d) - {"kind", "sigma", "kernel_bound"}
        if unknown:
            raise CostError(f"unknown cost keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "kernel_bound": self.kernel_bound}
        if self.sigma is not None:
            d["sigma"] = self.sigma
        return d


EUCLIDEAN = CostSpec("euclidean")


def _points(x) -> np.ndarray:
    if isinstance(x, np.ndarray):
        return x[:, None] if x.ndim == 1 else x
    return as_measure(x).points


def _sq_dists(X, Y):
    # exact-zero diagonal for repeated points; the Gram-matrix trick is not
    d = X[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


def gaussian_kernel(X, Y, sigma: float) -> np.ndarray:
    return np.exp(-_sq_dists(X, Y) / (2.0 * sigma ** 2))


def cost_matrix(source, target, spec: CostSpec = EUCLIDEAN) -> np.ndarray:
    """``C[i, j] = c(x_i, y_j)`` for the supports of ``source`` and ``target``.

    Accepts measures, labeled samples or raw point arrays.
    """
    X, Y = _points(source), _points(target)
    if X.shape[1] != Y.shape[1]:
        raise CostError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if spec.kind == "euclidean":
        return np.sqrt(_sq_dists(X, Y))
    if spec.kind == "sq_euclidean":
        return _sq_dists(X, Y)
    # k(x,x) = k(y,y) = 1 for the gaussian kernel
    kxy = gaussian_kernel(X, Y, spec.sigma)
    sq = 2.0 - 2.0 * kxy
    np.maximum(sq, 0.0, out=sq)
    return np.sqrt(sq)


def kernel_cost(x, y, sigma: float) -> float:
    """Scalar RKHS distance under a gaussian kernel, written out term by term."""
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    k = lambda u, v: math.exp(-float(np.sum((u - v) ** 2)) / (2 * sigma ** 2))
    return math.sqrt(max(k(x, x) - 2 * k(x, y) + k(y, y), 0.0))


def diameter(measure_a, measure_b, spec: CostSpec = EUCLIDEAN) -> float:
    """Largest pairwise cost over the union of both supports."""
    Z = np.vstack([_points(measure_a), _points(measure_b)])
    return float(cost_matrix(Z, Z, spec).max())
