"""Discrete measures, labeled samples, synthetic generators and file I/O."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

GENERATORS = ("two_moons", "gaussian_shift", "square_annulus")


class MeasureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud ``sum_i weights[i] * delta(points[i])``.

    Weights are renormalized on construction unless they already sum to one
    within 1e-14, which keeps uniform ``1/N`` weights exact; zero weights are
    kept (solvers prune them).
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if pts.shape[0] == 0:
            raise MeasureError("empty support")
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise MeasureError("dimension mismatch")
        if w.shape[0] != pts.shape[0]:
            raise MeasureError(
                f"{w.shape[0]} weights for {pts.shape[0]} points")
        if not np.all(np.isfinite(pts)):
            raise MeasureError("non-finite support point")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise MeasureError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise MeasureError("weights sum to zero")
        if abs(total - 1.0) > 1e-14:
            w = w / total
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteMeasure":
        return cls(np.asarray(d["points"], dtype=np.float64),
                   np.asarray(d["weights"], dtype=np.float64))


def make_empirical(points: Sequence) -> DiscreteMeasure:
    """Uniform empirical measure ``(1/N) sum_i delta(x_i)``."""
    try:
        pts = np.asarray(points, dtype=np.float64)
    except ValueError as exc:  # ragged nested sequences
        raise MeasureError("dimension mismatch") from exc
    if pts.size == 0 or pts.shape[0] == 0:
        raise MeasureError("empty support")
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise MeasureError("dimension mismatch")
    n = pts.shape[0]
    return DiscreteMeasure(pts, np.full(n, 1.0 / n))


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """A measure with binary labels ``f_D(x_i)`` and a domain tag."""

    measure: DiscreteMeasure
    labels: np.ndarray | None = None
    domain_tag: str = "source"

    def __post_init__(self):
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (self.measure.size,):
                raise MeasureError(
                    f"{lab.size} labels for {self.measure.size} points")
            if not np.all((lab == 0) | (lab == 1)):
                raise MeasureError("labels must be 0 or 1")
            lab = lab.astype(np.int64)
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def points(self) -> np.ndarray:
        return self.measure.points

    @property
    def weights(self) -> np.ndarray:
        return self.measure.weights

    @property
    def size(self) -> int:
        return self.measure.size

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    def require_labels(self) -> np.ndarray:
        if self.labels is None:
            raise MeasureError(f"sample {self.domain_tag!r} has no labels")
        return self.labels

    def subset(self, idx) -> "LabeledSample":
        idx = np.asarray(idx)
        pts = self.points[idx]
        labels = None if self.labels is None else self.labels[idx]
        return LabeledSample(make_empirical(pts), labels, self.domain_tag)


def labeled(points, labels=None, domain_tag="source") -> LabeledSample:
    return LabeledSample(make_empirical(points), labels, domain_tag)


@dataclass(frozen=True)
class DatasetConfig:
    """Parameters of a synthetic source/target pair.

    ``radii`` is ``(inner, outer)`` of the annulus around the unit square's
    center; the inner radius must clear the square's half-diagonal.
    """

    generator: str = "two_moons"
    n_points: int = 200
    seed: int = 0
    rotation_deg: float = 0.0
    shift_vector: tuple = (5.0, 0.0)
    radii: tuple = (0.75, 1.25)
    noise: float = 0.1
    n_target: int | None = None

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise MeasureError(f"unknown generator {self.generator!r}")
        if int(self.n_points) < 2:
            raise MeasureError("n_points must be >= 2")
        if self.n_target is not None and int(self.n_target) < 2:
            raise MeasureError("n_target must be >= 2")
        if self.generator == "square_annulus":
            inner, outer = self.radii
            if inner < math.sqrt(2) / 2 or outer <= inner:
                raise MeasureError(
                    f"invalid radii {tuple(self.radii)}: need "
                    "sqrt(2)/2 <= inner < outer")

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        d = dict(d)
        for key in ("shift_vector", "radii"):
            if key in d:
                d[key] = tuple(float(x) for x in d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        return {"generator": self.generator, "n_points": int(self.n_points),
                "seed": int(self.seed), "rotation_deg": float(self.rotation_deg),
                "shift_vector": [float(x) for x in self.shift_vector],
                "radii": [float(x) for x in self.radii],
                "noise": float(self.noise), "n_target": self.n_target}


def rotate(points: np.ndarray, degrees: float, center=None) -> np.ndarray:
    """Rotate 2-D points by ``degrees`` about ``center`` (default: centroid)."""
    pts = np.asarray(points, dtype=np.float64)
    if degrees == 0:
        return pts.copy()
    c = pts.mean(axis=0) if center is None else np.asarray(center, float)
    t = math.radians(degrees)
    R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    return (pts - c) @ R.T + c


def _moons(n, noise, rng):
    n_upper = n // 2
    n_lower = n - n_upper
    t_up = rng.uniform(0.0, math.pi, n_upper)
    t_lo = rng.uniform(0.0, math.pi, n_lower)
    upper = np.column_stack([np.cos(t_up), np.sin(t_up)])
    lower = np.column_stack([1.0 - np.cos(t_lo), 0.5 - np.sin(t_lo)])
    X = np.vstack([upper, lower]) + noise * rng.standard_normal((n, 2))
    y = np.r_[np.zeros(n_upper, int), np.ones(n_lower, int)]
    perm = rng.permutation(n)
    return X[perm], y[perm]


def generate(config: DatasetConfig) -> tuple[LabeledSample, LabeledSample]:
    """Draw a (source, target) pair; a pure function of ``config``.

    * ``two_moons``: target is the source rotated by ``rotation_deg`` about
      the source centroid, labels carried over.
    * ``gaussian_shift``: two equal-size unit-variance isotropic clusters
      (labels 0 and 1, centers (-1.5, 0) and (1.5, 0)); the target is an
      independent draw translated by ``shift_vector``.
    * ``square_annulus``: source uniform on [0, 1]^2, target uniform by area
      in the annulus around (0.5, 0.5); labels by the side of x = 0.5.
    """
    cfg = config
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed) & (2**64 - 1)))
    n = int(cfg.n_points)
    n_t = int(cfg.n_target) if cfg.n_target is not None else n

    if cfg.generator == "two_moons":
        X, y = _moons(n, cfg.noise, rng)
        Xt = rotate(X, cfg.rotation_deg)
        return labeled(X, y, "source"), labeled(Xt, y.copy(), "target")

    if cfg.generator == "gaussian_shift":
        shift = np.asarray(cfg.shift_vector, dtype=np.float64)
        centers = np.array([[-1.5, 0.0], [1.5, 0.0]])
        ys = rng.permutation(np.arange(n) % 2)
        Xs = centers[ys] + rng.standard_normal((n, 2))
        yt = rng.permutation(np.arange(n_t) % 2)
        Xt = centers[yt] + rng.standard_normal((n_t, 2)) + shift
        return labeled(Xs, ys, "source"), labeled(Xt, yt, "target")

    # square_annulus
    inner, outer = cfg.radii
    Xs = rng.uniform(0.0, 1.0, (n, 2))
    ys = (Xs[:, 0] > 0.5).astype(int)
    theta = rng.uniform(0.0, 2 * math.pi, n_t)
    r = np.sqrt(rng.uniform(inner ** 2, outer ** 2, n_t))
    Xt = 0.5 + np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    yt = (Xt[:, 0] > 0.5).astype(int)
    return labeled(Xs, ys, "source"), labeled(Xt, yt, "target")


# -- file I/O ---------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_csv(sample: LabeledSample | DiscreteMeasure, path) -> None:
    """Write ``x1..xd[,label]`` rows with 17 significant digits."""
    if isinstance(sample, DiscreteMeasure):
        sample = LabeledSample(sample)
    d = sample.measure.dim
    header = [f"x{k + 1}" for k in range(d)]
    if sample.labels is not None:
        header.append("label")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, p in enumerate(sample.points):
            row = [_fmt(v) for v in p]
            if sample.labels is not None:
                row.append(str(int(sample.labels[i])))
            w.writerow(row)


def load_csv(path, domain_tag: str = "source",
             has_label: bool | None = None) -> LabeledSample:
    """Read a sample written by :func:`save_csv`.

    With a header, a trailing ``label`` column is read as labels. Headerless
    files are unlabeled unless ``has_label=True``.
    """
    path = Path(path)
    with open(path, newline="") as fh:  # OSError propagates with the path
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise MeasureError(f"{path}: no data rows")
    start = 0
    first = [c.strip() for c in rows[0]]
    if any(c.startswith("x") or c == "label" for c in first):
        start = 1
        if has_label is None:
            has_label = first[-1] == "label"
    has_label = bool(has_label)
    points, labels = [], []
    width = None
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if width is None:
            width = len(row)
        if len(row) != width:
            raise MeasureError(f"{path}: row {lineno}: expected {width} fields, got {len(row)}")
        try:
            vals = [float(c) for c in (row[:-1] if has_label else row)]
            if has_label:
                lab = float(row[-1])
                if lab not in (0.0, 1.0):
                    raise ValueError(f"label {row[-1]!r} not in {{0,1}}")
                labels.append(int(lab))
        except ValueError as exc:
            raise MeasureError(f"{path}: row {lineno}: {exc}") from None
        points.append(vals)
    return labeled(np.array(points), np.array(labels) if has_label else None, domain_tag)


def measure_to_json(mu: DiscreteMeasure) -> str:
    return json.dumps(mu.to_dict())


def measure_from_json(text: str) -> DiscreteMeasure:
    return DiscreteMeasure.from_dict(json.loads(text))


def save_measure_json(mu: DiscreteMeasure, path) -> None:
    Path(path).write_text(measure_to_json(mu))


def load_measure_json(path) -> DiscreteMeasure:
    return measure_from_json(Path(path).read_text())


def as_measure(x) -> DiscreteMeasure:
    if isinstance(x, DiscreteMeasure):
        return x
    if isinstance(x, LabeledSample):
        return x.measure
    return make_empirical(x)
