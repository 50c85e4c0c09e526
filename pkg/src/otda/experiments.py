"""Seeded experiment cells and the config-driven grid runner.

A cell is a pure function of ``(settings, seed)`` returning a JSON-ready
dict. The runner fans cells out over a thread pool (``OTDA_THREADS`` caps the
worker count) and writes results ordered by ``(grid index, seed)``, so the
bytes on disk never depend on scheduling.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bounds import (ConcentrationParams, bound_combined, bound_multisource,
                     bound_unsupervised)
from .cost import CostSpec
from .learners import (combined_error, error, estimate_lambda_joint, train,
                       train_combined, train_multisource)
from .mapping import adapt
from .measures import DatasetConfig, LabeledSample, generate, labeled, rotate
from .ot_entropic import EntropicConfig

SCHEMA_VERSION = 1
THEOREM_ALIASES = {"unsup_thm2": "unsup_thm2", "thm2": "unsup_thm2", "unsup": "unsup_thm2",
                   "combined_thm3": "combined_thm3", "thm3": "combined_thm3",
                   "combined": "combined_thm3",
                   "multi_thm4": "multi_thm4", "thm4": "multi_thm4", "multi": "multi_thm4"}
TOP_LEVEL_KEYS = {"schema", "name", "description", "theorem", "settings", "grid", "seeds"}

COMMON_DEFAULTS = {
    "generator": "two_moons", "n_points": 200, "noise": 0.1, "rotation_deg": 30.0,
    "shift_vector": [5.0, 0.0], "hypothesis_class": "knn1", "lambda_class": None,
    "w1_solver": "exact", "epsilon_reg": 1e-2, "delta": 0.05, "varsigma_prime": 1.0,
    "kernel_bound_K": 1.0, "cost": "euclidean", "sigma": None,
}
DEFAULTS = {
    "unsup_thm2": {},
    "combined_thm3": {"rotation_deg": 20.0, "alpha": 0.5, "beta": 0.1, "n_eval": 1000,
                      "hypothesis_class": "knn3", "best_class": None},
    "multi_thm4": {"source_rotations": [10.0, 60.0], "alphas": [0.5, 0.5], "betas": None,
                   "hypothesis_class": "knn1"},
}


class ConfigError(ValueError):
    """Schema violation; ``keys`` lists the offending entries."""

    def __init__(self, message, keys=()):
        super().__init__(message)
        self.keys = list(keys)


# -- domain sampling ----------------------------------------------------------

def _base_sample(generator: str, n: int, seed: int, noise: float):
    if generator not in ("two_moons", "gaussian_shift"):
        raise ConfigError(f"generator {generator!r} not supported by bound experiments",
                          ["generator"])
    src, _ = generate(DatasetConfig(generator, n_points=n, seed=seed, noise=noise))
    return np.array(src.points), np.array(src.labels)


def draw_domains(sizes, angles, seed: int, generator="two_moons", noise=0.1,
                 shifts=None) -> list[LabeledSample]:
    """Independent labeled domains from one seeded draw.

    ``sum(sizes)`` points are drawn from the base distribution and cut into
    consecutive blocks; block ``j`` is rotated by ``angles[j]`` degrees about
    the centroid of the whole draw and translated by ``shifts[j]``.
    """
    X, y = _base_sample(generator, int(sum(sizes)), seed, noise)
    center = X.mean(axis=0)
    out, start = [], 0
    for j, (m, ang) in enumerate(zip(sizes, angles)):
        Xj = rotate(X[start:start + m], float(ang), center)
        if shifts is not None and shifts[j] is not None:
            Xj = Xj + np.asarray(shifts[j], dtype=np.float64)
        out.append(labeled(Xj, y[start:start + m], "target" if j == 0 else "source"))
        start += m
    return out


def _params(s) -> ConcentrationParams:
    return ConcentrationParams(s["delta"], s["varsigma_prime"], s["kernel_bound_K"])


def _costs(s) -> CostSpec:
    return CostSpec(kind=s["cost"], sigma=s["sigma"], kernel_bound=s["kernel_bound_K"])


def _shift(s):
    return s["shift_vector"] if s["generator"] == "gaussian_shift" else None


# -- cells ----------------------------------------------------------------------

def unsup_cell(s: dict, seed: int) -> dict:
    """Two-domain unsupervised bound: source-trained ``h`` against the rhs."""
    n = int(s["n_points"])
    target, source = draw_domains([n, n], [s["rotation_deg"], 0.0], seed,
                                  s["generator"], s["noise"], [_shift(s), None])
    kind = s["hypothesis_class"]
    h = train(source, kind)
    lam, _ = estimate_lambda_joint(source, target, s["lambda_class"] or kind)
    rep = bound_unsupervised(h, source, target, _costs(s), _params(s), lam,
                             w1_solver=s["w1_solver"],
                             entropic=EntropicConfig(epsilon_reg=s["epsilon_reg"]))
    return rep.to_dict()


def _combined_samples(s, seed):
    n, beta = int(s["n_points"]), float(s["beta"])
    n_t = int(round(beta * n))
    n_s = n - n_t
    if n_t < 2 or n_s < 2:
        raise ConfigError("beta * n_points leaves fewer than 2 points in a domain",
                          ["beta", "n_points"])
    target, source = draw_domains([n_t + int(s["n_eval"]), n_s],
                                  [s["rotation_deg"], 0.0], seed,
                                  s["generator"], s["noise"], [_shift(s), None])
    t_train = labeled(target.points[:n_t], target.labels[:n_t], "target")
    t_eval = labeled(target.points[n_t:], target.labels[n_t:], "target")
    return source, t_train, t_eval


def combined_cell(s: dict, seed: int) -> dict:
    """Combined-error bound at one ``alpha``, ``beta``."""
    source, t_train, t_eval = _combined_samples(s, seed)
    kind = s["hypothesis_class"]
    alpha = float(s["alpha"])
    h = train_combined(t_train, source, alpha, kind)
    lam, _ = estimate_lambda_joint(source, t_train, s["lambda_class"] or kind)
    rep = bound_combined(h, (source, t_train, t_eval), alpha, float(s["beta"]),
                         _costs(s), _params(s), lam, best_kind=s["best_class"] or kind)
    out = rep.to_dict()
    out["combined_training_error"] = combined_error(h, t_train, source, alpha)
    return out


def combined_alpha_selection(s: dict, seed: int, alphas=(0.0, 0.25, 0.5, 0.75, 0.9)) -> dict:
    """Pick ``alpha*`` minimizing the empirical combined error over a grid and
    compare its held-out target error with the target-only fit."""
    source, t_train, t_eval = _combined_samples(s, seed)
    kind = s["hypothesis_class"]
    rows = []
    for a in alphas:
        h = train_combined(t_train, source, float(a), kind)
        rows.append({"alpha": float(a),
                     "combined_error": combined_error(h, t_train, source, float(a)),
                     "target_error": error(h, t_eval).value})
    best = min(range(len(rows)), key=lambda i: (rows[i]["combined_error"], i))
    h_t = train(t_train, kind)
    return {"rows": rows, "alpha_star": rows[best]["alpha"],
            "target_error_alpha_star": rows[best]["target_error"],
            "target_only_error": error(h_t, t_eval).value}


def _multi_samples(s, seed):
    n = int(s["n_points"])
    rots = [float(r) for r in s["source_rotations"]]
    doms = draw_domains([n] * (len(rots) + 1), [0.0] + rots, seed,
                        s["generator"], s["noise"])
    return doms[1:], doms[0]


def _betas(s, sources):
    if s.get("betas") is not None:
        return np.asarray(s["betas"], dtype=np.float64)
    sizes = np.array([src.size for src in sources], dtype=np.float64)
    return sizes / sizes.sum()


def multi_cell(s: dict, seed: int) -> dict:
    """Multi-source bound at one weighting ``alphas``."""
    sources, target = _multi_samples(s, seed)
    kind = s["hypothesis_class"]
    lam_kind = s["lambda_class"] or kind
    h = train_multisource(sources, s["alphas"], kind)
    lams = [estimate_lambda_joint(src, target, lam_kind)[0] for src in sources]
    rep = bound_multisource(h, sources, s["alphas"], _betas(s, sources), target,
                            _costs(s), _params(s), lams, kind=kind)
    return rep.to_dict()


def multi_alpha_sweep(s: dict, seed: int,
                      weightings=((0.9, 0.1), (0.5, 0.5), (0.1, 0.9))) -> dict:
    """rhs of the multi-source bound for each weighting on one seeded draw."""
    sources, target = _multi_samples(s, seed)
    kind = s["hypothesis_class"]
    lam_kind = s["lambda_class"] or kind
    lams = [estimate_lambda_joint(src, target, lam_kind)[0] for src in sources]
    h_star = train(target, kind)
    best_err = error(h_star, target).value
    betas = _betas(s, sources)
    rows = []
    for w in weightings:
        h = train_multisource(sources, w, kind)
        rep = bound_multisource(h, sources, w, betas, target, _costs(s), _params(s),
                                lams, target_best_error=best_err, kind=kind)
        rows.append({"alphas": list(map(float, w)), "rhs_total": rep.rhs_total,
                     "empirical_target_error": rep.empirical_target_error})
    best = min(range(len(rows)), key=lambda i: (rows[i]["rhs_total"], i))
    return {"rows": rows, "argmin_alphas": rows[best]["alphas"]}


def adapt_vs_unmapped(seed: int, n: int = 200, rotation_deg: float = 30.0,
                      noise: float = 0.1, solver: str = "exact") -> dict:
    """Target accuracy of 1-NN trained on mapped versus raw source points."""
    target, source = draw_domains([n, n], [rotation_deg, 0.0], seed, "two_moons", noise)
    mapped = adapt(source, target.measure, solver_choice=solver)
    acc_raw = 1.0 - error(train(source, "knn1"), target).value
    acc_map = 1.0 - error(train(mapped, "knn1"), target).value
    return {"accuracy_unmapped": acc_raw, "accuracy_mapped": acc_map}


CELLS = {"unsup_thm2": unsup_cell, "combined_thm3": combined_cell, "multi_thm4": multi_cell}


# -- config handling ------------------------------------------------------------

def resolve_config(raw: dict, theorem: str | None = None) -> dict:
    """Validate a config dict and fill defaults.

    Raises :class:`ConfigError` naming every offending key.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", ["<root>"])
    bad = sorted(k for k in raw if k not in TOP_LEVEL_KEYS)
    if raw.get("schema") != SCHEMA_VERSION:
        bad.append("schema")
    thm_raw = raw.get("theorem", theorem)
    if thm_raw not in THEOREM_ALIASES:
        bad.append("theorem")
        thm = None
    else:
        thm = THEOREM_ALIASES[thm_raw]
        if theorem is not None and THEOREM_ALIASES.get(theorem) != thm:
            bad.append("theorem")
    allowed = dict(COMMON_DEFAULTS)
    if thm is not None:
        allowed.update(DEFAULTS[thm])
    settings = raw.get("settings", {})
    grid = raw.get("grid", {})
    if not isinstance(settings, dict):
        bad.append("settings")
        settings = {}
    if not isinstance(grid, dict):
        bad.append("grid")
        grid = {}
    bad += [f"settings.{k}" for k in sorted(settings) if k not in allowed]
    for k in sorted(grid):
        if k not in allowed:
            bad.append(f"grid.{k}")
        elif not isinstance(grid[k], list) or not grid[k]:
            bad.append(f"grid.{k}")
    seeds = raw.get("seeds", [0])
    if (not isinstance(seeds, list) or not seeds
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in seeds)):
        bad.append("seeds")
    if bad:
        raise ConfigError("invalid config keys: " + ", ".join(bad), bad)
    resolved = {k: settings.get(k, v) for k, v in sorted(allowed.items())}
    return {"schema": SCHEMA_VERSION, "name": raw.get("name", ""), "theorem": thm,
            "settings": resolved, "grid": {k: grid[k] for k in sorted(grid)},
            "seeds": list(seeds)}


def load_config(path, theorem: str | None = None) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})", ["<root>"]) from exc
    return resolve_config(raw, theorem)


def grid_points(resolved: dict) -> list[dict]:
    keys = list(resolved["grid"])
    return [dict(zip(keys, combo))
            for combo in itertools.product(*(resolved["grid"][k] for k in keys))]


def run_cell(resolved: dict, point: dict, seed: int) -> dict:
    settings = {**resolved["settings"], **point}
    return CELLS[resolved["theorem"]](settings, seed)


def dumps(obj, compact: bool = False) -> str:
    """Canonical JSON: sorted keys, shortest round-trip floats."""
    if compact:
        return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def n_workers() -> int:
    env = os.environ.get("OTDA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


def _flatten(rep: dict) -> dict:
    row = {"rhs_total": rep["rhs_total"],
           "empirical_target_error": rep["empirical_target_error"],
           "bound_holds": rep["bound_holds"]}
    for k, v in rep["terms"].items():
        row[f"term_{k}"] = v
    for j, src in enumerate(rep["per_source"]):
        for k, v in src.items():
            row[f"source{j}_{k}"] = v
    return row


def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_csv_value(x) for x in v)
    return "" if v is None else str(v)


def run_experiment(resolved: dict, out_dir) -> dict:
    """Run every (grid point, seed) cell and write the reports.

    Writes ``reports/g{index:03d}_s{seed}.json`` per cell and
    ``aggregate.csv`` under ``out_dir``; returns the paths written.
    """
    out = Path(out_dir)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    points = grid_points(resolved)
    jobs = [(gi, p, seed) for gi, p in enumerate(points) for seed in resolved["seeds"]]
    with ThreadPoolExecutor(max_workers=n_workers()) as pool:
        results = list(pool.map(lambda j: run_cell(resolved, j[1], j[2]), jobs))
    paths, rows = [], []
    for (gi, p, seed), rep in zip(jobs, results):
        doc = {"schema": SCHEMA_VERSION, "theorem": resolved["theorem"],
               "grid_index": gi, "grid_point": p, "seed": seed,
               "config": {**resolved, "settings": {**resolved["settings"], **p}},
               "report": rep}
        path = out / "reports" / f"g{gi:03d}_s{seed}.json"
        path.write_text(dumps(doc), encoding="utf-8")
        paths.append(str(path))
        rows.append({"grid_index": gi, "seed": seed, **p, **_flatten(rep)})
    header = []
    for r in rows:
        header += [k for k in r if k not in header]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([_csv_value(r.get(k)) for k in header])
    agg = out / "aggregate.csv"
    agg.write_text(buf.getvalue(), encoding="utf-8")
    return {"reports": paths, "aggregate": str(agg)}
