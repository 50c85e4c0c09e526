"""Command-line interface.

Exit codes: 0 on success, 1 on usage or input errors, 2 on numerical
failure (a partial report is still written when one exists).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .barycenter import BarycenterConfig, barycenter, multisource_adapt
from .bounds import BoundError, ConcentrationParams, concentration_decay_experiment
from .cost import CostError, CostSpec
from .divergences import ckp_chain_audit, random_pairs
from .learners import LearnerError, estimate_lambda_joint
from .mapping import MappingError, adapt
from .measures import (DatasetConfig, LabeledSample, MeasureError,
                       generate, load_csv, load_measure_json, save_csv)
from .ot_entropic import EntropicConfig, GroupRegConfig, sinkhorn, sinkhorn_group
from .ot_exact import CapExceededError, SolverError, solve_exact

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# -- I/O helpers --------------------------------------------------------------

def _load_sample(path, tag="source") -> LabeledSample:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"input file not found: {path}")
    if p.suffix == ".json":
        return LabeledSample(load_measure_json(p), None, tag)
    return load_csv(p, tag)


def _write_text(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _write_json(obj, out, compact=False) -> None:
    _write_text(ex.dumps(obj, compact), out)


def _write_rows(rows, out) -> None:
    header = []
    for r in rows:
        header += [k for k in r if k not in header]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(r[k]) if isinstance(r.get(k), float) else r.get(k, "") for k in header])
    _write_text(buf.getvalue(), out)


def _cost_spec(args) -> CostSpec:
    return CostSpec(kind=args.cost, sigma=args.sigma)


def _entropic(args) -> EntropicConfig:
    log = None
    if args.log_domain:
        log = True
    elif args.no_log:
        log = False
    return EntropicConfig(epsilon_reg=args.eps, max_iters=args.max_iters,
                          tolerance=args.tol, log_domain=log)


def _solution_report(sol, source, target) -> dict:
    rep = sol.to_dict()
    rep["marginal_violation"] = sol.coupling.marginal_violation()
    rep["n_source"], rep["n_target"] = source.size, target.size
    return rep


def _check_converged(rep):
    if rep.get("status") == "max_iters":
        raise NumericalFailure(
            f"solver did not converge: marginal violation {rep['marginal_violation']:.3g} "
            "above tolerance at the iteration cap", rep)


# -- subcommands ----------------------------------------------------------------

def cmd_gen(args):
    cfg = DatasetConfig(args.generator, n_points=args.n, seed=args.seed,
                        rotation_deg=args.rotation, noise=args.noise,
                        shift_vector=tuple(args.shift), radii=tuple(args.radii),
                        n_target=args.n_target)
    src, tgt = generate(cfg)
    save_csv(src, args.out_src)
    save_csv(tgt, args.out_tgt)


def cmd_ot(args):
    src = _load_sample(args.source, "source")
    tgt = _load_sample(args.target, "target")
    costs = _cost_spec(args)
    if args.ot_command == "solve":
        sol = solve_exact(src.measure, tgt.measure, costs, max_vars=args.max_vars)
        _write_json(_solution_report(sol, src, tgt), args.out, compact=True)
        return
    cfg = _entropic(args)
    if args.eta > 0:
        if not src.is_labeled:
            raise UsageError("--eta needs a labeled source file")
        sol = sinkhorn_group(src, tgt.measure, costs, cfg, GroupRegConfig(eta=args.eta))
    else:
        sol = sinkhorn(src.measure, tgt.measure, costs, cfg)
    rep = _solution_report(sol, src, tgt)
    _write_json(rep, args.out, compact=True)
    _check_converged(rep)


def cmd_adapt(args):
    src = _load_sample(args.source, "source")
    tgt = _load_sample(args.target, "target")
    cfgs = {"entropic": EntropicConfig(epsilon_reg=args.eps),
            "group": GroupRegConfig(eta=args.eta)}
    mapped = adapt(src, tgt.measure, _cost_spec(args), args.solver, cfgs)
    save_csv(mapped, args.out)


def cmd_adapt_multi(args):
    sources = [_load_sample(p, "source") for p in args.sources]
    tgt = _load_sample(args.target, "target")
    alphas = args.alphas or [1.0 / len(sources)] * len(sources)
    mapped, report = multisource_adapt(sources, tgt.measure, alphas, _cost_spec(args))
    save_csv(mapped, args.out)
    if args.report:
        _write_json(report, args.report)


def _parse_weights(weights, n):
    if weights is None:
        return None
    if len(weights) != n:
        raise UsageError(f"--weights has {len(weights)} entries for {n} inputs")
    return tuple(weights)


def cmd_barycenter(args):
    inputs = [_load_sample(p).measure for p in args.inputs]
    if args.grid in (None, "auto"):
        support = None
    else:
        support = _load_sample(args.grid).points
    cfg = BarycenterConfig(weights_a=_parse_weights(args.weights, len(inputs)),
                           support=support, solver=args.solver,
                           entropic=EntropicConfig(epsilon_reg=args.eps),
                           costs=_cost_spec(args))
    bary, obj = barycenter(inputs, cfg)
    _write_json({"barycenter": bary.to_dict(), "objective": obj,
                 "weights_a": list(cfg.weights_a) if cfg.weights_a else None,
                 "solver": args.solver}, args.out)


def cmd_lambda(args):
    src = _load_sample(args.source, "source")
    tgt = _load_sample(args.target, "target")
    value, h = estimate_lambda_joint(src, tgt, args.hclass, seed=args.seed)
    _write_json({"lambda_hat": value, "lambda_label": "lambda_hat (class-restricted)",
                 "hypothesis_class": h.class_id}, args.out)


def cmd_bound(args):
    if not Path(args.config).exists():
        raise UsageError(f"config file not found: {args.config}")
    resolved = ex.load_config(args.config, args.theorem)
    seed = args.seed if args.seed is not None else resolved["seeds"][0]
    rep = ex.run_cell(resolved, {}, seed)
    _write_json({"schema": ex.SCHEMA_VERSION, "theorem": resolved["theorem"], "seed": seed,
                 "config": resolved, "report": rep}, args.out)


def cmd_divergence(args):
    grid = np.linspace(0.0, 1.0, args.grid)
    rows, summary = ckp_chain_audit(random_pairs(args.pairs, args.grid, args.seed), grid)
    _write_rows(rows, args.out)
    if args.summary:
        _write_json(summary, args.summary)
    else:
        sys.stderr.write(ex.dumps(summary))


def cmd_concentration(args):
    params = ConcentrationParams(args.delta, args.varsigma_prime)
    rows = concentration_decay_experiment(args.family, args.sizes, args.trials, params,
                                          seed=args.seed)
    _write_rows(rows, args.out)


def cmd_run(args):
    if not Path(args.config).exists():
        raise UsageError(f"config file not found: {args.config}")
    resolved = ex.load_config(args.config)
    out = ex.run_experiment(resolved, args.out_dir)
    sys.stdout.write(f"{len(out['reports'])} reports, aggregate {out['aggregate']}\n")


# -- parser -----------------------------------------------------------------------

def _add_cost(p):
    p.add_argument("--cost", default="euclidean",
                   choices=["euclidean", "sq_euclidean", "kernel_induced"])
    p.add_argument("--sigma", type=float, default=None, help="gaussian kernel bandwidth")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="otda", description="Optimal-transport domain adaptation tools.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic source/target pair")
    p.add_argument("--generator", default="two_moons",
                   choices=["two_moons", "gaussian_shift", "square_annulus"])
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--n-target", type=int, default=None)
    p.add_argument("--rotation", type=float, default=0.0)
    p.add_argument("--shift", type=_floats, default=[5.0, 0.0])
    p.add_argument("--radii", type=_floats, default=[0.75, 1.25])
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-src", required=True)
    p.add_argument("--out-tgt", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ot", help="transport between two samples")
    ot_sub = p.add_subparsers(dest="ot_command", required=True, parser_class=_Parser)
    for name in ("solve", "sinkhorn"):
        q = ot_sub.add_parser(name)
        q.add_argument("--source", required=True)
        q.add_argument("--target", required=True)
        q.add_argument("--out", default=None)
        _add_cost(q)
        if name == "solve":
            q.add_argument("--max-vars", type=int, default=250_000)
        else:
            q.add_argument("--eps", type=float, default=1e-2)
            q.add_argument("--eta", type=float, default=0.0,
                           help="class-based group penalty weight")
            q.add_argument("--tol", type=float, default=1e-9)
            q.add_argument("--max-iters", type=int, default=10_000)
            mode = q.add_mutually_exclusive_group()
            mode.add_argument("--log-domain", action="store_true")
            mode.add_argument("--no-log", action="store_true")
        q.set_defaults(func=cmd_ot)

    p = sub.add_parser("adapt", help="map a labeled source onto a target")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--solver", default="exact", choices=["exact", "sinkhorn", "sinkhorn_group"])
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--out", required=True)
    _add_cost(p)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("adapt-multi", help="barycenter-based multi-source adaptation")
    p.add_argument("--sources", nargs="+", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--alphas", type=_floats, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    _add_cost(p)
    p.set_defaults(func=cmd_adapt_multi)

    p = sub.add_parser("barycenter", help="fixed-support W1 barycenter")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--weights", type=_floats, default=None)
    p.add_argument("--grid", default="auto",
                   help="'auto' (union of input supports) or a CSV/JSON support file")
    p.add_argument("--solver", default="exact", choices=["exact", "entropic"])
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--out", default=None)
    _add_cost(p)
    p.set_defaults(func=cmd_barycenter)

    p = sub.add_parser("lambda", help="class-restricted joint error estimate")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--class", dest="hclass", default="knn1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("bound", help="decomposed bound report from a config")
    p.add_argument("theorem", choices=["unsup", "combined", "multi"])
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("divergence", help="W1 / TV / KL chain audit")
    p.add_argument("which", choices=["chain"])
    p.add_argument("--grid", type=int, default=10)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--summary", default=None)
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("concentration", help="W1 decay between independent samples")
    p.add_argument("--family", default="gauss2d", choices=["gauss2d", "point_mass", "uniform2d"])
    p.add_argument("--sizes", type=_ints, default=[10, 50, 250, 1250])
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--varsigma-prime", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_concentration)

    for name in ("run", "run-experiment"):
        p = sub.add_parser(name, help="run a grid x seeds experiment config")
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir", required=True)
        p.set_defaults(func=cmd_run)
    return parser


USAGE_ERRORS = (UsageError, ex.ConfigError, MeasureError, CostError, LearnerError,
                MappingError, BoundError, CapExceededError, OSError, ValueError)


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except NumericalFailure as exc:
        sys.stderr.write(f"otda: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except SolverError as exc:
        sys.stderr.write(f"otda: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except USAGE_ERRORS as exc:
        sys.stderr.write(f"otda: error: {exc}\n")
        return EXIT_USAGE
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
