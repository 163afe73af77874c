"""Command line entry point: ``fusedlogit {simulate,fit,tune,evaluate,benchmark}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure or
non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .admm import FitError, fit
from .bench import (PROFILES, VARIANTS, BenchmarkConfig, GridSpec, bayes_risk_estimate,
                    grid_search, l01_error, recovery_distances, run_benchmark)
from .datagen import CaseSpec, case_spec, make_instance
from .model import PenaltyConfig, TaskDataset, mt_objective

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _threads(text):
    if text == "auto":
        return os.cpu_count() or 1
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1 or 'auto'")
    return value


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--circ", action="store_true", help="also fuse task t with task 1")
    g.add_argument("--no-intercept-fusion", action="store_true",
                   help="exempt the intercept row from the fusion penalty")
    g.add_argument("--rho", type=float)
    g.add_argument("--rho-tilde", type=float)
    g.add_argument("--eps-abs", type=float)
    g.add_argument("--eps-rel", type=float)
    g.add_argument("--max-outer", type=int)
    g.add_argument("--max-inner", type=int)


def _solver_overrides(args) -> dict:
    out = {}
    for name in ("rho", "rho_tilde", "eps_abs", "eps_rel", "max_outer", "max_inner"):
        value = getattr(args, name, None)
        if value is not None:
            out[name] = value
    if getattr(args, "circ", False):
        out["circ"] = True
    if getattr(args, "no_intercept_fusion", False):
        out["penalize_intercept_fusion"] = False
    return out


def _penalty_config(values: dict) -> PenaltyConfig:
    try:
        return PenaltyConfig(**values)
    except TypeError as exc:
        raise UsageError(f"solver config: {exc}")
    except ValueError as exc:
        raise UsageError(str(exc))


def _existing(path, what="file"):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _writable_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc}")
    if not os.access(path, os.W_OK):
        raise UsageError(f"output directory is not writable: {path}")
    return path


def _read_json(path) -> dict:
    try:
        data = json.loads(_existing(path, "config").read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON: {exc}")
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return data


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def standardize(data: TaskDataset):
    """Center and scale the feature columns; returns ``(scaled_data, mean, std)``."""
    F = data.X[:, 1:]
    mean = F.mean(axis=0)
    std = F.std(axis=0)
    std[std == 0] = 1.0
    return TaskDataset.from_features((F - mean) / std, data.Y), mean, std


def unstandardize(B, mean, std):
    """Map coefficients fitted on standardized features back to the raw scale."""
    B = np.array(B, dtype=float)
    B[1:] = B[1:] / std[:, None]
    B[0] = B[0] - mean @ B[1:]
    return B


def _load_training(args) -> TaskDataset:
    if args.instance:
        return io.load_dataset_csv(_existing(Path(args.instance) / "train.csv"))
    if args.train:
        return io.load_dataset_csv(_existing(args.train))
    raise UsageError("pass --train FILE or --instance DIR")


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    base = case_spec(args.case, d=args.d, t=args.t)
    scenario = args.scenario or base.scenario
    try:
        spec = CaseSpec(scenario, base.nonzero_per_task, base.matching_nonzero,
                        d=args.d, t=args.t, case_label=base.case_label)
    except ValueError as exc:
        raise UsageError(str(exc))
    out = _writable_dir(args.out)
    inst = make_instance(spec, args.n_train, args.n_val, args.n_test, seed=args.seed)
    manifest = io.save_instance(inst, out)
    print(manifest)
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _penalty_config({"lambda1": args.lambda1, "lambda2": args.lambda2, "nu": args.nu,
                           **_solver_overrides(args)})
    out = Path(args.out)
    _writable_dir(out.parent if str(out.parent) else Path("."))
    data = _load_training(args)
    mean = std = None
    if args.standardize:
        data, mean, std = standardize(data)
    res = fit(data, cfg)
    B = res.B if mean is None else unstandardize(res.B, mean, std)
    io.save_matrix_csv(B, out)
    sidecar = out.with_suffix(".json")
    _write_json(sidecar, {
        "penalty": cfg.to_dict(), "standardized": bool(args.standardize),
        "converged": res.converged, "iterations": res.iterations,
        "objective": res.objective_trace[-1], "objective_trace": res.objective_trace,
        "residual_trace": [list(r) for r in res.residual_trace],
        "threshold_trace": [list(r) for r in res.threshold_trace],
        "diagnostics": res.diagnostics,
    })
    print(f"objective {res.objective_trace[-1]!r} iterations {res.iterations} "
          f"converged {res.converged}")
    if not res.converged:
        print("warning: ADMM did not converge; model written anyway", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


TUNE_FIELDS = {"lambda1_grid", "lambda2_grid", "nu_grid", "model_variant", "profile", "solver"}


def cmd_tune(args) -> int:
    inst_dir = _existing(args.instance, "instance directory")
    raw = _read_json(args.config) if args.config else {}
    unknown = set(raw) - TUNE_FIELDS
    if unknown:
        raise UsageError(f"config: unknown field(s): {', '.join(sorted(unknown))}")
    variant = args.variant or raw.get("model_variant", "fused_elastic_net")
    profile = args.profile or raw.get("profile", "desk")
    if variant not in VARIANTS:
        raise UsageError(f"model_variant: must be one of {', '.join(VARIANTS)}")
    if profile not in PROFILES:
        raise UsageError(f"profile: must be one of {', '.join(PROFILES)}")
    default = GridSpec.for_variant(variant, profile)
    grids = {}
    for name in ("lambda1_grid", "lambda2_grid", "nu_grid"):
        value = getattr(args, name) or raw.get(name) or getattr(default, name)
        if not isinstance(value, (list, tuple)):
            raise UsageError(f"{name}: expected a list of numbers")
        grids[name] = value
    try:
        grid = GridSpec(model_variant=variant, **grids)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"grid: {exc}")
    solver = raw.get("solver", {})
    if not isinstance(solver, dict):
        raise UsageError("solver: expected an object")
    cfg = _penalty_config({**solver, **_solver_overrides(args)})
    out = Path(args.out)
    _writable_dir(out.parent if str(out.parent) else Path("."))
    inst = io.load_instance(inst_dir)
    params, res, evaluations = grid_search(inst, grid, cfg, return_evaluations=True)
    _write_json(out, {
        "model_variant": variant, "best": params,
        "validation_error": l01_error(res.B, inst.validation),
        "converged": res.converged, "iterations": res.iterations,
        "grid_points": len(evaluations),
    })
    print(json.dumps(params, sort_keys=True))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    inst = io.load_instance(_existing(args.instance, "instance directory"))
    B = io.load_matrix_csv(_existing(args.model, "model file"))
    if B.shape != inst.B_true.shape:
        raise UsageError(f"model has shape {B.shape}, instance expects {inst.B_true.shape}")
    zero_part, nonzero_part = recovery_distances(B, inst.B_true)
    metrics = {
        "test_error": l01_error(B, inst.test),
        "validation_error": l01_error(B, inst.validation),
        "train_error": l01_error(B, inst.train),
        "bayes_risk": bayes_risk_estimate(inst.B_true, inst.test),
        "zero_part": zero_part,
        "nonzero_part": nonzero_part,
    }
    if args.out:
        _write_json(args.out, metrics)
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def cmd_benchmark(args) -> int:
    raw = _read_json(args.config) if args.config else {}
    for flag, key in (("cases", "cases"), ("n_train", "n_train"), ("instances", "n_instances"),
                      ("models", "models"), ("profile", "profile"), ("seed", "seed"),
                      ("threads", "threads"), ("n_val", "n_val"), ("n_test", "n_test")):
        value = getattr(args, flag)
        if value is not None:
            raw[key] = value
    if "seed" not in raw:
        raise UsageError("benchmark needs --seed (or seed in the config file)")
    overrides = _solver_overrides(args)
    if overrides:
        raw["solver"] = {**raw.get("solver", {}), **overrides}
    try:
        config = BenchmarkConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"config: {exc}")
    out = _writable_dir(args.out)
    report = run_benchmark(config)
    report.to_csv(out / "report.csv")
    report.to_json(out / "report.json")
    report.to_long_csv(out / "report_long.csv")
    failed = sum(r["status"] != "ok" for r in report.rows)
    print(f"{len(report.rows)} rows written to {out} ({failed} failed)")
    return EXIT_RUNTIME if failed else EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fusedlogit", description="Simulate, fit, tune and benchmark neighbor-fused logistic models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic benchmark instance")
    p.add_argument("--case", required=True, choices=list("abcdefgh"))
    p.add_argument("--scenario", choices=["independent", "correlated"])
    p.add_argument("--n-train", type=int, required=True)
    p.add_argument("--n-val", type=int, default=1400)
    p.add_argument("--n-test", type=int, default=1400)
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--t", type=int, default=4)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one penalty configuration")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--train", help="dataset CSV (x1..xd,y1..yt)")
    src.add_argument("--instance", help="instance directory; uses its train.csv")
    p.add_argument("--lambda1", type=float, default=0.0)
    p.add_argument("--lambda2", type=float, default=0.0)
    p.add_argument("--nu", type=float, default=0.0)
    p.add_argument("--standardize", action="store_true",
                   help="fit on standardized features, report raw-scale coefficients")
    p.add_argument("--out", required=True, help="model CSV; a .json sidecar is written next to it")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tune", help="grid search on an instance's validation split")
    p.add_argument("--instance", required=True)
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--profile", choices=sorted(PROFILES))
    p.add_argument("--lambda1-grid", type=_float_list)
    p.add_argument("--lambda2-grid", type=_float_list)
    p.add_argument("--nu-grid", type=_float_list)
    p.add_argument("--config", help="JSON with grids, model_variant, profile, solver")
    p.add_argument("--out", required=True)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="test error and recovery distances of a model")
    p.add_argument("--instance", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="run the synthetic benchmark")
    p.add_argument("--config", help="JSON benchmark config")
    p.add_argument("--cases", type=lambda s: [c.strip() for c in s.split(",") if c.strip()])
    p.add_argument("--n-train", type=_int_list)
    p.add_argument("--instances", type=int)
    p.add_argument("--models", type=lambda s: [m.strip() for m in s.split(",") if m.strip()])
    p.add_argument("--profile", choices=sorted(PROFILES))
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=_threads)
    p.add_argument("--n-val", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--out", required=True)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fusedlogit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"fusedlogit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FitError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"fusedlogit {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
