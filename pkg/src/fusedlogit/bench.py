"""Hyperparameter grid search, evaluation metrics and the synthetic benchmark."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .admm import FitError, fit
from .datagen import BenchmarkInstance, case_spec, make_instance
from .model import PenaltyConfig, TaskDataset, classify
from .newton import DesignFactor

VARIANTS = ("fused_elastic_net", "fused_l1", "elastic_net", "unpenalized")

PROFILES = {
    "paper": {
        "lambda1": [0, 0.1, 0.2, 0.4, 0.6, 0.8, 1, 2, 4, 6, 8],
        "lambda2": [0, 0.05, 0.1, 0.2, 0.4, 1, 2],
        "nu": [0, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1, 2, 4, 6, 8],
    },
    "desk": {
        "lambda1": [0, 0.2, 0.8, 2, 6],
        "lambda2": [0, 0.1, 0.4],
        "nu": [0, 0.2, 0.8, 2, 6],
    },
}


@dataclass(frozen=True)
class GridSpec:
    lambda1_grid: tuple
    lambda2_grid: tuple
    nu_grid: tuple
    model_variant: str = "fused_elastic_net"

    def __post_init__(self):
        if self.model_variant not in VARIANTS:
            raise ValueError(f"model_variant must be one of {VARIANTS}")
        for name in ("lambda1_grid", "lambda2_grid", "nu_grid"):
            values = tuple(sorted(float(v) for v in getattr(self, name)))
            if not values:
                raise ValueError(f"{name} must not be empty")
            if values[0] < 0:
                raise ValueError(f"{name} must be nonnegative")
            object.__setattr__(self, name, values)
        fixed = {
            "fused_l1": ("lambda2_grid",),
            "elastic_net": ("nu_grid",),
            "unpenalized": ("lambda1_grid", "lambda2_grid", "nu_grid"),
        }.get(self.model_variant, ())
        for name in fixed:
            if getattr(self, name) != (0.0,):
                raise ValueError(f"{self.model_variant} requires {name} == (0,)")

    @classmethod
    def for_variant(cls, variant: str, profile: str = "desk") -> "GridSpec":
        grids = PROFILES[profile]
        l1, l2, nu = grids["lambda1"], grids["lambda2"], grids["nu"]
        if variant == "fused_l1":
            l2 = [0]
        elif variant == "elastic_net":
            nu = [0]
        elif variant == "unpenalized":
            l1, l2, nu = [0], [0], [0]
        return cls(tuple(l1), tuple(l2), tuple(nu), variant)

    @property
    def size(self) -> int:
        return len(self.lambda1_grid) * len(self.lambda2_grid) * len(self.nu_grid)


def _misclassified(B, data: TaskDataset) -> int:
    return int((classify(B, data.X) != data.Y).sum())


def l01_error(B, data: TaskDataset) -> float:
    """Fraction of misclassified (observation, task) pairs."""
    if data.n == 0 or data.t == 0:
        raise ValueError("empty dataset")
    return _misclassified(B, data) / (data.n * data.t)


def bayes_risk_estimate(B_true, test: TaskDataset) -> float:
    """Test error of the generating model's own sign classifier."""
    return l01_error(B_true, test)


def recovery_distances(B_fit, B_true):
    """Normalized distances on the true-zero and true-nonzero coefficients.

    Each part is an L2 norm divided by the number of entries it covers; the
    intercept row is left out. A part with no entries is ``None``.
    """
    B_fit = np.asarray(B_fit, dtype=float)[1:]
    B_true = np.asarray(B_true, dtype=float)[1:]
    if B_fit.shape != B_true.shape:
        raise ValueError("B_fit and B_true must have the same shape")
    zero = B_true == 0
    nz = ~zero
    zero_part = float(np.linalg.norm(B_fit[zero]) / zero.sum()) if zero.any() else None
    nonzero_part = (float(np.linalg.norm((B_fit - B_true)[nz]) / nz.sum())
                    if nz.any() else None)
    return zero_part, nonzero_part


@dataclass
class GridPoint:
    lambda1: float
    lambda2: float
    nu: float
    val_errors: int
    val_error: float
    converged: bool
    iterations: int


def grid_search(instance: BenchmarkInstance, grid: GridSpec, cfg: PenaltyConfig | None = None,
                *, return_evaluations=False, cache: dict | None = None):
    """Fit every grid point on the training split and pick the best by validation error.

    Points are visited with ``nu`` outermost and ``lambda2`` innermost; each
    ``lambda2`` sweep starts cold and warm-starts from the previous point.
    Ties go to the lexicographically largest ``(nu, lambda1, lambda2)``.
    Returns ``(best_params, best_fit)``, plus the list of evaluated points
    when ``return_evaluations`` is set.

    ``cache`` may be shared between calls on the same instance and solver
    settings: a fit is keyed by its parameters and the warm-start path that
    led to it, so model variants whose grids are slices of a larger grid
    reuse identical fits.
    """
    cfg = cfg or PenaltyConfig()
    train, val = instance.train, instance.validation
    solver_key = tuple(sorted((k, v) for k, v in cfg.to_dict().items()
                              if k not in ("lambda1", "lambda2", "nu")))
    factors = {}
    best_key, best_fit, best_params = None, None, None
    evaluations = []
    for nu in grid.nu_grid:
        for lam1 in grid.lambda1_grid:
            warm = None
            for i, lam2 in enumerate(grid.lambda2_grid):
                key = (solver_key, nu, lam1, grid.lambda2_grid[:i + 1])
                res = None if cache is None else cache.get(key)
                if res is None:
                    res = _fit_point(train, cfg, lam1, lam2, nu, warm, factors)
                    if cache is not None:
                        cache[key] = res
                warm = res
                miss = _misclassified(res.B, val)
                evaluations.append(GridPoint(lam1, lam2, nu, miss, miss / (val.n * val.t),
                                             res.converged, res.iterations))
                rank = (-miss, nu, lam1, lam2)
                if best_key is None or rank > best_key:
                    best_key = rank
                    best_params = {"lambda1": lam1, "lambda2": lam2, "nu": nu}
                    best_fit = res
    if return_evaluations:
        return best_params, best_fit, evaluations
    return best_params, best_fit


def _fit_point(train, cfg, lam1, lam2, nu, warm, factors):
    point = cfg.replace(lambda1=lam1, lambda2=lam2, nu=nu)
    if train.n < train.d and lam2 not in factors:
        factors[lam2] = DesignFactor(train.X, point.lambda2_vec(train.d + 1), point.rho)
    try:
        return fit(train, point, warm, factor=factors.get(lam2))
    except (FitError, np.linalg.LinAlgError, ValueError) as exc:
        raise FitError(f"fit failed at lambda1={lam1}, lambda2={lam2}, nu={nu}: {exc}",
                       getattr(exc, "diagnostics", {})) from exc


@dataclass
class BenchmarkConfig:
    cases: list = field(default_factory=lambda: list("abcdefgh"))
    n_train: list = field(default_factory=lambda: [25, 50, 100, 200, 400])
    n_instances: int = 10
    models: list = field(default_factory=lambda: list(VARIANTS))
    profile: str = "desk"
    seed: int = 0
    n_val: int = 1400
    n_test: int = 1400
    d: int = 100
    t: int = 4
    threads: int = 1
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        for label in self.cases:
            case_spec(label)
        for model in self.models:
            if model not in VARIANTS:
                raise ValueError(f"models: unknown variant {model!r}")
        if self.profile not in PROFILES:
            raise ValueError(f"profile: must be one of {sorted(PROFILES)}")
        if self.n_instances < 1 or any(int(n) < 1 for n in self.n_train):
            raise ValueError("n_instances and n_train entries must be >= 1")
        if int(self.threads) < 1:
            raise ValueError("threads must be >= 1")
        PenaltyConfig(**self.solver)

    @classmethod
    def from_dict(cls, raw: dict) -> "BenchmarkConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)


def instance_seed(seed: int, case: str, instance: int) -> list:
    return [int(seed), ord(case.lower()), int(instance)]


REPORT_COLUMNS = ["case", "scenario", "n_train", "instance", "model", "lambda1", "lambda2",
                  "nu", "val_error", "test_error", "bayes_risk", "zero_part", "nonzero_part",
                  "converged", "iterations", "status", "wall_time"]
TIMING_COLUMNS = ("wall_time",)


def _run_cell(args):
    case, n_train, idx, models, cfg_dict = args
    config = BenchmarkConfig(**cfg_dict)
    spec = case_spec(case, d=config.d, t=config.t)
    inst = make_instance(spec, n_train, config.n_val, config.n_test,
                         seed=instance_seed(config.seed, case, idx))
    solver = PenaltyConfig(**config.solver)
    bayes = bayes_risk_estimate(inst.B_true, inst.test)
    cache = {}
    rows = []
    for model in models:
        row = {"case": case, "scenario": spec.scenario, "n_train": int(n_train),
               "instance": idx, "model": model, "bayes_risk": bayes}
        start = time.perf_counter()
        try:
            params, res = grid_search(inst, GridSpec.for_variant(model, config.profile), solver,
                                      cache=cache)
            zero_part, nonzero_part = recovery_distances(res.B, inst.B_true)
            row.update(params)
            row.update(val_error=l01_error(res.B, inst.validation),
                       test_error=l01_error(res.B, inst.test),
                       zero_part=zero_part, nonzero_part=nonzero_part,
                       converged=bool(res.converged), iterations=int(res.iterations),
                       status="ok")
        except Exception as exc:  # recorded per cell; the run continues
            row.update(status=f"error: {exc}")
        row["wall_time"] = time.perf_counter() - start
        rows.append(row)
    return rows


@dataclass
class BenchmarkReport:
    rows: list
    config: dict = field(default_factory=dict)

    def sorted_rows(self) -> list:
        order = {m: i for i, m in enumerate(VARIANTS)}
        return sorted(self.rows, key=lambda r: (r["case"], r["n_train"], r["instance"],
                                                order[r["model"]]))

    def select(self, **filters) -> list:
        return [r for r in self.sorted_rows()
                if all(r.get(k) == v for k, v in filters.items())]

    def median(self, metric: str, **filters) -> float:
        values = [r[metric] for r in self.select(**filters)
                  if r.get("status") == "ok" and r.get(metric) is not None]
        return float(np.median(values)) if values else float("nan")

    def to_csv(self, path, include_timing=True) -> None:
        columns = [c for c in REPORT_COLUMNS if include_timing or c not in TIMING_COLUMNS]
        with Path(path).open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
            writer.writeheader()
            for row in self.sorted_rows():
                writer.writerow({c: _fmt(row.get(c)) for c in columns})

    def to_long_csv(self, path) -> None:
        """Plot-ready long table: one ``(metric, value)`` per cell and metric."""
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["case", "scenario", "n_train", "model", "instance", "metric",
                             "value"])
            for row in self.sorted_rows():
                for metric in ("test_error", "bayes_risk", "zero_part", "nonzero_part"):
                    writer.writerow([row["case"], row["scenario"], row["n_train"],
                                     row["model"], row["instance"], metric,
                                     _fmt(row.get(metric))])

    def to_nested(self, include_timing=True) -> dict:
        nested = {}
        for row in self.sorted_rows():
            cell = {k: v for k, v in row.items()
                    if k not in ("case", "n_train", "model")
                    and (include_timing or k not in TIMING_COLUMNS)}
            (nested.setdefault(row["case"], {})
                   .setdefault(str(row["n_train"]), {})
                   .setdefault(row["model"], []).append(cell))
        return nested

    def to_json(self, path, include_timing=True) -> None:
        payload = {"config": self.config, "results": self.to_nested(include_timing)}
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def run_benchmark(config: BenchmarkConfig) -> BenchmarkReport:
    """Instance generation, per-model grid search and test evaluation for every cell.

    Cells are independent; with ``threads > 1`` they run in a process pool and
    the rows are sorted afterwards, so the report does not depend on the pool.
    """
    cfg_dict = config.to_dict()
    jobs = [(case, int(n), idx, list(config.models), cfg_dict)
            for case in config.cases for n in config.n_train
            for idx in range(config.n_instances)]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            chunks = list(pool.map(_run_cell, jobs))
    else:
        chunks = [_run_cell(job) for job in jobs]
    rows = [row for chunk in chunks for row in chunk]
    report = BenchmarkReport(rows, cfg_dict)
    report.rows = report.sorted_rows()
    return report
