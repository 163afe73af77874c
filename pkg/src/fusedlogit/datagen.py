"""Synthetic benchmark instances: sparse, similar coefficient quartets and data."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import TaskDataset, add_intercept, sigmoid

COEFFICIENT_VALUES = np.array([-4.0, -2.0, 2.0, 4.0])
SCENARIOS = ("independent", "correlated")
NOISE_VARIANCE = 0.4


@dataclass(frozen=True)
class CaseSpec:
    scenario: str
    nonzero_per_task: int
    matching_nonzero: int
    d: int = 100
    t: int = 4
    case_label: str = ""

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if not 0 <= self.matching_nonzero <= self.nonzero_per_task <= self.d:
            raise ValueError("need 0 <= matching_nonzero <= nonzero_per_task <= d")
        if self.t < 1:
            raise ValueError("t must be >= 1")
        if self.scenario == "correlated":
            if self.d % 2:
                raise ValueError("the correlated scenario needs an even d")
            if self.nonzero_per_task % 2 or self.matching_nonzero % 2:
                raise ValueError("the correlated scenario mirrors coefficients in pairs; "
                                 "nonzero and matching counts must be even")

    def to_dict(self) -> dict:
        return asdict(self)


_GRID = {
    "a": (60, 12), "b": (60, 48), "c": (10, 2), "d": (10, 8),
    "e": (60, 12), "f": (60, 48), "g": (10, 2), "h": (10, 8),
}


def case_spec(label: str, d: int = 100, t: int = 4) -> CaseSpec:
    """The benchmark case grid: a-d use independent features, e-h correlated ones."""
    label = label.lower()
    if label not in _GRID:
        raise ValueError(f"unknown case {label!r}; expected one of a-h")
    k, m = _GRID[label]
    scenario = "independent" if label in "abcd" else "correlated"
    return CaseSpec(scenario, k, m, d=d, t=t, case_label=label)


CASES = {label: case_spec(label) for label in _GRID}


def _chain_supports(d, t, k, m, rng):
    """Columns over ``d`` features, ``k`` nonzeros each, ``m`` equal-valued matches per neighbor pair."""
    B = np.zeros((d, t))
    support = rng.choice(d, size=k, replace=False)
    B[support, 0] = rng.choice(COEFFICIENT_VALUES, size=k)
    for j in range(1, t):
        prev = B[:, j - 1]
        prev_support = np.flatnonzero(prev)
        shared = rng.choice(prev_support, size=m, replace=False)
        B[shared, j] = prev[shared]
        free = np.setdiff1d(np.arange(d), shared)
        others = rng.choice(free, size=k - m, replace=False)
        for pos in others:
            if prev[pos] != 0:
                # overlapping support must not count as a match
                B[pos, j] = rng.choice(COEFFICIENT_VALUES[COEFFICIENT_VALUES != prev[pos]])
            else:
                B[pos, j] = rng.choice(COEFFICIENT_VALUES)
    return B


def gen_coefficients(spec: CaseSpec, rng: np.random.Generator) -> np.ndarray:
    """True ``(1 + d) x t`` coefficients with zero intercepts.

    For the correlated scenario the first half is drawn with half the counts
    and mirrored onto the second half, so the final matrix meets the counts.
    """
    d, t = spec.d, spec.t
    B = np.zeros((d + 1, t))
    if spec.scenario == "correlated":
        half = d // 2
        first = _chain_supports(half, t, spec.nonzero_per_task // 2,
                                spec.matching_nonzero // 2, rng)
        B[1:half + 1] = first
        B[half + 1:] = first
    else:
        B[1:] = _chain_supports(d, t, spec.nonzero_per_task, spec.matching_nonzero, rng)
    return B


def support_counts(B: np.ndarray):
    """Per-task nonzero counts and per-neighbor-pair equal-valued match counts (intercept excluded)."""
    C = np.asarray(B)[1:]
    nonzero = (C != 0).sum(axis=0)
    matches = ((C[:, :-1] == C[:, 1:]) & (C[:, :-1] != 0)).sum(axis=0)
    return nonzero, matches


def gen_features_independent(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    return add_intercept(rng.standard_normal((n, d)))


def relevant_first_half(B: np.ndarray) -> np.ndarray:
    """0-based feature indices ``j < d/2`` with a nonzero coefficient in some task."""
    half = (B.shape[0] - 1) // 2
    return np.flatnonzero(np.any(B[1:half + 1] != 0, axis=1))


def gen_features_correlated(n: int, d: int, B_true: np.ndarray, rng: np.random.Generator):
    """Features whose relevant second-half columns are noisy copies of the first half.

    Returns ``(X, B_adjusted)`` where ``B_adjusted`` repeats the first-half
    coefficients on the second half.
    """
    if d % 2:
        raise ValueError("the correlated scenario needs an even d")
    B_adj = np.array(B_true, dtype=float)
    if B_adj.shape[0] != d + 1:
        raise ValueError(f"B_true must have {d + 1} rows")
    half = d // 2
    B_adj[half + 1:] = B_adj[1:half + 1]
    F = rng.standard_normal((n, d))
    relevant = relevant_first_half(B_adj)
    noise = rng.standard_normal((n, relevant.size)) * np.sqrt(NOISE_VARIANCE)
    F[:, half + relevant] = F[:, relevant] + noise
    return add_intercept(F), B_adj


def gen_labels(X: np.ndarray, B_true: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    prob = sigmoid(np.asarray(X) @ np.asarray(B_true))
    return np.where(rng.random(prob.shape) < prob, 1.0, -1.0)


@dataclass
class BenchmarkInstance:
    B_true: np.ndarray
    train: TaskDataset
    validation: TaskDataset
    test: TaskDataset
    seed: object
    spec: CaseSpec


def _draw_split(n, spec, B, rng):
    if spec.scenario == "correlated":
        X, _ = gen_features_correlated(n, spec.d, B, rng)
    else:
        X = gen_features_independent(n, spec.d, rng)
    return TaskDataset(X, gen_labels(X, B, rng))


def make_instance(spec: CaseSpec, n_train: int, n_val: int = 1400, n_test: int = 1400,
                  seed=0) -> BenchmarkInstance:
    """Draw one instance; everything flows from ``np.random.default_rng(seed)``.

    The validation and test splits are drawn before the training split, so
    instances that differ only in ``n_train`` share ``B_true``, validation and
    test data.
    """
    for name, size in (("n_train", n_train), ("n_val", n_val), ("n_test", n_test)):
        if size < 1:
            raise ValueError(f"{name} must be >= 1")
    rng = np.random.default_rng(seed)
    B = gen_coefficients(spec, rng)
    val = _draw_split(n_val, spec, B, rng)
    test = _draw_split(n_test, spec, B, rng)
    train = _draw_split(n_train, spec, B, rng)
    return BenchmarkInstance(B, train, val, test, seed, spec)
