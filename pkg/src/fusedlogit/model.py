"""Fused elastic net logistic model: data containers, penalties, objective."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np


@dataclass(frozen=True)
class TaskDataset:
    """Shared design matrix ``X`` (intercept in column 0) and labels ``Y``.

    ``Y`` holds one column of labels in {-1, +1} per task.
    """

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim != 2 or Y.ndim != 2:
            raise ValueError("X and Y must be 2-d arrays")
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        if X.shape[0] < 1 or X.shape[1] < 2 or Y.shape[1] < 1:
            raise ValueError("need n >= 1, d >= 1 and t >= 1")
        if not np.all(X[:, 0] == 1.0):
            raise ValueError("column 0 of X must be the all-ones intercept column")
        if not np.all(np.abs(Y) == 1.0):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1] - 1

    @property
    def t(self) -> int:
        return self.Y.shape[1]

    @classmethod
    def from_features(cls, F, Y) -> "TaskDataset":
        """Build a dataset from a raw feature matrix, prepending the intercept."""
        F = np.asarray(F, dtype=float)
        return cls(add_intercept(F), Y)


def add_intercept(F: np.ndarray) -> np.ndarray:
    F = np.atleast_2d(np.asarray(F, dtype=float))
    return np.hstack([np.ones((F.shape[0], 1)), F])


@dataclass
class PenaltyConfig:
    """Penalty weights plus solver settings for a fit.

    The ridge term is ``lambda2/2 * ||beta||^2`` (Gaussian prior with
    precision ``lambda2``). ``lambda1``/``lambda2`` never touch the intercept row. ``nu`` does,
    unless ``penalize_intercept_fusion`` is switched off.
    """

    lambda1: float = 0.0
    lambda2: float = 0.0
    nu: float = 0.0
    circ: bool = False
    penalize_intercept_fusion: bool = True
    rho: float = 1.0
    rho_tilde: float = 1.0
    eps_abs: float = 1e-4
    eps_rel: float = 1e-3
    inner_eps_abs: float = 1e-5
    inner_eps_rel: float = 1e-4
    newton_tol: float = 1e-8
    cd_tol: float = 1e-8
    max_outer: int = 500
    max_inner: int = 300
    max_newton: int = 50
    max_cd_cycles: int = 200

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "nu"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite nonnegative number, got {value}")
        for name in ("rho", "rho_tilde", "eps_abs", "eps_rel", "inner_eps_abs",
                     "inner_eps_rel", "newton_tol", "cd_tol"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        for name in ("max_outer", "max_inner", "max_newton", "max_cd_cycles"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be at least 1")

    def lambda1_vec(self, p: int) -> np.ndarray:
        v = np.full(p, float(self.lambda1))
        v[0] = 0.0
        return v

    def lambda2_vec(self, p: int) -> np.ndarray:
        v = np.full(p, float(self.lambda2))
        v[0] = 0.0
        return v

    def nu_vec(self, p: int) -> np.ndarray:
        v = np.full(p, float(self.nu))
        if not self.penalize_intercept_fusion:
            v[0] = 0.0
        return v

    def replace(self, **changes) -> "PenaltyConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return PenaltyConfig(**values)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DifferenceOperator:
    """Differences between consecutive task columns, ``B(I - R)``.

    Without ``circ`` the last column of ``B(I - R)`` would be ``B[:, t-1]``
    itself; it is masked to zero so only genuine neighbor pairs count.
    """

    t: int
    circ: bool = False
    mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be >= 1")
        mask = np.ones(self.t, dtype=bool)
        # a ring of one task has no distinct neighbor
        if not self.circ or self.t == 1:
            mask[-1] = False
        object.__setattr__(self, "mask", mask)

    @property
    def n_pairs(self) -> int:
        return int(self.mask.sum())

    def matrix(self) -> np.ndarray:
        """The masked ``t x t`` matrix ``M`` with ``B @ M == apply(B)``."""
        rotate = np.roll(np.eye(self.t), -1, axis=1)
        M = np.eye(self.t) - rotate
        M[:, ~self.mask] = 0.0
        return M

    def apply(self, B: np.ndarray) -> np.ndarray:
        B = np.asarray(B, dtype=float)
        if B.shape[-1] != self.t:
            raise ValueError(f"expected {self.t} columns, got {B.shape[-1]}")
        out = B - np.roll(B, -1, axis=-1)
        out[..., ~self.mask] = 0.0
        return out


def difference_apply(B: np.ndarray, op: DifferenceOperator) -> np.ndarray:
    return op.apply(B)


def sigmoid(m):
    """Logistic function, stable for large ``|m|``."""
    m = np.asarray(m, dtype=float)
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    e = np.exp(m[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def log1pexp_neg(m: np.ndarray) -> np.ndarray:
    """``log(1 + exp(-m))`` without overflow."""
    m = np.asarray(m, dtype=float)
    return np.maximum(0.0, -m) + np.log1p(np.exp(-np.abs(m)))


def _check_column(beta, X):
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or beta.shape[0] != X.shape[1]:
        raise ValueError(f"coefficient vector must have length {X.shape[1]}, got {beta.shape}")
    return beta


def task_nll(beta, X, y) -> float:
    """Negative log-likelihood of one logistic task."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    beta = _check_column(beta, X)
    if y.shape != (X.shape[0],):
        raise ValueError(f"y must have length {X.shape[0]}, got {y.shape}")
    return float(log1pexp_neg(y * (X @ beta)).sum())


def _check_B(B, data: TaskDataset) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.shape != (data.d + 1, data.t):
        raise ValueError(f"B must have shape {(data.d + 1, data.t)}, got {B.shape}")
    return B


def penalty_terms(B: np.ndarray, cfg: PenaltyConfig, circ: bool | None = None) -> dict:
    """The three penalties of the multi-task objective, evaluated at ``B``."""
    p, t = B.shape
    op = DifferenceOperator(t, cfg.circ if circ is None else circ)
    lam1 = cfg.lambda1_vec(p)[:, None]
    lam2 = cfg.lambda2_vec(p)[:, None]
    nu = cfg.nu_vec(p)[:, None]
    return {
        "l1": float(np.abs(lam1 * B).sum()),
        "l2": 0.5 * float((lam2 * B ** 2).sum()),
        "fusion": float(np.abs(nu * op.apply(B)).sum()),
    }


def mt_objective(B, data: TaskDataset, cfg: PenaltyConfig) -> float:
    """Multi-task fused L1-L2 penalized negative log-likelihood."""
    B = _check_B(B, data)
    loss = float(log1pexp_neg(data.Y * (data.X @ B)).sum())
    pen = penalty_terms(B, cfg)
    return loss + pen["l1"] + pen["l2"] + pen["fusion"]


def predict_proba(B, x) -> np.ndarray:
    """Per-task probability of class +1 for a single feature vector (with intercept)."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    x = np.asarray(x, dtype=float)
    if x.shape != (B.shape[0],):
        raise ValueError(f"x must have length {B.shape[0]}, got {x.shape}")
    return sigmoid(x @ B)


def classify(B, X) -> np.ndarray:
    """Sign classifier; exact-zero margins go to +1."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    margins = np.asarray(X, dtype=float) @ B
    return np.where(margins >= 0, 1.0, -1.0)
