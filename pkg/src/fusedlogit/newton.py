"""Damped Newton solver for the smooth per-task subproblem of the outer ADMM.

Each column ``j`` minimizes

    sum log(1 + exp(-y_j * X chi)) + 1/2 ||lambda2 * chi||^2 + rho/2 ||chi - omega_j||^2

either directly over ``chi`` (``1 + d`` unknowns) or, when ``n < d``, over
the ``n``-dimensional dual variable ``gamma`` with ``chi = h(gamma)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .model import log1pexp_neg, sigmoid

ARMIJO = 1e-4
SHRINK = 0.5
MAX_BACKTRACKS = 50
# Armijo slack: decreases below a few ulps of |f| are not measurable
ROUNDOFF = 8 * np.finfo(float).eps


class SingularDesignError(np.linalg.LinAlgError):
    """``X X^T`` could not be factorized; use the primal route instead."""


@dataclass
class ChiSubproblem:
    X: np.ndarray
    y: np.ndarray
    omega: np.ndarray
    lambda2_vec: np.ndarray
    rho: float

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        self.lambda2_vec = np.asarray(self.lambda2_vec, dtype=float)
        n, p = self.X.shape
        if self.y.shape != (n,):
            raise ValueError(f"y must have length {n}, got {self.y.shape}")
        if self.omega.shape != (p,) or self.lambda2_vec.shape != (p,):
            raise ValueError(f"omega and lambda2_vec must have length {p}")
        if self.lambda2_vec[0] != 0:
            raise ValueError("the intercept entry of lambda2_vec must be 0")
        if not self.rho > 0 or np.any(self.lambda2_vec < 0):
            raise ValueError("need rho > 0 and lambda2_vec >= 0")

    @property
    def scale(self) -> np.ndarray:
        return self.lambda2_vec + self.rho


def _check_chi(chi, sub):
    chi = np.asarray(chi, dtype=float)
    if chi.shape != (sub.X.shape[1],):
        raise ValueError(f"chi must have length {sub.X.shape[1]}, got {chi.shape}")
    return chi


def chi_objective(chi, sub: ChiSubproblem) -> float:
    chi = _check_chi(chi, sub)
    loss = log1pexp_neg(sub.y * (sub.X @ chi)).sum()
    ridge = 0.5 * np.sum(sub.lambda2_vec * chi ** 2)
    prox = 0.5 * sub.rho * np.sum((chi - sub.omega) ** 2)
    return float(loss + ridge + prox)


def logistic_residuals(margins, y):
    """``delta = -y exp(-m) / (1 + exp(-m))`` for margins ``m = y * X chi``."""
    return -y * sigmoid(-margins)


def chi_gradient(chi, sub: ChiSubproblem) -> np.ndarray:
    chi = _check_chi(chi, sub)
    delta = logistic_residuals(sub.y * (sub.X @ chi), sub.y)
    return sub.X.T @ delta + sub.scale * chi - sub.rho * sub.omega


def hessian_weights(margins) -> np.ndarray:
    """``sqrt(p (1 - p))`` per observation, ``p = sigmoid(margin)``."""
    return np.sqrt(sigmoid(margins) * sigmoid(-margins))


def chi_hessian(chi, sub: ChiSubproblem) -> np.ndarray:
    chi = _check_chi(chi, sub)
    WX = hessian_weights(sub.y * (sub.X @ chi))[:, None] * sub.X
    return WX.T @ WX + np.diag(sub.scale)


class DesignFactor:
    """Iteration-independent pieces of the dual route for one ``(X, lambda2, rho)``.

    Holds the scaled design ``X / sqrt(lambda2 + rho)``, its Gram matrix and a
    Cholesky factor of ``X X^T``. Factorization adds a jitter of
    ``1e-10 * trace / n`` at most twice before giving up.
    """

    def __init__(self, X, lambda2_vec, rho):
        self.X = np.asarray(X, dtype=float)
        self.scale = np.asarray(lambda2_vec, dtype=float) + rho
        self.rho = float(rho)
        self.X_scaled = self.X / np.sqrt(self.scale)[None, :]
        self.K = self.X_scaled @ self.X_scaled.T
        self.jitter = 0.0
        self.chol = None
        self.error = None
        gram = self.X @ self.X.T
        n = gram.shape[0]
        base = 1e-10 * np.trace(gram) / n
        for attempt in range(3):
            jitter = base * attempt
            try:
                self.chol = linalg.cho_factor(gram + jitter * np.eye(n), lower=True)
            except linalg.LinAlgError as exc:
                self.error = exc
                continue
            # Cholesky can succeed on a numerically singular matrix
            diag = np.abs(np.diag(self.chol[0]))
            if diag.min() <= 1e-7 * diag.max():
                self.chol = None
                continue
            self.jitter = jitter
            self.error = None
            break

    @property
    def factorized(self) -> bool:
        return self.chol is not None

    @property
    def jittered(self) -> bool:
        return self.factorized and self.jitter > 0


@dataclass
class DualTransform:
    """The maps ``h`` and ``h^{-1}`` bound to one subproblem."""

    sub: ChiSubproblem
    factor: DesignFactor = None

    def __post_init__(self):
        if self.factor is None:
            self.factor = DesignFactor(self.sub.X, self.sub.lambda2_vec, self.sub.rho)

    @property
    def X_scaled(self) -> np.ndarray:
        return self.factor.X_scaled

    @property
    def omega_scaled(self) -> np.ndarray:
        return self.sub.omega / np.sqrt(self.sub.scale)

    @property
    def jittered(self) -> bool:
        return self.factor.jittered


def h_map(gamma, tr: DualTransform) -> np.ndarray:
    sub = tr.sub
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (sub.X.shape[0],):
        raise ValueError(f"gamma must have length {sub.X.shape[0]}, got {gamma.shape}")
    return (sub.X.T @ gamma + sub.rho * sub.omega) / sub.scale


def h_inverse(chi, tr: DualTransform) -> np.ndarray:
    sub = tr.sub
    chi = _check_chi(chi, sub)
    if not tr.factor.factorized:
        raise SingularDesignError(
            "X X^T is numerically singular even after jitter; solve in the primal space"
        )
    return linalg.cho_solve(tr.factor.chol, sub.X @ (sub.scale * chi - sub.rho * sub.omega))


def _phi_margins(gamma, tr):
    sub = tr.sub
    offset = sub.rho * (tr.X_scaled @ tr.omega_scaled)
    return sub.y * (tr.factor.K @ gamma + offset)


def phi_objective(gamma, tr: DualTransform) -> float:
    return chi_objective(h_map(gamma, tr), tr.sub)


def phi_gradient(gamma, tr: DualTransform) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    delta = logistic_residuals(_phi_margins(gamma, tr), tr.sub.y)
    return tr.factor.K @ (delta + gamma)


def phi_hessian(gamma, tr: DualTransform) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    WK = hessian_weights(_phi_margins(gamma, tr))[:, None] * tr.factor.K
    return WK.T @ WK + tr.factor.K


@dataclass
class NewtonResult:
    chi: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    route: str
    objective_trace: list = field(default_factory=list)
    jittered: bool = False


def choose_route(n: int, d: int, factor: DesignFactor | None) -> str:
    if n < d and factor is not None and factor.factorized:
        return "dual"
    return "primal"


def solve_chi_columns(X, Y, Omega, lambda2_vec, rho, warm=None, *, tol=1e-8,
                      max_iter=50, route="auto", factor=None) -> NewtonResult:
    """Minimize all ``t`` column subproblems at once.

    Columns share ``X``, so the Newton iterations run batched; each column
    keeps its own step size and convergence flag. ``Omega`` and ``warm`` are
    ``(1 + d) x t``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    n, p = X.shape
    scale = np.asarray(lambda2_vec, dtype=float) + rho
    if route == "auto":
        if n < p - 1 and factor is None:
            factor = DesignFactor(X, lambda2_vec, rho)
        route = choose_route(n, p - 1, factor)
    if route == "dual" and factor is None:
        factor = DesignFactor(X, lambda2_vec, rho)
    if route == "dual" and not factor.factorized:
        raise SingularDesignError("dual route requested but X X^T is singular")
    chi0 = np.zeros_like(Omega) if warm is None else np.array(warm, dtype=float)
    if route == "dual":
        return _dual_newton(X, Y, Omega, scale, rho, chi0, factor, tol, max_iter)
    return _primal_newton(X, Y, Omega, scale, rho, chi0, tol, max_iter)


def _columns_value(margins, quad):
    return log1pexp_neg(margins).sum(axis=0) + quad


def _primal_newton(X, Y, Omega, scale, rho, chi, tol, max_iter):
    t = Omega.shape[1]
    p = len(scale)
    s = scale[:, None]
    lam2 = (scale - rho)[:, None]

    def quad(C, Om):
        return 0.5 * np.sum(lam2 * C ** 2, axis=0) + 0.5 * rho * np.sum((C - Om) ** 2, axis=0)

    M = Y * (X @ chi)
    f = _columns_value(M, quad(chi, Omega))
    trace = [f.copy()]
    iters = np.zeros(t, dtype=int)
    diag = np.arange(p)
    for _ in range(max_iter + 1):
        grad = X.T @ (-Y * sigmoid(-M)) + s * chi - rho * Omega
        converged = np.linalg.norm(grad, axis=0) <= tol * (1.0 + np.linalg.norm(chi, axis=0))
        active = np.flatnonzero(~converged)
        if active.size == 0 or iters.max() >= max_iter:
            break
        w2 = sigmoid(M[:, active]) * sigmoid(-M[:, active])
        step = np.empty((p, active.size))
        for k, j in enumerate(active):
            H = (X.T * w2[:, k]) @ X
            H[diag, diag] += scale
            step[:, k] = -linalg.cho_solve(linalg.cho_factor(H, lower=True, check_finite=False),
                                         grad[:, j], check_finite=False)
        slope = np.sum(grad[:, active] * step, axis=0)
        alpha = np.ones(active.size)
        pending = np.ones(active.size, dtype=bool)
        for _ls in range(MAX_BACKTRACKS):
            idx = np.flatnonzero(pending)
            cols = active[idx]
            C = chi[:, cols] + alpha[idx] * step[:, idx]
            Mt = Y[:, cols] * (X @ C)
            ft = _columns_value(Mt, quad(C, Omega[:, cols]))
            ok = ft <= f[cols] + ARMIJO * alpha[idx] * slope[idx] + ROUNDOFF * np.abs(f[cols])
            acc = cols[ok]
            chi[:, acc] = C[:, ok]
            M[:, acc] = Mt[:, ok]
            f[acc] = ft[ok]
            pending[idx[ok]] = False
            if not pending.any():
                break
            alpha[pending] *= SHRINK
        iters[active] += 1
        trace.append(f.copy())
        if pending.all():
            # line search stalled at roundoff on every active column
            break
    return NewtonResult(chi, converged, iters, "primal", trace)


def _dual_newton(X, Y, Omega, scale, rho, chi0, factor, tol, max_iter):
    t = Omega.shape[1]
    n = X.shape[0]
    K = factor.K
    s = scale[:, None]
    offset = rho * (X @ (Omega / s))
    # phi(gamma) = sum logistic + 1/2 gamma' K gamma + const(Omega)
    const = 0.5 * rho * np.sum(Omega ** 2, axis=0) - 0.5 * rho ** 2 * np.sum(Omega ** 2 / s, axis=0)
    gamma = linalg.cho_solve(factor.chol, X @ (s * chi0 - rho * Omega))

    KG = K @ gamma
    M = Y * (KG + offset)
    f = log1pexp_neg(M).sum(axis=0) + 0.5 * np.sum(gamma * KG, axis=0) + const
    trace = [f.copy()]
    iters = np.zeros(t, dtype=int)
    converged = np.zeros(t, dtype=bool)
    for _ in range(max_iter + 1):
        delta = -Y * sigmoid(-M)
        r = delta + gamma
        chi = (X.T @ gamma + rho * Omega) / s
        pgrad = X.T @ r
        converged = np.linalg.norm(pgrad, axis=0) <= tol * (1.0 + np.linalg.norm(chi, axis=0))
        active = np.flatnonzero(~converged)
        if active.size == 0 or iters.max() >= max_iter:
            break
        w2 = sigmoid(M[:, active]) * sigmoid(-M[:, active])
        step = np.empty((n, active.size))
        for k, j in enumerate(active):
            # Newton system K (W K + I) step = -K r, solved on its well-posed factor
            A = w2[:, k][:, None] * K
            A[np.arange(n), np.arange(n)] += 1.0
            step[:, k] = -np.linalg.solve(A, r[:, j])
        slope = np.sum((K @ r[:, active]) * step, axis=0)
        Kstep = K @ step
        alpha = np.ones(active.size)
        pending = np.ones(active.size, dtype=bool)
        for _ls in range(MAX_BACKTRACKS):
            idx = np.flatnonzero(pending)
            cols = active[idx]
            G = gamma[:, cols] + alpha[idx] * step[:, idx]
            KGt = KG[:, cols] + alpha[idx] * Kstep[:, idx]
            Mt = Y[:, cols] * (KGt + offset[:, cols])
            ft = log1pexp_neg(Mt).sum(axis=0) + 0.5 * np.sum(G * KGt, axis=0) + const[cols]
            ok = ft <= f[cols] + ARMIJO * alpha[idx] * slope[idx] + ROUNDOFF * np.abs(f[cols])
            acc_cols = cols[ok]
            gamma[:, acc_cols] = G[:, ok]
            KG[:, acc_cols] = KGt[:, ok]
            M[:, acc_cols] = Mt[:, ok]
            f[acc_cols] = ft[ok]
            pending[idx[ok]] = False
            if not pending.any():
                break
            alpha[pending] *= SHRINK
        iters[active] += 1
        trace.append(f.copy())
        if pending.all():
            break
    chi = (X.T @ gamma + rho * Omega) / s
    return NewtonResult(chi, converged, iters, "dual", trace, factor.jittered)


def solve_chi_column(sub: ChiSubproblem, warm_start=None, *, tol=1e-8, max_iter=50,
                     route="auto", factor=None) -> NewtonResult:
    """Minimize one column subproblem; ``chi`` of the result is a vector."""
    warm = None if warm_start is None else np.asarray(warm_start, dtype=float)[:, None]
    res = solve_chi_columns(sub.X, sub.y[:, None], sub.omega[:, None], sub.lambda2_vec,
                            sub.rho, warm, tol=tol, max_iter=max_iter, route=route,
                            factor=factor)
    res.chi = res.chi[:, 0]
    res.objective_trace = [float(v[0]) for v in res.objective_trace]
    return res
