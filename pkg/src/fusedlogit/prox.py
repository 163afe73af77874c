"""Proximal step of the outer ADMM: the fused lasso plus lasso penalty.

The update

    argmin_Z ||lambda1 * Z||_1 + ||nu * Z(I - R)||_1 + rho/2 ||Z - Omega||^2

is solved in transposed coordinates (tasks as rows) by an inner ADMM whose
smooth step is cyclic coordinate descent with soft thresholding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DifferenceOperator


def soft_threshold(a, kappa):
    """``sign(a) * max(|a| - kappa, 0)``; works elementwise on arrays."""
    a = np.asarray(a, dtype=float)
    out = np.sign(a) * np.maximum(np.abs(a) - kappa, 0.0)
    return out if out.ndim else float(out)


@dataclass
class ZetaSubproblem:
    Omega: np.ndarray
    lambda1_vec: np.ndarray
    nu: float | np.ndarray
    rho: float
    rho_tilde: float
    diff_op: DifferenceOperator

    def __post_init__(self):
        self.Omega = np.asarray(self.Omega, dtype=float)
        p, t = self.Omega.shape
        self.lambda1_vec = np.asarray(self.lambda1_vec, dtype=float)
        if self.lambda1_vec.shape != (p,):
            raise ValueError(f"lambda1_vec must have length {p}")
        if self.lambda1_vec[0] != 0:
            raise ValueError("the intercept entry of lambda1_vec must be 0")
        if self.diff_op.t != t:
            raise ValueError("difference operator does not match the task count")
        if not (self.rho > 0 and self.rho_tilde > 0):
            raise ValueError("rho and rho_tilde must be positive")
        self.nu_vec = np.broadcast_to(np.asarray(self.nu, dtype=float), (p,)).copy()
        if np.any(self.nu_vec < 0):
            raise ValueError("nu must be nonnegative")

    @property
    def shape(self):
        return self.Omega.shape

    @property
    def coupled(self) -> bool:
        return self.diff_op.n_pairs > 0 and bool(np.any(self.nu_vec > 0))


def row_differences(chi_t, op: DifferenceOperator) -> np.ndarray:
    """``(I - R)^T chi_t``: row ``j`` is ``chi_t[j] - chi_t[j+1]``, masked rows zero."""
    return op.apply(chi_t.T).T


def row_differences_adjoint(v, op: DifferenceOperator) -> np.ndarray:
    return op.matrix() @ v


def _neighbors(j, op):
    t = op.t
    prev_pair = (j - 1) % t
    has_prev = bool(op.mask[prev_pair]) and t > 1
    has_next = bool(op.mask[j])
    return prev_pair, has_prev, has_next


def _cd_target(j, chi_t, zeta_t, xi_t, sub):
    """Center ``a`` and shrinkage ``kappa`` of the 1-d problem for task row ``j``."""
    op = sub.diff_op
    t = op.t
    prev_pair, has_prev, has_next = _neighbors(j, op)
    num = sub.rho * sub.Omega[:, j]
    den = sub.rho
    if has_prev:
        num = num + sub.rho_tilde * (chi_t[prev_pair] - zeta_t[prev_pair] + xi_t[prev_pair])
        den += sub.rho_tilde
    if has_next:
        num = num + sub.rho_tilde * (chi_t[(j + 1) % t] + zeta_t[j] - xi_t[j])
        den += sub.rho_tilde
    return num / den, sub.lambda1_vec / den


def cd_step(j, l, chi_t, zeta_t, xi_t, sub: ZetaSubproblem) -> float:
    """Exact minimizer over coordinate ``chi_t[j, l]`` with all others fixed."""
    t, p = chi_t.shape
    if not (0 <= j < t and 0 <= l < p):
        raise IndexError(f"coordinate ({j}, {l}) outside a {t} x {p} state")
    a, kappa = _cd_target(j, chi_t, zeta_t, xi_t, sub)
    return soft_threshold(a[l], kappa[l])


def chi_tilde_objective(chi_t, zeta_t, xi_t, sub: ZetaSubproblem) -> np.ndarray:
    """Per-column (per coefficient row ``l``) objective of the coordinate descent."""
    resid = row_differences(chi_t, sub.diff_op) - zeta_t + xi_t
    return (sub.lambda1_vec * np.abs(chi_t).sum(axis=0)
            + 0.5 * sub.rho * ((chi_t - sub.Omega.T) ** 2).sum(axis=0)
            + 0.5 * sub.rho_tilde * (resid ** 2).sum(axis=0))


def chi_tilde_update(sub: ZetaSubproblem, zeta_t, xi_t, warm=None, *, tol=1e-8,
                     max_cycles=200, return_info=False):
    """Cyclic coordinate descent over task rows, one coefficient column at a time.

    Columns are independent; each stops once a full cycle lowers its
    objective by no more than ``tol`` relative. Row updates are vectorized
    over the columns still running.
    """
    t, p = sub.shape[1], sub.shape[0]
    chi_t = np.zeros((t, p)) if warm is None else np.array(warm, dtype=float)
    obj = chi_tilde_objective(chi_t, zeta_t, xi_t, sub)
    active = np.ones(p, dtype=bool)
    cycles = np.zeros(p, dtype=int)
    for _ in range(max_cycles):
        cols = np.flatnonzero(active)
        for j in range(t):
            a, kappa = _cd_target(j, chi_t, zeta_t, xi_t, sub)
            chi_t[j, cols] = soft_threshold(a[cols], kappa[cols])
        cycles[cols] += 1
        new = chi_tilde_objective(chi_t, zeta_t, xi_t, sub)
        done = (obj - new) <= tol * np.maximum(1.0, np.abs(new))
        obj = new
        active &= ~done
        if not active.any():
            break
    if return_info:
        return chi_t, {"cycles": cycles, "converged": not active.any(), "objective": obj}
    return chi_t


def zeta_tilde_update(chi_t, xi_t, sub: ZetaSubproblem) -> np.ndarray:
    z = soft_threshold(row_differences(chi_t, sub.diff_op) + xi_t,
                       sub.nu_vec[None, :] / sub.rho_tilde)
    z[~sub.diff_op.mask] = 0.0
    return z


def zeta_objective(Z, sub: ZetaSubproblem) -> float:
    """Objective of the proximal step at ``Z`` (``(1 + d) x t``)."""
    Z = np.asarray(Z, dtype=float)
    return float((sub.lambda1_vec[:, None] * np.abs(Z)).sum()
                 + (sub.nu_vec[:, None] * np.abs(sub.diff_op.apply(Z))).sum()
                 + 0.5 * sub.rho * ((Z - sub.Omega) ** 2).sum())


@dataclass
class InnerState:
    """Transposed-coordinate iterates of the inner ADMM (all ``t x (1 + d)``)."""

    chi_t: np.ndarray
    zeta_t: np.ndarray
    xi_t: np.ndarray
    iterations: int = 0
    converged: bool = False
    primal_res: float = 0.0
    dual_res: float = 0.0
    cd_nonconverged: int = 0

    @classmethod
    def zeros(cls, t, p):
        return cls(np.zeros((t, p)), np.zeros((t, p)), np.zeros((t, p)))

    def copy(self) -> "InnerState":
        return InnerState(self.chi_t.copy(), self.zeta_t.copy(), self.xi_t.copy(),
                          self.iterations, self.converged, self.primal_res,
                          self.dual_res, self.cd_nonconverged)


def lasso_prox(sub: ZetaSubproblem) -> np.ndarray:
    return soft_threshold(sub.Omega, sub.lambda1_vec[:, None] / sub.rho)


def solve_zeta_update(sub: ZetaSubproblem, warm: InnerState | None = None, *,
                      eps_abs=1e-5, eps_rel=1e-4, max_iter=300, cd_tol=1e-8,
                      max_cd_cycles=200, backend="numba"):
    """Solve the proximal step; returns ``(Z, inner_state)`` with ``Z`` ``(1 + d) x t``.

    Without any active fusion pair the problem separates entrywise and the
    lasso prox is returned directly. ``backend="numpy"`` runs the loop built
    from :func:`chi_tilde_update` and :func:`zeta_tilde_update`; the default
    runs the same iteration as a compiled kernel.
    """
    p, t = sub.shape
    if not sub.coupled:
        Z = lasso_prox(sub)
        state = InnerState(Z.T.copy(), np.zeros((t, p)), np.zeros((t, p)), 0, True)
        return Z, state
    state = InnerState.zeros(t, p) if warm is None else warm.copy()
    if backend == "numba":
        from ._kernels import inner_admm

        it, conv, pres, dres, cd_bad = inner_admm(
            np.ascontiguousarray(sub.Omega.T), sub.lambda1_vec, sub.nu_vec, float(sub.rho),
            float(sub.rho_tilde), sub.diff_op.mask, state.chi_t, state.zeta_t, state.xi_t,
            float(eps_abs), float(eps_rel), int(max_iter), float(cd_tol), int(max_cd_cycles))
        state.iterations, state.converged = int(it), bool(conv)
        state.primal_res, state.dual_res, state.cd_nonconverged = float(pres), float(dres), int(cd_bad)
    elif backend == "numpy":
        _inner_admm_numpy(sub, state, eps_abs, eps_rel, max_iter, cd_tol, max_cd_cycles)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return state.chi_t.T.copy(), state


def _inner_admm_numpy(sub, state, eps_abs, eps_rel, max_iter, cd_tol, max_cd_cycles):
    p, t = sub.shape
    op = sub.diff_op
    tr = sub.rho_tilde
    sqrt_pri = np.sqrt(op.n_pairs * p)
    sqrt_dual = np.sqrt(t * p)
    state.iterations = 0
    state.converged = False
    state.cd_nonconverged = 0
    for k in range(1, max_iter + 1):
        state.chi_t, info = chi_tilde_update(sub, state.zeta_t, state.xi_t, state.chi_t,
                                             tol=cd_tol, max_cycles=max_cd_cycles,
                                             return_info=True)
        state.cd_nonconverged += not info["converged"]
        zeta_old = state.zeta_t
        state.zeta_t = zeta_tilde_update(state.chi_t, state.xi_t, sub)
        Dchi = row_differences(state.chi_t, op)
        r = Dchi - state.zeta_t
        state.xi_t = state.xi_t + r
        state.iterations = k
        state.primal_res = float(np.linalg.norm(r))
        state.dual_res = float(tr * np.linalg.norm(
            row_differences_adjoint(state.zeta_t - zeta_old, op)))
        eps_pri = sqrt_pri * eps_abs + eps_rel * max(np.linalg.norm(Dchi),
                                                     np.linalg.norm(state.zeta_t))
        eps_dual = sqrt_dual * eps_abs + eps_rel * tr * np.linalg.norm(
            row_differences_adjoint(state.xi_t, op))
        if state.primal_res <= eps_pri and state.dual_res <= eps_dual:
            state.converged = True
            break
