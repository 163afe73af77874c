"""Outer ADMM for the fused elastic net logistic objective.

Splits the objective into the smooth part (logistic loss plus ridge), solved
column by column with Newton, and the nonsmooth part (lasso plus fusion),
solved by the nested ADMM of :mod:`fusedlogit.prox`, under the consensus
constraint ``chi == zeta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import DifferenceOperator, PenaltyConfig, TaskDataset, mt_objective
from .newton import DesignFactor, choose_route, solve_chi_columns
from .prox import InnerState, ZetaSubproblem, solve_zeta_update


class FitError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class AdmmState:
    chi: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    zeta_prev: np.ndarray = None
    iteration: int = 0
    primal_res: float = 0.0
    dual_res: float = 0.0
    objective: float = np.nan
    converged: bool = False
    inner: InnerState | None = None

    def __post_init__(self):
        if self.zeta_prev is None:
            self.zeta_prev = self.zeta.copy()

    @classmethod
    def zeros(cls, p, t) -> "AdmmState":
        return cls(np.zeros((p, t)), np.zeros((p, t)), np.zeros((p, t)))

    def copy(self) -> "AdmmState":
        return AdmmState(self.chi.copy(), self.zeta.copy(), self.xi.copy(),
                         self.zeta_prev.copy(), self.iteration, self.primal_res,
                         self.dual_res, self.objective, self.converged,
                         None if self.inner is None else self.inner.copy())


@dataclass
class FitResult:
    B: np.ndarray
    objective_trace: list
    residual_trace: list
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)
    state: AdmmState | None = None
    threshold_trace: list = field(default_factory=list)


def residuals(state: AdmmState, cfg: PenaltyConfig):
    """Boyd-style primal/dual residuals and their thresholds for the outer loop.

    Returns ``(primal, dual, eps_pri, eps_dual)``.
    """
    size = np.sqrt(state.chi.size)
    primal = float(np.linalg.norm(state.chi - state.zeta))
    dual = float(cfg.rho * np.linalg.norm(state.zeta - state.zeta_prev))
    eps_pri = size * cfg.eps_abs + cfg.eps_rel * max(np.linalg.norm(state.chi),
                                                     np.linalg.norm(state.zeta))
    eps_dual = size * cfg.eps_abs + cfg.eps_rel * np.linalg.norm(cfg.rho * state.xi)
    return primal, dual, float(eps_pri), float(eps_dual)


def objective_of_state(state: AdmmState, data: TaskDataset, cfg: PenaltyConfig) -> float:
    return mt_objective(state.zeta, data, cfg)


def _initial_state(warm, p, t) -> AdmmState:
    if warm is None:
        return AdmmState.zeros(p, t)
    if isinstance(warm, FitResult):
        warm = warm.state if warm.state is not None else warm.B
    if isinstance(warm, AdmmState):
        state = warm.copy()
    else:
        B = np.array(warm, dtype=float)
        state = AdmmState(B.copy(), B.copy(), np.zeros_like(B))
    if state.zeta.shape != (p, t):
        raise ValueError(f"warm start must have shape {(p, t)}, got {state.zeta.shape}")
    state.zeta_prev = state.zeta.copy()
    state.iteration = 0
    state.converged = False
    return state


def fit(data: TaskDataset, cfg: PenaltyConfig, warm=None, *, callback=None,
        factor: DesignFactor | None = None) -> FitResult:
    """Fit the fused elastic net logistic model.

    ``warm`` may be a coefficient matrix, an :class:`AdmmState` or a previous
    :class:`FitResult`; the latter two also carry the dual variables and the
    inner solver state. ``callback(state, xi_before)`` runs after every
    iteration. The returned ``B`` is the (exactly sparse) ``zeta`` iterate.
    """
    X, Y = data.X, data.Y
    p, t = data.d + 1, data.t
    state = _initial_state(warm, p, t)
    lam1 = cfg.lambda1_vec(p)
    lam2 = cfg.lambda2_vec(p)
    op = DifferenceOperator(t, cfg.circ)
    if factor is None and data.n < data.d:
        factor = DesignFactor(X, lam2, cfg.rho)
    route = choose_route(data.n, data.d, factor)
    diagnostics = {"route": route, "jittered": bool(factor is not None and factor.jittered),
                   "newton_nonconverged": 0, "inner_nonconverged": 0,
                   "cd_nonconverged": 0}
    objective_trace, residual_trace, threshold_trace = [], [], []

    for k in range(1, cfg.max_outer + 1):
        newton = solve_chi_columns(X, Y, state.zeta - state.xi, lam2, cfg.rho, state.chi,
                                   tol=cfg.newton_tol, max_iter=cfg.max_newton,
                                   route=route, factor=factor)
        state.chi = newton.chi
        diagnostics["newton_nonconverged"] += int((~newton.converged).sum())

        sub = ZetaSubproblem(state.chi + state.xi, lam1, cfg.nu_vec(p), cfg.rho,
                             cfg.rho_tilde, op)
        zeta, inner = solve_zeta_update(sub, state.inner, eps_abs=cfg.inner_eps_abs,
                                        eps_rel=cfg.inner_eps_rel, max_iter=cfg.max_inner,
                                        cd_tol=cfg.cd_tol, max_cd_cycles=cfg.max_cd_cycles)
        diagnostics["inner_nonconverged"] += not inner.converged
        diagnostics["cd_nonconverged"] += inner.cd_nonconverged
        state.inner = inner
        state.zeta_prev = state.zeta
        state.zeta = zeta

        xi_before = state.xi
        state.xi = xi_before + (state.chi - state.zeta)
        state.iteration = k
        primal, dual, eps_pri, eps_dual = residuals(state, cfg)
        state.primal_res, state.dual_res = primal, dual
        state.objective = objective_of_state(state, data, cfg)
        objective_trace.append(state.objective)
        residual_trace.append((primal, dual))
        threshold_trace.append((eps_pri, eps_dual))
        if callback is not None:
            callback(state, xi_before)
        if not (np.isfinite(state.objective) and np.all(np.isfinite(state.xi))):
            raise FitError(f"non-finite iterate at outer iteration {k}; check rho",
                           diagnostics)
        if primal <= eps_pri and dual <= eps_dual:
            state.converged = True
            break

    return FitResult(B=state.zeta.copy(), objective_trace=objective_trace,
                     residual_trace=residual_trace, iterations=state.iteration,
                     converged=state.converged, diagnostics=diagnostics, state=state,
                     threshold_trace=threshold_trace)
