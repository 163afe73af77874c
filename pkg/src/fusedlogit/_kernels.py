"""Compiled inner ADMM loop for the proximal step.

Mirrors ``prox._inner_admm_numpy`` entry by entry; arrays are in transposed
coordinates (tasks as rows) and updated in place.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _soft(a, kappa):
    if a > kappa:
        return a - kappa
    if a < -kappa:
        return a + kappa
    return 0.0


@njit(cache=True)
def _column_objective(l, chi, zeta, xi, omega_t, lam1, rho, rt, mask):
    t = chi.shape[0]
    val = 0.0
    for j in range(t):
        c = chi[j, l]
        val += lam1[l] * abs(c) + 0.5 * rho * (c - omega_t[j, l]) ** 2
        if mask[j]:
            r = c - chi[(j + 1) % t, l] - zeta[j, l] + xi[j, l]
            val += 0.5 * rt * r * r
    return val


@njit(cache=True)
def _cd_column(l, chi, zeta, xi, omega_t, lam1, rho, rt, mask, tol, max_cycles):
    t = chi.shape[0]
    obj = _column_objective(l, chi, zeta, xi, omega_t, lam1, rho, rt, mask)
    for _ in range(max_cycles):
        for j in range(t):
            prev = (j - 1) % t
            num = rho * omega_t[j, l]
            den = rho
            if t > 1 and mask[prev]:
                num += rt * (chi[prev, l] - zeta[prev, l] + xi[prev, l])
                den += rt
            if mask[j]:
                num += rt * (chi[(j + 1) % t, l] + zeta[j, l] - xi[j, l])
                den += rt
            chi[j, l] = _soft(num / den, lam1[l] / den)
        new = _column_objective(l, chi, zeta, xi, omega_t, lam1, rho, rt, mask)
        decrease = obj - new
        obj = new
        if decrease <= tol * max(1.0, abs(new)):
            return True
    return False


@njit(cache=True)
def inner_admm(omega_t, lam1, nu, rho, rt, mask, chi, zeta, xi, eps_abs, eps_rel, max_iter,
               cd_tol, max_cycles):
    t, p = chi.shape
    n_pairs = 0
    for j in range(t):
        if mask[j]:
            n_pairs += 1
    sqrt_pri = np.sqrt(n_pairs * p)
    sqrt_dual = np.sqrt(t * p)
    dz = np.zeros(t)
    primal = 0.0
    dual = 0.0
    cd_bad = 0
    for k in range(1, max_iter + 1):
        all_cd = True
        for l in range(p):
            if not _cd_column(l, chi, zeta, xi, omega_t, lam1, rho, rt, mask, cd_tol,
                              max_cycles):
                all_cd = False
        if not all_cd:
            cd_bad += 1
        r2 = 0.0
        dchi2 = 0.0
        z2 = 0.0
        s2 = 0.0
        x2 = 0.0
        for l in range(p):
            for j in range(t):
                if mask[j]:
                    diff = chi[j, l] - chi[(j + 1) % t, l]
                    znew = _soft(diff + xi[j, l], nu[l] / rt)
                    dz[j] = znew - zeta[j, l]
                    zeta[j, l] = znew
                    r = diff - znew
                    xi[j, l] += r
                    r2 += r * r
                    dchi2 += diff * diff
                    z2 += znew * znew
                else:
                    dz[j] = 0.0
            for i in range(t):
                # adjoint of the row differences: v_i - v_{i-1} over fused rows
                s = 0.0
                a = 0.0
                if mask[i]:
                    s += dz[i]
                    a += xi[i, l]
                prev = (i - 1) % t
                if t > 1 and mask[prev]:
                    s -= dz[prev]
                    a -= xi[prev, l]
                s2 += s * s
                x2 += a * a
        primal = np.sqrt(r2)
        dual = rt * np.sqrt(s2)
        eps_pri = sqrt_pri * eps_abs + eps_rel * max(np.sqrt(dchi2), np.sqrt(z2))
        eps_dual = sqrt_dual * eps_abs + eps_rel * rt * np.sqrt(x2)
        if primal <= eps_pri and dual <= eps_dual:
            return k, True, primal, dual, cd_bad
    return max_iter, False, primal, dual, cd_bad
