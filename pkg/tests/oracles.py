"""Independent reference solvers used only by the tests."""

import numpy as np


def _nll_grad(beta, X, y):
    m = y * (X @ beta)
    loss = np.sum(np.logaddexp(0.0, -m))
    grad = X.T @ (-y / (1.0 + np.exp(np.clip(m, -700, 700))))
    return loss, grad


def elastic_net_logistic(X, y, lambda1, lambda2, tol=1e-9, max_iter=50000):
    """FISTA with adaptive restart on nll + lambda1|b|_1 + lambda2/2 |b|^2 (intercept free)."""
    p = X.shape[1]
    l1 = np.full(p, float(lambda1))
    l1[0] = 0.0
    l2 = np.full(p, float(lambda2))
    l2[0] = 0.0

    def smooth(b):
        loss, g = _nll_grad(b, X, y)
        return loss + 0.5 * np.sum(l2 * b * b), g + l2 * b

    beta = np.zeros(p)
    z = beta.copy()
    step = 1.0 / (0.25 * np.linalg.norm(X, 2) ** 2 + l2.max() + 1e-12)
    tk = 1.0
    for _ in range(max_iter):
        fz, gz = smooth(z)
        u = z - step * gz
        new = np.sign(u) * np.maximum(np.abs(u) - step * l1, 0.0)
        # gradient-mapping stationarity at z
        if np.max(np.abs(new - z)) / step <= tol:
            beta = new
            break
        tnew = 0.5 * (1 + np.sqrt(1 + 4 * tk * tk))
        if np.dot(z - new, new - beta) > 0:
            # gradient-based adaptive restart
            tk = 1.0
            tnew = 1.0
        z = new + (tk - 1) / tnew * (new - beta)
        beta = new
        tk = tnew
    return beta


def grid_argmin_1d(fun, lo=-10.0, hi=10.0, step=1e-4):
    grid = np.arange(lo, hi + step / 2, step)
    vals = fun(grid)
    i = int(np.argmin(vals))
    return grid[i]


def finite_difference_gradient(fun, x, h=1e-5):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def finite_difference_jacobian(fun, x, h=1e-5):
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.array(cols).T


def grid_argmin_nd(fun, center, half_width=8.0, points=41, final_step=2e-5):
    """Coarse-to-fine grid search for a convex function of a few variables.

    ``fun`` takes an array of shape ``(m, k)`` and returns ``m`` values. Each
    round evaluates the full tensor grid around the incumbent and shrinks the
    box to two grid cells around the best point.
    """
    center = np.asarray(center, dtype=float)
    k = center.size
    width = float(half_width)
    while True:
        axes = [np.linspace(c - width, c + width, points) for c in center]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
        center = mesh[int(np.argmin(fun(mesh)))]
        step = 2 * width / (points - 1)
        if step <= final_step:
            return center
        width = 2 * step


def cvxpy_zeta_prox(Omega, lambda1_vec, nu_vec, rho, mask):
    """Reference solution of the proximal zeta step using cvxpy."""
    import cvxpy as cp

    p, t = Omega.shape
    Z = cp.Variable((p, t))
    terms = [cp.sum(cp.multiply(lambda1_vec[:, None], cp.abs(Z))),
             0.5 * rho * cp.sum_squares(Z - Omega)]
    for j in range(t):
        if mask[j]:
            terms.append(cp.sum(cp.multiply(nu_vec, cp.abs(Z[:, j] - Z[:, (j + 1) % t]))))
    cp.Problem(cp.Minimize(sum(terms))).solve(solver=cp.CLARABEL, tol_gap_abs=1e-12,
                                              tol_gap_rel=1e-12, tol_feas=1e-12)
    return Z.value
