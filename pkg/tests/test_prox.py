import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fusedlogit.model import DifferenceOperator
from fusedlogit.prox import (InnerState, ZetaSubproblem, cd_step, chi_tilde_objective,
                             chi_tilde_update, lasso_prox, row_differences,
                             row_differences_adjoint, soft_threshold, solve_zeta_update,
                             zeta_objective, zeta_tilde_update)
from oracles import cvxpy_zeta_prox, grid_argmin_1d, grid_argmin_nd


def make_sub(p, t, seed=0, lam1=0.4, nu=0.7, rho=1.0, rho_tilde=1.0, circ=False):
    rng = np.random.default_rng(seed)
    l1 = np.full(p, lam1)
    l1[0] = 0
    return ZetaSubproblem(2 * rng.normal(size=(p, t)), l1, nu, rho, rho_tilde,
                          DifferenceOperator(t, circ))


def random_state(sub, seed):
    rng = np.random.default_rng(seed)
    p, t = sub.shape
    return rng.normal(size=(t, p)), rng.normal(size=(t, p)), rng.normal(size=(t, p))


def test_soft_threshold_examples():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-1.0, 2.0) == 0.0
    assert soft_threshold(-2.0, 0.5) == -1.5


@given(st.floats(-1e6, 1e6), st.floats(0, 1e6))
def test_soft_threshold_is_prox(a, kappa):
    s = soft_threshold(a, kappa)
    assert abs(s) <= abs(a)
    if abs(a) <= kappa:
        assert s == 0
    else:
        assert s == pytest.approx(a - np.sign(a) * kappa, abs=1e-9)


@pytest.mark.parametrize("circ", [False, True])
@pytest.mark.parametrize("seed", range(3))
def test_cd_step_matches_grid(circ, seed):
    sub = make_sub(3, 3, seed=seed, circ=circ)
    chi, zeta, xi = random_state(sub, seed + 100)
    for j in range(3):
        for l in range(3):
            def f(vals, j=j, l=l):
                out = []
                for v in vals:
                    c = chi.copy()
                    c[j, l] = v
                    out.append(chi_tilde_objective(c, zeta, xi, sub)[l])
                return np.array(out)
            coarse = grid_argmin_1d(f, -10, 10, 1e-2)
            best = grid_argmin_1d(f, coarse - 0.02, coarse + 0.02, 1e-5)
            assert abs(cd_step(j, l, chi, zeta, xi, sub) - best) <= 1e-3


def test_cd_step_unshrunk_and_average():
    sub = make_sub(2, 3, lam1=0.0)
    chi, zeta, xi = random_state(sub, 1)
    # with lambda1 = 0 the step is the weighted average itself
    for j in range(3):
        c = chi.copy()
        c[j, 1] = cd_step(j, 1, chi, zeta, xi, sub)
        g = chi_tilde_objective(c, zeta, xi, sub)[1]
        for e in (1e-4, -1e-4):
            c2 = c.copy()
            c2[j, 1] += e
            assert chi_tilde_objective(c2, zeta, xi, sub)[1] >= g
    sub.Omega[:] = 1.5
    chi = np.full((3, 2), 1.5)
    zero = np.zeros((3, 2))
    assert cd_step(1, 1, chi, zero, zero, sub) == pytest.approx(1.5)
    with pytest.raises(IndexError):
        cd_step(3, 0, chi, zero, zero, sub)


def test_chi_tilde_update_decouples_without_fusion_weight():
    sub = make_sub(4, 3, seed=3, rho_tilde=1e-12)
    zero = np.zeros((3, 4))
    chi = chi_tilde_update(sub, zero, zero)
    np.testing.assert_allclose(chi, soft_threshold(sub.Omega, sub.lambda1_vec[:, None]).T,
                               atol=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_chi_tilde_update_matches_2d_grid(seed):
    sub = make_sub(2, 2, seed=seed)
    _, zeta, xi = random_state(sub, seed + 7)
    chi = chi_tilde_update(sub, zeta, xi, tol=1e-14, max_cycles=5000)
    for l in range(2):
        def f(pts, l=l):
            vals = []
            for a, b in pts:
                c = chi.copy()
                c[0, l], c[1, l] = a, b
                vals.append(chi_tilde_objective(c, zeta, xi, sub)[l])
            return np.array(vals)
        best = grid_argmin_nd(f, chi[:, l], half_width=6.0, points=25, final_step=1e-5)
        np.testing.assert_allclose(chi[:, l], best, atol=1e-3)


def test_chi_tilde_update_monotone():
    sub = make_sub(5, 4, seed=4)
    chi, zeta, xi = random_state(sub, 44)
    prev = chi_tilde_objective(chi, zeta, xi, sub)
    for _ in range(10):
        chi = chi_tilde_update(sub, zeta, xi, warm=chi, max_cycles=1)
        cur = chi_tilde_objective(chi, zeta, xi, sub)
        assert np.all(cur <= prev + 1e-12)
        prev = cur


def test_zeta_tilde_update_examples():
    sub = make_sub(3, 3, nu=0.0)
    chi, _, xi = random_state(sub, 5)
    expected = row_differences(chi, sub.diff_op) + xi
    expected[~sub.diff_op.mask] = 0
    np.testing.assert_allclose(zeta_tilde_update(chi, xi, sub), expected)
    sub = make_sub(3, 3, nu=0.5)
    flat = np.tile(np.arange(3.0), (3, 1))
    assert not zeta_tilde_update(flat, np.zeros((3, 3)), sub).any()


def test_zeta_tilde_update_matches_entrywise_grid():
    sub = make_sub(2, 3, seed=6, nu=0.8, rho_tilde=1.3)
    chi, _, xi = random_state(sub, 66)
    z = zeta_tilde_update(chi, xi, sub)
    v = row_differences(chi, sub.diff_op) + xi
    for j in range(2):
        for l in range(2):
            f = lambda g: sub.nu_vec[l] * np.abs(g) + 0.5 * sub.rho_tilde * (g - v[j, l]) ** 2
            assert abs(z[j, l] - grid_argmin_1d(f, -8, 8, 1e-5)) <= 1e-4


def test_adjoint_identity():
    op = DifferenceOperator(4, circ=True)
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    assert np.sum(row_differences(a, op) * b) == pytest.approx(
        np.sum(a * row_differences_adjoint(b, op)))


def test_solve_zeta_update_limits():
    sub = make_sub(4, 3, seed=7, nu=0.0)
    Z, state = solve_zeta_update(sub)
    np.testing.assert_allclose(Z, soft_threshold(sub.Omega, sub.lambda1_vec[:, None]),
                               atol=1e-6)
    sub = make_sub(4, 3, seed=7, nu=0.0, lam1=0.0)
    Z, _ = solve_zeta_update(sub)
    np.testing.assert_array_equal(Z, sub.Omega)


@pytest.mark.parametrize("circ", [False, True])
def test_solve_zeta_update_matches_row_grid(circ):
    """Rows decouple, so each row of a 3x3 instance is a 3-variable grid search."""
    sub = make_sub(3, 3, seed=8, circ=circ)
    Z, state = solve_zeta_update(sub)
    assert state.converged
    for l in range(3):
        def f(pts, l=l):
            D = pts - np.roll(pts, -1, axis=1)
            D[:, ~sub.diff_op.mask] = 0
            return (sub.lambda1_vec[l] * np.abs(pts).sum(axis=1)
                    + sub.nu_vec[l] * np.abs(D).sum(axis=1)
                    + 0.5 * sub.rho * ((pts - sub.Omega[l]) ** 2).sum(axis=1))
        best = grid_argmin_nd(f, sub.Omega[l], half_width=8.0, points=41)
        np.testing.assert_allclose(Z[l], best, atol=1e-3)


@pytest.mark.parametrize("seed", range(3))
def test_solve_zeta_update_matches_cvxpy(seed):
    sub = make_sub(6, 4, seed=seed, nu=1.2, rho=0.8, rho_tilde=1.5)
    Z, state = solve_zeta_update(sub, eps_abs=1e-9, eps_rel=1e-8, max_iter=5000)
    ref = cvxpy_zeta_prox(sub.Omega, sub.lambda1_vec, sub.nu_vec, sub.rho, sub.diff_op.mask)
    np.testing.assert_allclose(Z, ref, atol=1e-5)
    assert zeta_objective(Z, sub) <= zeta_objective(ref, sub) + 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.booleans(), st.integers(0, 10_000))
def test_backends_agree(p, t, circ, seed):
    sub = make_sub(p, t, seed=seed, circ=circ)
    Zn, sn = solve_zeta_update(sub, backend="numba")
    Zp, sp = solve_zeta_update(sub, backend="numpy")
    np.testing.assert_allclose(Zn, Zp, atol=1e-12)
    assert sn.iterations == sp.iterations


def test_warm_start_reuses_state():
    sub = make_sub(5, 4, seed=9)
    _, cold = solve_zeta_update(sub)
    _, warm = solve_zeta_update(sub, warm=cold)
    assert warm.iterations <= 2 < cold.iterations


def test_max_iter_reports_nonconvergence():
    sub = make_sub(5, 4, seed=10, nu=3.0)
    Z, state = solve_zeta_update(sub, max_iter=2)
    assert not state.converged and state.iterations == 2
    assert np.all(np.isfinite(Z))


def test_single_task_ring_is_lasso():
    sub = make_sub(4, 1, seed=11, circ=True)
    assert not sub.coupled
    Z, _ = solve_zeta_update(sub)
    np.testing.assert_allclose(Z, lasso_prox(sub))


def test_subproblem_validation():
    with pytest.raises(ValueError):
        make_sub(3, 2, nu=-1.0)
    with pytest.raises(ValueError):
        ZetaSubproblem(np.zeros((2, 2)), np.ones(2), 0.0, 1.0, 1.0, DifferenceOperator(2))
    with pytest.raises(ValueError):
        solve_zeta_update(make_sub(3, 3), backend="fortran")


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(2, 5), st.booleans(), st.integers(0, 10_000))
def test_prox_beats_center_and_lasso(p, t, circ, seed):
    sub = make_sub(p, t, seed=seed, circ=circ)
    Z, _ = solve_zeta_update(sub)
    value = zeta_objective(Z, sub)
    assert value <= zeta_objective(sub.Omega, sub) + 1e-8
    assert value <= zeta_objective(lasso_prox(sub), sub) + 1e-8


@given(st.floats(-1e3, 1e3), st.floats(0, 1e3))
def test_soft_threshold_keeps_sign(a, kappa):
    assert soft_threshold(a, kappa) * a >= 0


def test_inner_residuals_below_tolerance_at_convergence():
    sub = make_sub(6, 4, seed=12, nu=0.9)
    _, state = solve_zeta_update(sub, backend="numpy")
    assert state.converged and state.primal_res >= 0 and state.dual_res >= 0
    r = row_differences(state.chi_t, sub.diff_op) - state.zeta_t
    assert np.linalg.norm(r) == pytest.approx(state.primal_res)
