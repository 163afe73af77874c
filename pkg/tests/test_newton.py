import numpy as np
import pytest
from scipy import optimize

from fusedlogit.model import task_nll
from fusedlogit.newton import (ChiSubproblem, DesignFactor, DualTransform, SingularDesignError,
                               chi_gradient, chi_hessian, chi_objective, h_inverse, h_map,
                               phi_gradient, phi_hessian, phi_objective, solve_chi_column,
                               solve_chi_columns)
from oracles import finite_difference_gradient, finite_difference_jacobian


def make_sub(n, d, seed=0, lam2=0.3, rho=1.0, omega_scale=0.5):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, d))])
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    omega = omega_scale * rng.normal(size=d + 1)
    l2 = np.full(d + 1, lam2)
    l2[0] = 0
    return ChiSubproblem(X, y, omega, l2, rho)


def test_chi_objective_examples():
    sub = make_sub(7, 3, omega_scale=0.0)
    assert chi_objective(np.zeros(4), sub) == pytest.approx(7 * np.log(2))
    sub0 = make_sub(7, 3, lam2=0.0, rho=1e-12)
    chi = np.random.default_rng(1).normal(size=4)
    assert chi_objective(chi, sub0) == pytest.approx(task_nll(chi, sub0.X, sub0.y), rel=1e-9)
    sub = make_sub(9, 4, seed=3)
    chi = np.random.default_rng(4).normal(size=5)
    parts = (task_nll(chi, sub.X, sub.y) + 0.5 * np.sum(sub.lambda2_vec * chi ** 2)
             + 0.5 * sub.rho * np.sum((chi - sub.omega) ** 2))
    assert chi_objective(chi, sub) == pytest.approx(parts, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_chi_derivatives_match_finite_differences(seed):
    sub = make_sub(15, 6, seed=seed)
    chi = np.random.default_rng(seed + 10).normal(size=7)
    g = chi_gradient(chi, sub)
    fd = finite_difference_gradient(lambda c: chi_objective(c, sub), chi)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(g))
    H = chi_hessian(chi, sub)
    fdH = finite_difference_jacobian(lambda c: chi_gradient(c, sub), chi)
    assert np.linalg.norm(H - fdH) <= 1e-4 * max(1.0, np.linalg.norm(H))


def test_chi_hessian_saturates():
    sub = make_sub(6, 2, seed=2)
    chi = np.zeros(3)
    chi[0] = 80.0
    sub.y[:] = 1.0
    np.testing.assert_allclose(chi_hessian(chi, sub), np.diag(sub.scale), atol=1e-10)


def test_h_map_examples():
    X = np.array([[1.0, 2.0]])
    sub = ChiSubproblem(X, np.array([1.0]), np.zeros(2), np.zeros(2), 1.0)
    tr = DualTransform(sub)
    np.testing.assert_allclose(h_map(np.array([1.0]), tr), [1, 2])
    np.testing.assert_allclose(h_inverse(np.array([1.0, 2.0]), tr), [1.0])


@pytest.mark.parametrize("seed", range(4))
def test_h_round_trip(seed):
    sub = make_sub(6, 20, seed=seed)
    tr = DualTransform(sub)
    gamma = np.random.default_rng(seed).normal(size=6)
    np.testing.assert_allclose(h_inverse(h_map(gamma, tr), tr), gamma, atol=1e-8)


def test_h_inverse_rank_deficient():
    sub = make_sub(5, 12, seed=1)
    X = sub.X.copy()
    X[1] = X[0]
    bad = ChiSubproblem(X, sub.y, sub.omega, sub.lambda2_vec, sub.rho)
    tr = DualTransform(bad)
    primal = solve_chi_column(bad, route="primal")
    if tr.factor.factorized:
        # resolved by jitter: flagged, and the dual solve still lands on the minimizer
        assert tr.jittered
        dual = solve_chi_column(bad, route="dual", factor=tr.factor)
        assert dual.jittered
        np.testing.assert_allclose(dual.chi, primal.chi, atol=1e-5)
    else:
        with pytest.raises(SingularDesignError, match="primal"):
            h_inverse(np.zeros(13), tr)
        assert solve_chi_column(bad).route == "primal"


def test_rank_one_gram_is_jitter_resolved():
    X = np.ones((3, 5))
    fac = DesignFactor(X, np.zeros(5), 1.0)
    assert fac.factorized and fac.jittered
    sub = ChiSubproblem(X, np.array([1.0, -1.0, 1.0]), 0.1 * np.arange(5.0), np.zeros(5), 1.0)
    dual = solve_chi_column(sub, route="dual", factor=fac)
    primal = solve_chi_column(sub, route="primal")
    assert dual.jittered
    np.testing.assert_allclose(dual.chi, primal.chi, atol=1e-8)


@pytest.mark.parametrize("seed", range(4))
def test_phi_derivatives_match_finite_differences(seed):
    sub = make_sub(8, 25, seed=seed)
    tr = DualTransform(sub)
    gamma = 0.3 * np.random.default_rng(seed).normal(size=8)
    g = phi_gradient(gamma, tr)
    fd = finite_difference_gradient(lambda v: phi_objective(v, tr), gamma)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(g))
    H = phi_hessian(gamma, tr)
    fdH = finite_difference_jacobian(lambda v: phi_gradient(v, tr), gamma)
    assert np.linalg.norm(H - fdH) <= 1e-4 * max(1.0, np.linalg.norm(H))


def test_phi_stationary_at_primal_minimizer():
    sub = make_sub(10, 30, seed=5)
    res = solve_chi_column(sub, route="primal", tol=1e-12)
    tr = DualTransform(sub)
    gamma = h_inverse(res.chi, tr)
    assert np.linalg.norm(phi_gradient(gamma, tr)) <= 1e-7
    assert np.linalg.norm(chi_gradient(res.chi, sub)) <= 1e-8


def test_primal_and_dual_routes_agree():
    sub = make_sub(10, 30, seed=7)
    primal = solve_chi_column(sub, route="primal")
    dual = solve_chi_column(sub, route="dual")
    assert dual.route == "dual" and primal.route == "primal"
    assert np.max(np.abs(primal.chi - dual.chi)) <= 1e-5


def test_solution_matches_generic_optimizer():
    sub = make_sub(20, 4, seed=8)
    res = solve_chi_column(sub)
    ref = optimize.minimize(chi_objective, np.zeros(5), args=(sub,),
                            jac=lambda c, s: chi_gradient(c, s), method="BFGS",
                            options={"gtol": 1e-10})
    np.testing.assert_allclose(res.chi, ref.x, atol=1e-6)


def test_objective_below_proximal_center():
    sub = make_sub(25, 3, seed=9, lam2=0.0)
    mle = optimize.minimize(lambda b: task_nll(b, sub.X, sub.y), np.zeros(4)).x
    sub.omega = mle + 1.0
    res = solve_chi_column(sub)
    assert chi_objective(res.chi, sub) <= chi_objective(sub.omega, sub)
    # on the segment between the MLE and omega
    direction = sub.omega - mle
    s = np.dot(res.chi - mle, direction) / np.dot(direction, direction)
    assert 0 < s < 1


def test_separable_data_has_finite_solution():
    X = np.column_stack([np.ones(6), np.arange(6.0) - 2.5])
    y = np.sign(X[:, 1])
    sub = ChiSubproblem(X, y, np.zeros(2), np.zeros(2), 0.5)
    res = solve_chi_column(sub)
    assert res.converged.all() and np.all(np.isfinite(res.chi))


def test_batched_columns_are_independent():
    rng = np.random.default_rng(11)
    X = np.column_stack([np.ones(12), rng.normal(size=(12, 5))])
    Y = np.where(rng.random((12, 3)) < 0.5, -1.0, 1.0)
    Omega = rng.normal(size=(6, 3))
    l2 = np.r_[0, np.full(5, 0.2)]
    batch = solve_chi_columns(X, Y, Omega, l2, 1.5)
    for k in range(3):
        single = solve_chi_column(ChiSubproblem(X, Y[:, k], Omega[:, k], l2, 1.5))
        np.testing.assert_allclose(batch.chi[:, k], single.chi, atol=1e-9)


def test_max_iter_flags_nonconvergence():
    sub = make_sub(30, 4, seed=12, omega_scale=5.0)
    res = solve_chi_column(sub, max_iter=1)
    assert not res.converged.all()
    assert np.all(np.isfinite(res.chi))


def test_design_factor_jitter_flag():
    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(4), rng.normal(size=(4, 9))])
    fac = DesignFactor(X, np.r_[0, np.full(9, 0.1)], 1.0)
    assert fac.factorized and not fac.jittered
