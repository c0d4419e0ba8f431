import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from auvgame.game import (GameCost, as_matrix, check_gain_conditions, estimate_lipschitz,
                          hamiltonian, local_cost, policies_from_gradient)
from auvgame.learner import LearnerGains
from auvgame.vehicle import AffineDynamics

vec = lambda n: st.lists(st.floats(-3, 3), min_size=n, max_size=n).map(np.array)


def cost(n=12, k=6, r=1.0, gamma=1.0):
    return GameCost(np.eye(n), r * np.eye(k), gamma)


def test_local_cost_examples():
    e1_12, e1_6 = np.eye(12)[0], np.eye(6)[0]
    assert local_cost(np.zeros(12), np.zeros(6), np.zeros(6), cost()) == 0.0
    assert local_cost(e1_12, e1_6, e1_6, cost(gamma=1.0)) == 1.0
    assert local_cost(np.zeros(12), np.zeros(6), e1_6, cost(gamma=2.0)) == -4.0


@given(vec(4), vec(2), vec(2), st.floats(-5, 5))
def test_local_cost_homogeneous(z, u1, u2, a):
    c = GameCost(np.diag([1, 2, 3, 4.0]), np.array([[2.0, 0.5], [0.5, 1.0]]), 0.7)
    assert np.isclose(local_cost(a * z, a * u1, a * u2, c), a * a * local_cost(z, u1, u2, c),
                      rtol=1e-12, atol=1e-12)


def test_policies_examples():
    g = np.vstack([np.zeros((6, 6)), np.eye(6)])
    u1, u2 = policies_from_gradient(np.zeros(12), g, cost())
    assert not u1.any() and not u2.any()
    v = np.arange(1.0, 7.0)
    u1, u2 = policies_from_gradient(np.concatenate([np.zeros(6), v]), g, cost(gamma=1.0))
    np.testing.assert_array_equal(u1, -v / 2)
    np.testing.assert_array_equal(u2, v / 2)


@given(vec(12), vec(12), st.floats(-3, 3))
def test_policies_linear_in_gradient(a, b, s):
    g = np.random.default_rng(0).normal(size=(12, 6))
    c = cost(r=2.0, gamma=1.5)
    ua, va = policies_from_gradient(a, g, c)
    ub, vb = policies_from_gradient(b, g, c)
    u, v = policies_from_gradient(a + s * b, g, c)
    np.testing.assert_allclose(u, ua + s * ub, atol=1e-9)
    np.testing.assert_allclose(v, va + s * vb, atol=1e-9)


def test_policies_match_oracle_gains(di_game):
    P, B, c = di_game["P"], di_game["plant"].B, di_game["cost"]
    for z in np.random.default_rng(1).normal(size=(50, 2)):
        u1, u2 = policies_from_gradient(2 * P @ z, B, c)
        np.testing.assert_allclose(u1, -c.R_inv @ B.T @ P @ z, atol=1e-8)
        np.testing.assert_allclose(u2, B.T @ P @ z / c.gamma**2, atol=1e-8)


def test_hamiltonian_examples(auv):
    c = cost()
    z = np.random.default_rng(2).normal(size=12) * 0.1
    dyn = auv.affine(z)
    assert np.isclose(hamiltonian(z, np.zeros(12), np.zeros(6), np.zeros(6), dyn, c), z @ z)
    assert hamiltonian(np.zeros(12), np.zeros(12), np.zeros(6), np.zeros(6),
                       auv.affine(np.zeros(12)), c) == 0.0


def test_hji_residual_on_lq_benchmark(di_game):
    P, plant, c = di_game["P"], di_game["plant"], di_game["cost"]
    rng = np.random.default_rng(3)
    d = rng.normal(size=(1000, 2))
    d *= rng.uniform(size=(1000, 1)) ** 0.5 / np.linalg.norm(d, axis=1, keepdims=True)
    for z in d:
        grad = 2 * P @ z
        u1, u2 = policies_from_gradient(grad, plant.B, c)
        assert abs(hamiltonian(z, grad, u1, u2, plant.affine(z), c)) <= 1e-6


@given(vec(12), vec(12), vec(6))
def test_hamiltonian_saddle(z, grad, pert):
    rng = np.random.default_rng(4)
    g = rng.normal(size=(12, 6))
    dyn = AffineDynamics(rng.normal(size=12), g)
    c = GameCost(np.eye(12), np.diag([1, 2, 3, 1, 2, 3.0]), 1.3)
    u1, u2 = policies_from_gradient(grad, g, c)
    H = hamiltonian(z, grad, u1, u2, dyn, c)
    tol = 1e-9 * (1 + abs(H))
    assert hamiltonian(z, grad, u1 + pert, u2, dyn, c) >= H - tol
    assert hamiltonian(z, grad, u1, u2 + pert, dyn, c) <= H + tol


def test_cost_validation():
    with pytest.raises(ValueError):
        GameCost(-np.eye(2), np.eye(1), 1.0)
    with pytest.raises(ValueError):
        GameCost(np.eye(2), np.zeros((1, 1)), 1.0)
    with pytest.raises(ValueError):
        GameCost(np.eye(2), np.eye(1), 0.0)
    with pytest.raises(ValueError):
        GameCost(np.eye(2), np.eye(1), 2.0, theorem_mode=True)
    GameCost(np.eye(2), 4 * np.eye(1), 2.0, theorem_mode=True)


def test_as_matrix_forms():
    np.testing.assert_array_equal(as_matrix(2.0, 3), 2 * np.eye(3))
    np.testing.assert_array_equal(as_matrix([1, 2], 2), np.diag([1.0, 2.0]))
    with pytest.raises(ValueError):
        as_matrix([1, 2, 3], 2)


@pytest.mark.parametrize("r, gamma2, expected", [
    (1.0, 2.0, False),
    (4.0, 2.0, True),
    (2.0, 2.0, True),
    (0.5, 0.25, True),
    (3.0, 3.0001, False),
])
def test_r_gamma_condition_table(r, gamma2, expected):
    c = GameCost(np.eye(2), np.diag([r, r + 1.0]), np.sqrt(gamma2))
    rep = check_gain_conditions(c, LearnerGains(1.0, 1.0, 1.0), 1.0, 1.0, 0.0)
    assert rep["r_gam_cond"].passed is expected
    assert rep["r_gam_cond"].lhs == pytest.approx(r)


def test_conditions_reduce_with_exact_basis():
    c = GameCost(np.diag([0.5, 2.0]), np.eye(1), 1.0)
    gains = LearnerGains(2.0, 1.0, 0.6)
    rep = check_gain_conditions(c, gains, 0.41, 3.7, 0.0)
    assert rep["Q_sc"].rhs == 0.0 and rep["Q_sc"].lhs == pytest.approx(0.5) and rep["Q_sc"].passed
    assert rep["Wc_sc"].rhs == pytest.approx(0.4)
    assert rep["Wc_sc"].passed
    assert not check_gain_conditions(c, gains, 0.39, 3.7, 0.0)["Wc_sc"].passed


def test_conditions_general_formula():
    c = GameCost(np.eye(2), np.eye(1), 1.0)
    gains = LearnerGains(2.0, 1.0, 1.0)
    rep = check_gain_conditions(c, gains, 1.0, 2.0, 0.5, epsilon_free=0.25)
    assert rep["Q_sc"].rhs == pytest.approx(2.0 * 2.0 * 0.5 * 0.25 / 2)
    assert rep["Wc_sc"].rhs == pytest.approx(2.0 * 0.5 / (2 * 0.25) + 2.0 / 4.0)
    assert rep.to_dict()["all_pass"] is rep.passed


def test_lipschitz_estimate_linear(di_game):
    pts = np.random.default_rng(5).normal(size=(500, 2))
    est = estimate_lipschitz(di_game["plant"], pts)
    assert est <= np.linalg.norm(di_game["plant"].A, 2) + 1e-12
    assert est > 0.9
