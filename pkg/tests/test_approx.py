import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from auvgame import lq
from auvgame.approx import (QuadraticBasis, QuadraticQuarticBasis, WeightSet, bellman_error,
                            bellman_error_unmeasurable, g_matrices, make_basis, policy_hat,
                            regressor, value_estimate)
from auvgame.game import GameCost, policies_from_gradient
from auvgame.vehicle import AffineDynamics

from conftest import random_state

vec = lambda n, lim=2.0: st.lists(st.floats(-lim, lim), min_size=n, max_size=n).map(np.array)


def test_quadratic_basis_order_and_size():
    b = QuadraticBasis(3)
    assert b.m == 6
    z = np.array([2.0, 3.0, 5.0])
    np.testing.assert_array_equal(b.sigma(z), [4, 6, 10, 9, 15, 25])
    assert QuadraticBasis(12).m == 78
    np.testing.assert_array_equal(QuadraticBasis(12).sigma(np.zeros(12)), 0.0)


@pytest.mark.parametrize("name", ["quadratic", "quadratic_quartic"])
def test_jacobian_finite_difference(name):
    b = make_basis(name, 5)
    rng = np.random.default_rng(0)
    h = 1e-6
    for z in rng.normal(size=(100, 5)):
        an = b.jacobian(z)
        fd = np.column_stack([(b.sigma(z + h * e) - b.sigma(z - h * e)) / (2 * h) for e in np.eye(5)])
        assert np.linalg.norm(fd - an) <= 1e-6 * max(1.0, np.linalg.norm(an))


def test_jacobian_batch_matches():
    for b in (QuadraticBasis(4), QuadraticQuarticBasis(4)):
        Z = np.random.default_rng(1).normal(size=(7, 4))
        np.testing.assert_array_equal(b.jacobian_batch(Z), np.stack([b.jacobian(z) for z in Z]))


def test_unknown_basis():
    with pytest.raises(ValueError, match="unknown basis"):
        make_basis("fourier", 3)


def test_weightset_validation():
    with pytest.raises(ValueError):
        WeightSet(np.zeros(3), np.zeros(2), np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        WeightSet(np.zeros(3), np.zeros(3), np.zeros(3), 0.0)


def test_value_estimate(di_game):
    b = QuadraticBasis(12)
    z = random_state(np.random.default_rng(2))
    assert value_estimate(np.ones(b.m), np.zeros(12), b) == 0.0
    assert value_estimate(np.eye(b.m)[5], z, b) == b.sigma(z)[5]
    P, W = di_game["P"], di_game["W"]
    for z in np.random.default_rng(3).normal(size=(50, 2)):
        assert abs(value_estimate(W, z, di_game["basis"]) - z @ P @ z) <= 1e-10 * (1 + z @ z)


def test_policy_hat_examples(auv):
    b = QuadraticBasis(12)
    c = GameCost(np.eye(12), np.eye(6), 1.0)
    z = random_state(np.random.default_rng(4))
    dyn = auv.affine(z)
    assert not policy_hat(np.zeros(b.m), z, b, dyn, c, 1).any()
    W = np.random.default_rng(5).normal(size=b.m)
    np.testing.assert_allclose(policy_hat(W, z, b, dyn, c, 2), -policy_hat(W, z, b, dyn, c, 1), rtol=1e-14)
    with pytest.raises(ValueError):
        policy_hat(W, z, b, dyn, c, 3)


def test_policy_hat_matches_gradient_policies(di_game):
    b, c, W, plant = di_game["basis"], di_game["cost"], di_game["W"], di_game["plant"]
    for z in np.random.default_rng(6).normal(size=(50, 2)):
        dyn = plant.affine(z)
        u1, u2 = policies_from_gradient(b.jacobian(z).T @ W, dyn.g, c)
        np.testing.assert_allclose(policy_hat(W, z, b, dyn, c, 1), u1, atol=1e-10)
        np.testing.assert_allclose(policy_hat(W, z, b, dyn, c, 2), u2, atol=1e-10)


def test_regressor_at_origin(auv):
    b = QuadraticBasis(12)
    omega, p = regressor(np.zeros(12), np.zeros(6), np.zeros(6), b, auv.affine(np.zeros(12)))
    assert not omega.any() and p == 1.0


@given(vec(12, 5.0), vec(6, 50.0), vec(6, 50.0))
def test_regressor_normalised_bound(z, u1, u2):
    b = QuadraticBasis(12)
    g = np.random.default_rng(7).normal(size=(12, 6))
    omega, p = regressor(z, u1, u2, b, AffineDynamics(np.sin(z), g))
    assert p >= 1.0
    assert np.linalg.norm(omega) / p < 1.0


def test_regressor_composition(di_game):
    b, plant = di_game["basis"], di_game["plant"]
    rng = np.random.default_rng(8)
    for z in rng.normal(size=(20, 2)):
        u1, u2 = rng.normal(size=1), rng.normal(size=1)
        zdot = plant.A @ z + plant.B @ (u1 + u2)
        omega, _ = regressor(z, u1, u2, b, plant.affine(z))
        np.testing.assert_allclose(omega, b.jacobian(z) @ zdot, atol=1e-10)


def test_bellman_error_zero_state(auv):
    b = QuadraticBasis(12)
    c = GameCost(np.eye(12), np.eye(6), 2.0)
    W = np.random.default_rng(9).normal(size=b.m)
    d, omega, p = bellman_error(np.zeros(12), WeightSet(W, W, W, 100.0), b, auv.affine(np.zeros(12)), c)
    assert d == 0.0


def test_bellman_error_at_ideal_weights(di_game):
    b, c, plant, ws = di_game["basis"], di_game["cost"], di_game["plant"], di_game["weights"]
    for z in np.random.default_rng(10).uniform(-1, 1, (1000, 2)):
        assert abs(bellman_error(z, ws, b, plant.affine(z), c)[0]) <= 1e-8


@given(vec(2), st.floats(-3, 3), st.integers(0, 2))
def test_bellman_error_affine_in_critic(z, step, k):
    plant = lq.double_integrator()
    c = GameCost(np.eye(2), np.eye(1), 2.0)
    b = QuadraticBasis(2)
    rng = np.random.default_rng(11)
    Wc, Wa1, Wa2 = rng.normal(size=(3, 3))
    dyn = plant.affine(z)
    d0, omega, _ = bellman_error(z, WeightSet(Wc, Wa1, Wa2, 10.0), b, dyn, c)
    d1, _, _ = bellman_error(z, WeightSet(Wc + step * np.eye(3)[k], Wa1, Wa2, 10.0), b, dyn, c)
    assert d1 - d0 == pytest.approx(step * omega[k], abs=1e-12 * (1 + abs(d0)))


def test_unmeasurable_form_agrees(di_game):
    b, c, plant, W = di_game["basis"], di_game["cost"], di_game["plant"], di_game["W"]
    rng = np.random.default_rng(12)
    for _ in range(200):
        z = rng.normal(size=2)
        ws = WeightSet(*(W + 0.3 * rng.normal(size=(3, 3))), 10.0)
        dyn = plant.affine(z)
        meas = bellman_error(z, ws, b, dyn, c)[0]
        unmeas = bellman_error_unmeasurable(z, ws, W, b, dyn, c)
        assert unmeas == pytest.approx(meas, abs=1e-10 * (1 + abs(meas)))


def test_g_matrices_examples(auv):
    b = QuadraticBasis(12)
    z = random_state(np.random.default_rng(13))
    dyn = auv.affine(z)
    gm = g_matrices(z, b, dyn, GameCost(np.eye(12), np.eye(6), 1.0), check=True)
    np.testing.assert_allclose(gm.G1, dyn.g @ dyn.g.T, atol=1e-15)
    np.testing.assert_allclose(gm.G2, gm.G1, atol=1e-15)
    assert np.linalg.eigvalsh(gm.Gs1)[0] >= -1e-10
    S = b.jacobian(z)
    naive = np.zeros((b.m, b.m))
    for i in range(b.m):
        for j in range(b.m):
            naive[i, j] = sum(S[i, a] * gm.G1[a, c] * S[j, c] for a in range(12) for c in range(12))
    np.testing.assert_allclose(gm.Gs1, naive, atol=1e-14)
