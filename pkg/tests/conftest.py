import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from auvgame import lq
from auvgame.approx import QuadraticBasis, WeightSet
from auvgame.game import GameCost
from auvgame.vehicle import AUVPlant, VehicleParams

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PITCH_LIMIT = np.pi / 2 - 0.1


@pytest.fixture(scope="session")
def params():
    return VehicleParams.default()


@pytest.fixture(scope="session")
def auv(params):
    return AUVPlant(params)


@pytest.fixture(scope="session")
def di_game():
    """Double integrator, Q=I, R=1, gamma=2, with its GARE solution and ideal weights."""
    plant = lq.double_integrator()
    cost = GameCost(np.eye(2), np.eye(1), 2.0)
    basis = QuadraticBasis(2)
    sol = lq.gare_solve(plant, cost.Q, cost.R, cost.gamma)
    W = lq.ideal_weights(sol, basis)
    return {"plant": plant, "cost": cost, "basis": basis, "P": sol.P, "W": W,
            "weights": WeightSet(W, W, W, 100.0)}


def random_state(rng, pos=1.0, ang=0.5, vel=0.5):
    eta = np.concatenate([rng.uniform(-pos, pos, 3), rng.uniform(-ang, ang, 3)])
    return np.concatenate([eta, rng.uniform(-vel, vel, 6)])
