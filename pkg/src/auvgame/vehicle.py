"""6-DOF underwater vehicle model.

Pose ``eta = [x, y, z, phi, theta, psi]`` is earth-fixed (Z-Y-X Euler
angles), velocity ``nu = [u, v, w, p, q, r]`` is body-fixed, and the game
state is ``zeta = [eta, eta_dot]``. All units SI.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _kernels as K

DEFAULT_THETA_MARGIN = 0.1


class PitchSingularityError(ValueError):
    """Pitch too close to +-pi/2 for the Euler-angle kinematics."""


class AffineDynamics(NamedTuple):
    f: np.ndarray  # drift, (n,)
    g: np.ndarray  # input map, (n, k)


def check_pitch(eta, theta_margin: float = DEFAULT_THETA_MARGIN) -> None:
    eta = np.asarray(eta, dtype=float)
    theta = eta[4]
    if not np.isfinite(theta) or abs(theta) > np.pi / 2 - theta_margin:
        raise PitchSingularityError(
            f"|theta|={abs(theta):.6g} exceeds pi/2 - {theta_margin:g}"
        )


def _pose(eta, theta_margin):
    eta = np.ascontiguousarray(eta, dtype=float)
    if eta.shape != (6,):
        raise ValueError(f"pose must have shape (6,), got {eta.shape}")
    check_pitch(eta, theta_margin)
    return eta


def rotation_J1(eta, theta_margin: float = DEFAULT_THETA_MARGIN) -> np.ndarray:
    """Body-to-earth rotation for translational velocity."""
    eta = _pose(eta, theta_margin)
    return K.j1(eta[3], eta[4], eta[5])


def euler_rate_map_J2(eta, theta_margin: float = DEFAULT_THETA_MARGIN) -> np.ndarray:
    """Map from body angular rates (p, q, r) to Euler-angle rates."""
    eta = _pose(eta, theta_margin)
    return K.j2(eta[3], eta[4])


def assemble_J(eta, theta_margin: float = DEFAULT_THETA_MARGIN) -> np.ndarray:
    return K.j_full(_pose(eta, theta_margin))


def assemble_J_inv(eta, theta_margin: float = DEFAULT_THETA_MARGIN) -> np.ndarray:
    """Block inverse ``diag(J1^T, J2^-1)``; never a general matrix inverse."""
    return K.j_inv_full(_pose(eta, theta_margin))


def jacobian_J_dot(eta, eta_dot, theta_margin: float = DEFAULT_THETA_MARGIN) -> np.ndarray:
    """Time derivative of ``J(eta(t))`` along the pose rate ``eta_dot``."""
    eta = _pose(eta, theta_margin)
    return K.j_dot_full(eta, np.ascontiguousarray(eta_dot, dtype=float))


def rotation_J1_batch(eulers) -> np.ndarray:
    """Vectorised J1 for an (N, 3) array of (phi, theta, psi). No pitch guard."""
    e = np.asarray(eulers, dtype=float)
    cf, sf = np.cos(e[:, 0]), np.sin(e[:, 0])
    ct, st = np.cos(e[:, 1]), np.sin(e[:, 1])
    cp, sp = np.cos(e[:, 2]), np.sin(e[:, 2])
    out = np.empty((e.shape[0], 3, 3))
    out[:, 0, 0] = cp * ct
    out[:, 0, 1] = -sp * cf + cp * st * sf
    out[:, 0, 2] = sp * sf + cp * st * cf
    out[:, 1, 0] = sp * ct
    out[:, 1, 1] = cp * cf + sp * st * sf
    out[:, 1, 2] = -cp * sf + sp * st * cf
    out[:, 2, 0] = -st
    out[:, 2, 1] = ct * sf
    out[:, 2, 2] = ct * cf
    return out


@dataclass(frozen=True)
class VehicleParams:
    """Rigid-body plus added-mass vehicle data.

    ``r_g`` and ``r_b`` are body-frame (z down) centres of gravity and
    buoyancy. Unless ``allow_non_neutral`` is set the constructor enforces
    exact neutral buoyancy with the CG directly below the CB, which is what
    makes the origin an equilibrium of the unforced vehicle.
    """

    M: np.ndarray
    D_lin: np.ndarray
    D_quad: np.ndarray
    weight_force: float
    buoyancy_force: float
    r_g: np.ndarray
    r_b: np.ndarray
    allow_non_neutral: bool = False
    M_inv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arr = lambda a, shape: np.ascontiguousarray(np.asarray(a, dtype=float).reshape(shape))
        M = arr(self.M, (6, 6))
        d_lin = arr(self.D_lin, (6, 6))
        d_quad = arr(self.D_quad, (6,))
        r_g = arr(self.r_g, (3,))
        r_b = arr(self.r_b, (3,))
        if not np.allclose(M, M.T, rtol=0, atol=1e-12 * np.abs(M).max()):
            raise ValueError("M must be symmetric")
        eig = np.linalg.eigvalsh(M)
        if eig[0] <= 0:
            raise ValueError(f"M must be positive definite (min eigenvalue {eig[0]:g})")
        if np.any(d_quad < 0):
            raise ValueError("D_quad coefficients must be non-negative")
        if not self.allow_non_neutral:
            if self.weight_force != self.buoyancy_force:
                raise ValueError(
                    "vehicle must be neutrally buoyant (weight_force == buoyancy_force); "
                    "set allow_non_neutral to override"
                )
            if r_g[0] != r_b[0] or r_g[1] != r_b[1] or not r_g[2] > r_b[2]:
                raise ValueError(
                    "centre of gravity must lie directly below the centre of buoyancy "
                    "(equal x, y and r_g z > r_b z); set allow_non_neutral to override"
                )
        for name, val in (("M", M), ("D_lin", d_lin), ("D_quad", d_quad), ("r_g", r_g), ("r_b", r_b)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "weight_force", float(self.weight_force))
        object.__setattr__(self, "buoyancy_force", float(self.buoyancy_force))
        object.__setattr__(self, "M_inv", np.linalg.inv(M))

    @property
    def m_lower(self) -> float:
        return float(np.linalg.eigvalsh(self.M)[0])

    @property
    def m_upper(self) -> float:
        return float(np.linalg.eigvalsh(self.M)[-1])

    def kernel_args(self):
        return (self.D_lin, self.D_quad, self.weight_force, self.buoyancy_force, self.r_g, self.r_b)

    @classmethod
    def from_dict(cls, doc: dict) -> "VehicleParams":
        M = np.asarray(doc["M"], dtype=float)
        if M.ndim == 1:
            M = np.diag(M)
        D_lin = np.asarray(doc["D_lin"], dtype=float)
        if D_lin.ndim == 1:
            D_lin = np.diag(D_lin)
        return cls(
            M=M,
            D_lin=D_lin,
            D_quad=doc.get("D_quad", np.zeros(6)),
            weight_force=doc["weight_force"],
            buoyancy_force=doc["buoyancy_force"],
            r_g=doc["r_g"],
            r_b=doc["r_b"],
            allow_non_neutral=bool(doc.get("allow_non_neutral", False)),
        )

    @classmethod
    def from_json(cls, path) -> "VehicleParams":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def default(cls) -> "VehicleParams":
        text = resources.files("auvgame.data").joinpath("default_vehicle.json").read_text()
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "M": self.M.tolist(),
            "D_lin": self.D_lin.tolist(),
            "D_quad": self.D_quad.tolist(),
            "weight_force": self.weight_force,
            "buoyancy_force": self.buoyancy_force,
            "r_g": self.r_g.tolist(),
            "r_b": self.r_b.tolist(),
            "allow_non_neutral": self.allow_non_neutral,
        }


def coriolis_matrix(nu, params: VehicleParams) -> np.ndarray:
    """Skew-symmetric Coriolis/centripetal matrix built from the full M."""
    return K.coriolis(params.M, np.ascontiguousarray(nu, dtype=float))


def damping_matrix(nu, params: VehicleParams) -> np.ndarray:
    return K.damping(params.D_lin, params.D_quad, np.ascontiguousarray(nu, dtype=float))


def restoring_forces(eta, params: VehicleParams) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    return K.restoring(
        params.weight_force, params.buoyancy_force, params.r_g, params.r_b, eta[3], eta[4]
    )


def body_accel(nu, eta, tau_b, tau_d, params: VehicleParams,
               theta_margin: float = DEFAULT_THETA_MARGIN) -> np.ndarray:
    """Body-frame acceleration from the rigid-body equations of motion."""
    eta = _pose(eta, theta_margin)
    tau = np.asarray(tau_b, dtype=float) + np.asarray(tau_d, dtype=float)
    return K.body_accel(
        np.ascontiguousarray(nu, dtype=float), eta, tau, params.M, *params.kernel_args()
    )


def _state(zeta, theta_margin):
    zeta = np.ascontiguousarray(zeta, dtype=float)
    if zeta.shape != (12,):
        raise ValueError(f"state must have shape (12,), got {zeta.shape}")
    if not np.all(np.isfinite(zeta)):
        raise ValueError("state is not finite")
    check_pitch(zeta[:6], theta_margin)
    return zeta


def earth_fixed_dynamics(zeta, params: VehicleParams,
                         theta_margin: float = DEFAULT_THETA_MARGIN):
    """Return ``(M_bar, C_bar, D_bar, g_bar)`` of the earth-frame dynamics."""
    zeta = _state(zeta, theta_margin)
    return K.earth_fixed(zeta, params.M, *params.kernel_args())


def control_affine(zeta, params: VehicleParams,
                   theta_margin: float = DEFAULT_THETA_MARGIN) -> AffineDynamics:
    """Drift ``f`` and input map ``g`` with ``zeta_dot = f + g (u1 + u2)``."""
    zeta = _state(zeta, theta_margin)
    f, g = K.auv_affine(zeta, params.M, params.M_inv, *params.kernel_args())
    return AffineDynamics(f, g)


class AUVPlant:
    """Plant adapter used by the learner and simulator.

    ``u1`` and ``u2`` are earth-frame generalised forces. The physical
    disturbance is specified body-frame and mapped by ``J^-T``.
    """

    n = 12
    k = 6

    def __init__(self, params: VehicleParams | None = None,
                 theta_margin: float = DEFAULT_THETA_MARGIN):
        self.params = params if params is not None else VehicleParams.default()
        self.theta_margin = float(theta_margin)
        self._args = (self.params.M, self.params.M_inv) + self.params.kernel_args()

    def check_state(self, zeta) -> None:
        check_pitch(np.asarray(zeta)[:6], self.theta_margin)

    def affine(self, zeta) -> AffineDynamics:
        return AffineDynamics(*K.auv_affine(zeta, *self._args))

    def affine_batch(self, Z):
        Z = np.ascontiguousarray(Z, dtype=float)
        for z in Z:
            self.check_state(z)
        return K.auv_affine_batch(Z, *self._args)

    def disturbance_input(self, zeta, tau_d) -> np.ndarray:
        """Earth-frame ``J^-T tau_d`` for a body-frame disturbance."""
        return K.j_inv_full(zeta[:6]).T @ tau_d

    def describe(self) -> dict:
        return {"kind": "auv", "theta_margin": self.theta_margin, "vehicle": self.params.to_dict()}
