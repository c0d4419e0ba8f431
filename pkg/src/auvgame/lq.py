"""Linear-quadratic zero-sum game oracle.

For ``z_dot = A z + B (u1 + u2)`` and a quadratic value ``V = z'Pz`` the
HJI equation collapses to the game algebraic Riccati equation

    A'P + PA + Q - P B (R^-1 - gamma^-2 I) B'P = 0.

:func:`gare_solve` finds its stabilising solution by Newton (Kleinman)
iteration, starting from the LQR solution and stepping ``1/gamma^2`` in.
:func:`hamiltonian_eigen_solve` is an unrelated eigenvector route used to
cross-check it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .approx import QuadraticBasis, WeightSet, policy_hat
from .game import policies_from_gradient, r_gamma_ok
from .vehicle import AffineDynamics

NEWTON_TOL = 1e-12
ACCEPT_TOL = 1e-10
MAX_NEWTON = 100
CONTINUATION_STEPS = 10


class GareNotConverged(RuntimeError):
    def __init__(self, message: str, residual_history: list[float]):
        super().__init__(message)
        self.residual_history = residual_history


class LinearPlant:
    """Linear plant ``z_dot = A z + B (u1 + u2)``; doubles as a sim plant."""

    def __init__(self, A, B, name: str = "linear"):
        self.A = np.ascontiguousarray(np.atleast_2d(np.asarray(A, dtype=float)))
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        self.B = np.ascontiguousarray(B)
        self.n, self.k = self.B.shape
        if self.A.shape != (self.n, self.n):
            raise ValueError(f"A has shape {self.A.shape}, expected ({self.n}, {self.n})")
        self.name = name

    def check_state(self, zeta) -> None:
        pass

    def affine(self, zeta) -> AffineDynamics:
        return AffineDynamics(self.A @ zeta, self.B)

    def affine_batch(self, Z):
        Z = np.asarray(Z, dtype=float)
        F = np.ascontiguousarray(Z @ self.A.T)
        G = np.ascontiguousarray(np.broadcast_to(self.B, (Z.shape[0], self.n, self.k)))
        return F, G

    def disturbance_input(self, zeta, tau_d) -> np.ndarray:
        return tau_d

    def describe(self) -> dict:
        return {"kind": "linear", "name": self.name, "A": self.A.tolist(), "B": self.B.tolist()}


@dataclass
class GareSolution:
    P: np.ndarray
    residual: float
    iterations: int
    residual_abs: float = 0.0
    history: list = field(default_factory=list)

    @property
    def value_matrix(self) -> np.ndarray:
        return self.P


def _effective_s(R, inv_gamma2):
    k = R.shape[0]
    return np.linalg.inv(R) - inv_gamma2 * np.eye(k)


def gare_residual(A, B, Q, R, gamma, P) -> np.ndarray:
    inv_g2 = 0.0 if not np.isfinite(gamma) else 1.0 / gamma**2
    BSB = B @ _effective_s(R, inv_g2) @ B.T
    return A.T @ P + P @ A + Q - P @ BSB @ P


def _scaled_residual(A, Q, P, F):
    scale = max(1.0, np.linalg.norm(Q) + 2.0 * np.linalg.norm(A.T @ P))
    return float(np.linalg.norm(F) / scale)


def _is_hurwitz(M) -> bool:
    return bool(np.all(np.linalg.eigvals(M).real < 0))


def _initial_gain(A, B):
    """Stabilising state feedback by Bass's shifted-Lyapunov construction."""
    n = A.shape[0]
    if _is_hurwitz(A):
        return np.zeros((B.shape[1], n))
    beta = np.linalg.norm(A, 2) + 1.0
    Ashift = -(A + beta * np.eye(n))
    X = solve_continuous_lyapunov(Ashift, -2.0 * B @ B.T)
    K = B.T @ np.linalg.solve(X, np.eye(n))
    if not _is_hurwitz(A - B @ K):
        raise GareNotConverged("(A, B) does not appear stabilisable", [])
    return K


def _newton(A, B, Q, S, P, history):
    """Kleinman iteration for A'P + PA + Q - P B S B'P = 0 from a stabilising P."""
    BSB = B @ S @ B.T
    best = np.inf
    for it in range(1, MAX_NEWTON + 1):
        Acl = A - BSB @ P
        if not _is_hurwitz(Acl):
            raise GareNotConverged("Newton iterate lost closed-loop stability", history)
        P_new = solve_continuous_lyapunov(Acl.T, -(Q + P @ BSB @ P))
        P_new = 0.5 * (P_new + P_new.T)
        if not np.all(np.isfinite(P_new)):
            raise GareNotConverged("Newton iterate is not finite", history)
        res = _scaled_residual(A, Q, P_new, A.T @ P_new + P_new @ A + Q - P_new @ BSB @ P_new)
        history.append(res)
        P = P_new
        if res <= NEWTON_TOL:
            return P, it
        if res >= best and best <= ACCEPT_TOL:
            # stagnated at round-off below the acceptance level
            return P, it
        best = min(best, res)
    return P, MAX_NEWTON


def gare_solve(plant: LinearPlant, Q, R, gamma: float, theorem_mode: bool = False) -> GareSolution:
    """Stabilising solution of the game Riccati equation.

    ``gamma = inf`` gives the plain LQR solution. Raises
    :class:`GareNotConverged` (with the residual history) when no
    stabilising solution is reached, which is how an attenuation level
    below the achievable one shows up.
    """
    A, B = plant.A, plant.B
    Q = np.asarray(Q, dtype=float)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if theorem_mode and not r_gamma_ok(np.linalg.eigvalsh(R)[0], gamma):
        raise ValueError("theorem mode requires lambda_min(R) >= gamma^2")
    history: list[float] = []
    K0 = _initial_gain(A, B)
    P = solve_continuous_lyapunov((A - B @ K0).T, -(Q + K0.T @ R @ K0))
    P = 0.5 * (P + P.T)
    total = 0
    P, it = _newton(A, B, Q, np.linalg.inv(R), P, history)
    total += it
    if np.isfinite(gamma):
        inv_g2 = 1.0 / gamma**2
        for step in range(1, CONTINUATION_STEPS + 1):
            S = _effective_s(R, inv_g2 * step / CONTINUATION_STEPS)
            P, it = _newton(A, B, Q, S, P, history)
            total += it
    F = gare_residual(A, B, Q, R, gamma, P)
    res = _scaled_residual(A, Q, P, F)
    if not res <= ACCEPT_TOL:
        raise GareNotConverged(f"residual {res:.3e} above {ACCEPT_TOL:g}", history)
    return GareSolution(P=P, residual=res, iterations=total,
                        residual_abs=float(np.linalg.norm(F)), history=history)


def hamiltonian_eigen_solve(A, B, Q, S) -> np.ndarray:
    """Riccati solution from the stable invariant subspace of the Hamiltonian.

    Solves ``A'P + PA + Q - P B S B'P = 0``; use ``S = R^-1`` for LQR.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n = A.shape[0]
    H = np.block([[A, -B @ np.atleast_2d(S) @ B.T], [-np.asarray(Q, dtype=float), -A.T]])
    lam, V = np.linalg.eig(H)
    stable = V[:, lam.real < 0]
    if stable.shape[1] != n:
        raise np.linalg.LinAlgError("Hamiltonian has eigenvalues on the imaginary axis")
    P = np.real(stable[n:] @ np.linalg.inv(stable[:n]))
    return 0.5 * (P + P.T)


def ideal_weights(sol, basis) -> np.ndarray:
    """Weights reproducing ``z'Pz`` exactly on the quadratic monomial basis."""
    if type(basis) is not QuadraticBasis:
        raise ValueError("ideal weights are only defined for the plain quadratic basis")
    P = sol.P if isinstance(sol, GareSolution) else np.atleast_2d(np.asarray(sol, dtype=float))
    if P.shape != (basis.n, basis.n):
        raise ValueError(f"P has shape {P.shape}, basis expects ({basis.n}, {basis.n})")
    P = 0.5 * (P + P.T)
    return np.array([P[i, i] if i == j else 2.0 * P[i, j] for i, j in basis.pairs])


def compare_weights(learned: WeightSet, ideal, basis=None, plant=None, cost=None,
                    n_test: int = 200, radius: float = 1.0, seed: int = 0) -> dict:
    """Relative weight errors and, if a plant is given, worst policy error."""
    W = np.asarray(ideal, dtype=float)
    nw = np.linalg.norm(W)
    rel = lambda w: float(np.linalg.norm(w - W) / nw) if nw > 0 else float(np.linalg.norm(w))
    out = {"Wc_rel_error": rel(learned.Wc), "Wa1_rel_error": rel(learned.Wa1),
           "Wa2_rel_error": rel(learned.Wa2)}
    if basis is not None and plant is not None and cost is not None:
        rng = np.random.default_rng(seed)
        d = rng.normal(size=(n_test, basis.n))
        d *= (radius * rng.uniform(size=(n_test, 1)) ** (1.0 / basis.n)) / np.linalg.norm(d, axis=1, keepdims=True)
        e1 = e2 = 0.0
        for z in d:
            dyn = plant.affine(z)
            u1s, u2s = policies_from_gradient(basis.jacobian(z).T @ W, dyn.g, cost)
            e1 = max(e1, float(np.linalg.norm(policy_hat(learned.Wa1, z, basis, dyn, cost, 1) - u1s)))
            e2 = max(e2, float(np.linalg.norm(policy_hat(learned.Wa2, z, basis, dyn, cost, 2) - u2s)))
        out["u1_max_error"] = e1
        out["u2_max_error"] = e2
    return out


# --------------------------------------------------------------------------
# shipped benchmarks
# --------------------------------------------------------------------------


def scalar_plant() -> LinearPlant:
    return LinearPlant([[-1.0]], [[1.0]], name="scalar")


def double_integrator(axes: int = 1) -> LinearPlant:
    A = np.kron(np.eye(axes), np.array([[0.0, 1.0], [0.0, 0.0]]))
    B = np.kron(np.eye(axes), np.array([[0.0], [1.0]]))
    return LinearPlant(A, B, name="double_integrator" if axes == 1 else f"double_integrator_x{axes}")


def linearized_auv(auv_plant, h: float = 1e-6) -> LinearPlant:
    """Central-difference Jacobian of the AUV drift at the origin."""
    n = auv_plant.n
    A = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        A[:, i] = (auv_plant.affine(e).f - auv_plant.affine(-e).f) / (2.0 * h)
    B = auv_plant.affine(np.zeros(n)).g
    return LinearPlant(A, B, name="auv_linearized")


BENCHMARKS = {"scalar": scalar_plant, "double_integrator": double_integrator}
