"""Critic/actor function approximation and the measurable Bellman error.

The value is approximated as ``V(z) ~ Wc . sigma(z)`` over a fixed feature
map ``sigma``. Actor weights ``Wa1``/``Wa2`` enter only through the
gradient ``sigma'(z)^T W`` that feeds the saddle-point policy formulas.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .game import GameCost, local_cost


class QuadraticBasis:
    """All distinct monomials ``z_i z_j`` with ``i <= j`` (row-major order)."""

    name = "quadratic"

    def __init__(self, n: int):
        self.n = int(n)
        self.m = self.n * (self.n + 1) // 2
        self.pairs = [(i, j) for i in range(self.n) for j in range(i, self.n)]

    def sigma(self, z) -> np.ndarray:
        return K.quad_features(np.ascontiguousarray(z, dtype=float))

    def jacobian(self, z) -> np.ndarray:
        return K.quad_jacobian(np.ascontiguousarray(z, dtype=float))

    def jacobian_batch(self, Z) -> np.ndarray:
        return K.quad_jacobian_batch(np.ascontiguousarray(Z, dtype=float))

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.n, "m": self.m}


class QuadraticQuarticBasis(QuadraticBasis):
    """Quadratic monomials followed by ``z_i^2 z_j^2`` (``i <= j``)."""

    name = "quadratic_quartic"

    def __init__(self, n: int):
        super().__init__(n)
        self.m = 2 * len(self.pairs)
        self._ii = np.array([p[0] for p in self.pairs])
        self._jj = np.array([p[1] for p in self.pairs])

    def sigma(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        q = z[self._ii] * z[self._jj]
        return np.concatenate([q, q * q])

    def jacobian(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        L = len(self.pairs)
        out = np.zeros((self.m, self.n))
        out[:L] = K.quad_jacobian(np.ascontiguousarray(z))
        q = z[self._ii] * z[self._jj]
        # d(q^2) = 2 q dq
        out[L:] = 2.0 * q[:, None] * out[:L]
        return out

    def jacobian_batch(self, Z) -> np.ndarray:
        return np.stack([self.jacobian(z) for z in np.asarray(Z, dtype=float)])


BASES = {
    QuadraticBasis.name: QuadraticBasis,
    QuadraticQuarticBasis.name: QuadraticQuarticBasis,
}


def make_basis(name: str, dim: int):
    try:
        return BASES[name](dim)
    except KeyError:
        raise ValueError(f"unknown basis {name!r}; choose from {sorted(BASES)}") from None


@dataclass(frozen=True)
class WeightSet:
    Wc: np.ndarray
    Wa1: np.ndarray
    Wa2: np.ndarray
    W_bar: float

    def __post_init__(self):
        for name in ("Wc", "Wa1", "Wa2"):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=float))
        if not (self.Wc.shape == self.Wa1.shape == self.Wa2.shape and self.Wc.ndim == 1):
            raise ValueError("weight vectors must be 1-D and the same length")
        if not self.W_bar > 0:
            raise ValueError("W_bar must be positive")

    @classmethod
    def uniform(cls, m: int, value, W_bar: float) -> "WeightSet":
        w = np.broadcast_to(np.asarray(value, dtype=float), (m,)).copy()
        return cls(w, w.copy(), w.copy(), W_bar)

    def norms(self):
        return tuple(float(np.linalg.norm(w)) for w in (self.Wc, self.Wa1, self.Wa2))


class GMatrices(NamedTuple):
    G1: np.ndarray
    G2: np.ndarray
    Gs1: np.ndarray
    Gs2: np.ndarray


def value_estimate(Wc, zeta, basis) -> float:
    return float(np.asarray(Wc) @ basis.sigma(zeta))


def policy_hat(W, zeta, basis, dyn, cost: GameCost, which: int) -> np.ndarray:
    """Approximate policy of player 1 (controller) or player 2 (disturbance)."""
    gt = dyn.g.T @ (basis.jacobian(zeta).T @ np.asarray(W, dtype=float))
    if which == 1:
        return -0.5 * cost.R_inv @ gt
    if which == 2:
        return gt / (2.0 * cost.gamma**2)
    raise ValueError("which must be 1 or 2")


def regressor(zeta, u1hat, u2hat, basis, dyn):
    """``omega = sigma'(z) (f + g (u1 + u2))`` and ``p = sqrt(1 + |omega|^2)``."""
    omega = basis.jacobian(zeta) @ (dyn.f + dyn.g @ (np.asarray(u1hat) + np.asarray(u2hat)))
    return omega, float(np.sqrt(1.0 + omega @ omega))


def bellman_error(zeta, weights: WeightSet, basis, dyn, cost: GameCost):
    """Measurable Bellman error ``delta = r(z, u1hat, u2hat) + Wc . omega``.

    Returns ``(delta, omega, p)``.
    """
    u1 = policy_hat(weights.Wa1, zeta, basis, dyn, cost, 1)
    u2 = policy_hat(weights.Wa2, zeta, basis, dyn, cost, 2)
    omega, p = regressor(zeta, u1, u2, basis, dyn)
    return local_cost(zeta, u1, u2, cost) + float(weights.Wc @ omega), omega, p


def g_matrices(zeta, basis, dyn, cost: GameCost, check: bool = False) -> GMatrices:
    g = dyn.g
    G1 = g @ cost.R_inv @ g.T
    G2 = (g @ g.T) / cost.gamma**2
    S = basis.jacobian(zeta)
    out = GMatrices(G1, G2, S @ G1 @ S.T, S @ G2 @ S.T)
    if check:
        for name, mat in zip(out._fields, out):
            lam = np.linalg.eigvalsh(0.5 * (mat + mat.T))[0]
            if lam < -1e-10 * max(1.0, np.abs(mat).max()):
                raise AssertionError(f"{name} is not PSD (min eigenvalue {lam:g})")
    return out


def bellman_error_unmeasurable(zeta, weights: WeightSet, W_ideal, basis, dyn,
                               cost: GameCost) -> float:
    """Bellman error written through the weight errors, for an exact basis.

    Only meaningful when the ideal weights reproduce the value function with
    zero reconstruction error (the linear-quadratic benchmarks), in which
    case it must agree with :func:`bellman_error`.
    """
    W = np.asarray(W_ideal, dtype=float)
    u1 = policy_hat(weights.Wa1, zeta, basis, dyn, cost, 1)
    u2 = policy_hat(weights.Wa2, zeta, basis, dyn, cost, 2)
    omega, _ = regressor(zeta, u1, u2, basis, dyn)
    gm = g_matrices(zeta, basis, dyn, cost)
    ec, e1, e2 = W - weights.Wc, W - weights.Wa1, W - weights.Wa2
    return float(-ec @ omega + 0.25 * e1 @ gm.Gs1 @ e1 - 0.25 * e2 @ gm.Gs2 @ e2)
