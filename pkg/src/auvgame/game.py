"""Two-player zero-sum game: local cost, Hamiltonian, saddle-point policies.

Player 1 (the controller) minimises and player 2 (the disturbance)
maximises ``r = z'Qz + u1'R u1 - gamma^2 u2'u2`` integrated along
``z_dot = f + g (u1 + u2)``. The value of the game is assumed to exist
(min-max equals max-min); nothing here tries to verify that.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# relative slack on lambda_min(R) >= gamma^2 so that gamma = sqrt(r) counts as equality
R_GAMMA_RTOL = 1e-12


def as_matrix(spec, n: int, name: str = "matrix") -> np.ndarray:
    """Scalar -> s*I, length-n list -> diag, n x n nested list -> as is."""
    a = np.asarray(spec, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(n)
    if a.ndim == 1:
        if a.shape != (n,):
            raise ValueError(f"{name}: diagonal needs {n} entries, got {a.shape[0]}")
        return np.diag(a)
    if a.shape != (n, n):
        raise ValueError(f"{name}: expected shape ({n}, {n}), got {a.shape}")
    return a


@dataclass(frozen=True)
class GameCost:
    Q: np.ndarray
    R: np.ndarray
    gamma: float
    theorem_mode: bool = False
    R_inv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        Q = np.ascontiguousarray(self.Q, dtype=float)
        R = np.ascontiguousarray(self.R, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError("R must be square")
        if not np.allclose(R, R.T):
            raise ValueError("R must be symmetric")
        if np.linalg.eigvalsh(0.5 * (Q + Q.T))[0] <= 0:
            raise ValueError("Q must be positive definite")
        if np.linalg.eigvalsh(R)[0] <= 0:
            raise ValueError("R must be positive definite")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "R_inv", np.linalg.inv(R))
        if self.theorem_mode and not r_gamma_ok(self.r_lower, self.gamma):
            raise ValueError(
                f"theorem mode requires lambda_min(R) >= gamma^2 "
                f"({self.r_lower:g} < {self.gamma**2:g})"
            )

    @property
    def q_lower(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.Q + self.Q.T))[0])

    @property
    def q_upper(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.Q + self.Q.T))[-1])

    @property
    def r_lower(self) -> float:
        return float(np.linalg.eigvalsh(self.R)[0])

    @classmethod
    def from_dict(cls, doc: dict, n: int, k: int) -> "GameCost":
        return cls(
            Q=as_matrix(doc.get("Q", 1.0), n, "cost.Q"),
            R=as_matrix(doc.get("R", 1.0), k, "cost.R"),
            gamma=doc["gamma"],
            theorem_mode=bool(doc.get("theorem_mode", False)),
        )

    def to_dict(self) -> dict:
        return {"Q": self.Q.tolist(), "R": self.R.tolist(), "gamma": self.gamma,
                "theorem_mode": self.theorem_mode}


def r_gamma_ok(r_lower: float, gamma: float) -> bool:
    return r_lower >= gamma**2 * (1.0 - R_GAMMA_RTOL)


def local_cost(zeta, u1, u2, cost: GameCost) -> float:
    zeta, u1, u2 = (np.asarray(a, dtype=float) for a in (zeta, u1, u2))
    return float(zeta @ cost.Q @ zeta + u1 @ cost.R @ u1 - cost.gamma**2 * (u2 @ u2))


def policies_from_gradient(grad_v, g, cost: GameCost):
    """Saddle-point policies ``(u1*, u2*)`` for a given value gradient."""
    gt = np.asarray(g, dtype=float).T @ np.asarray(grad_v, dtype=float)
    return -0.5 * cost.R_inv @ gt, gt / (2.0 * cost.gamma**2)


def hamiltonian(zeta, grad_v, u1, u2, dyn, cost: GameCost) -> float:
    f, g = dyn
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    return local_cost(zeta, u1, u2, cost) + float(np.asarray(grad_v) @ (f + g @ (u1 + u2)))


@dataclass
class ConditionEntry:
    name: str
    lhs: float
    rhs: float
    passed: bool
    relation: str

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "relation": self.relation, "pass": self.passed}


@dataclass
class ConditionReport:
    entries: list[ConditionEntry]
    inputs: dict

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def __getitem__(self, name: str) -> ConditionEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        out = {e.name: e.to_dict() for e in self.entries}
        out["all_pass"] = self.passed
        out["inputs"] = self.inputs
        return out


def check_gain_conditions(cost: GameCost, gains, c_lower: float, lf_estimate: float,
                          eps_prime_bound: float, epsilon_free: float = 1.0) -> ConditionReport:
    """Evaluate the sufficient conditions for ultimately bounded learning.

    ``epsilon_free`` is the free Young's-inequality weight that trades the
    state-cost condition against the excitation condition. A failed
    inequality is reported, never raised.
    """
    if epsilon_free <= 0:
        raise ValueError("epsilon_free must be positive")
    q_low = cost.q_lower
    q_rhs = gains.eta_c * lf_estimate * eps_prime_bound * epsilon_free / 2.0
    c_rhs = lf_estimate * eps_prime_bound / (2.0 * epsilon_free)
    if gains.eta_c > 0:
        c_rhs += (gains.eta_a1 + gains.eta_a2) / (2.0 * gains.eta_c)
    else:
        c_rhs = float("inf")
    r_low = cost.r_lower
    g2 = cost.gamma**2
    entries = [
        ConditionEntry("Q_sc", q_low, q_rhs, q_low > q_rhs, ">"),
        ConditionEntry("Wc_sc", float(c_lower), c_rhs, float(c_lower) > c_rhs, ">"),
        ConditionEntry("r_gam_cond", r_low, g2, r_gamma_ok(r_low, cost.gamma), ">="),
    ]
    inputs = {
        "eta_c": gains.eta_c, "eta_a1": gains.eta_a1, "eta_a2": gains.eta_a2,
        "c_lower": float(c_lower), "L_f": float(lf_estimate),
        "eps_prime_bound": float(eps_prime_bound), "epsilon_free": float(epsilon_free),
    }
    return ConditionReport(entries, inputs)


def estimate_lipschitz(plant, points) -> float:
    """Sampled estimate of ``sup ||f(z)|| / ||z||`` over the given points."""
    best = 0.0
    for z in np.asarray(points, dtype=float):
        nz = np.linalg.norm(z)
        if nz > 1e-12:
            best = max(best, float(np.linalg.norm(plant.affine(z).f)) / nz)
    return best
