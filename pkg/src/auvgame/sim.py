"""Closed-loop simulation of plant plus online learner.

The augmented state ``[zeta, Wc, Wa1, Wa2]`` is integrated with fixed-step
classical RK4. The plant is driven by the learned controller ``u1hat`` and
by the true disturbance; the learned worst-case disturbance ``u2hat`` only
shapes the Bellman error and is logged for inspection.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._kernels import bellman_terms
from .approx import WeightSet
from .game import GameCost
from .learner import (LearnerGains, SampleSet, actor_derivative, critic_derivative,
                      rank_check)
from .vehicle import PitchSingularityError

log = logging.getLogger(__name__)


class Divergence(RuntimeError):
    """Raised when the state blows up, leaves the valid attitude range, or goes non-finite."""

    def __init__(self, reason: str, t: float, trajectory: "TrajectoryLog | None" = None):
        super().__init__(f"{reason} at t={t:.6g}")
        self.reason = reason
        self.t = float(t)
        self.trajectory = trajectory


@dataclass(frozen=True)
class DisturbanceModel:
    kind: str = "none"
    amplitude: np.ndarray | float = 0.0
    frequency: float = 0.0
    phase: float = 0.0

    KINDS = ("none", "constant-current", "sinusoidal")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"disturbance kind must be one of {self.KINDS}")
        amp = np.asarray(self.amplitude, dtype=float)
        if not np.all(np.isfinite(amp)):
            raise ValueError("disturbance amplitude must be finite")
        object.__setattr__(self, "amplitude", amp)

    def __call__(self, t: float, k: int) -> np.ndarray:
        amp = np.broadcast_to(self.amplitude, (k,))
        if self.kind == "none":
            return np.zeros(k)
        if self.kind == "constant-current":
            return amp.copy()
        return amp * np.sin(self.frequency * t + self.phase)


@dataclass
class Scenario:
    plant: object
    cost: GameCost
    gains: LearnerGains
    basis: object
    samples: SampleSet
    initial_state: np.ndarray
    initial_weights: WeightSet
    duration: float
    dt: float
    disturbance: DisturbanceModel = field(default_factory=DisturbanceModel)
    kappa_p: float = 0.05
    refresh_every: int = 1
    divergence_bound: float = 1e3
    rank_every: int = 0  # steps between rank snapshots, 0 = start and end only
    name: str = "scenario"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.initial_state = np.ascontiguousarray(self.initial_state, dtype=float)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.duration >= self.dt:
            raise ValueError("duration must be at least dt")
        if self.initial_state.shape != (self.plant.n,):
            raise ValueError(f"initial_state must have {self.plant.n} entries")
        if self.initial_weights.Wc.shape != (self.basis.m,):
            raise ValueError(f"initial weights must have m={self.basis.m} entries")
        if self.refresh_every < 1:
            raise ValueError("refresh_every must be >= 1")
        self.plant.check_state(self.initial_state)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class TrajectoryLog:
    t: np.ndarray
    zeta: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    tau_d: np.ndarray
    delta: np.ndarray
    wc_norm: np.ndarray
    wa1_norm: np.ndarray
    wa2_norm: np.ndarray
    R: np.ndarray
    final_weights: WeightSet | None = None
    rank_snapshots: list = field(default_factory=list)
    status: str = "completed"
    divergence_time: float | None = None
    message: str = ""

    def __len__(self) -> int:
        return self.t.shape[0]

    def columns(self) -> list[str]:
        n, k = self.zeta.shape[1], self.u1.shape[1]
        return (["t"] + [f"zeta_{i}" for i in range(n)] + [f"u1_{i}" for i in range(k)]
                + [f"u2_{i}" for i in range(k)] + [f"tau_d_{i}" for i in range(k)]
                + ["delta", "wc_norm", "wa1_norm", "wa2_norm"])

    def table(self) -> np.ndarray:
        return np.column_stack([self.t, self.zeta, self.u1, self.u2, self.tau_d, self.delta,
                                self.wc_norm, self.wa1_norm, self.wa2_norm])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for row in self.table():
                w.writerow([repr(float(x)) for x in row])


# --------------------------------------------------------------------------
# right-hand side and RK4
# --------------------------------------------------------------------------


def _split(X, n, m):
    return X[:n], X[n:n + m], X[n + m:n + 2 * m], X[n + 2 * m:]


def _live_terms(zeta, Wc, Wa1, Wa2, sc: Scenario):
    dyn = sc.plant.affine(zeta)
    c = sc.cost
    omega, p, delta, u1, u2, _ = bellman_terms(
        sc.basis.jacobian(zeta)[None], dyn.f[None], np.ascontiguousarray(dyn.g[None]), zeta[None],
        c.Q, c.R, c.R_inv, c.gamma, Wc, Wa1, Wa2)
    return dyn, omega[0], p[0], delta[0], u1[0], u2[0]


def augmented_rhs(t, X, sc: Scenario, samples: SampleSet, frozen=None):
    """Time derivative of the augmented state and the live diagnostics.

    ``frozen`` optionally holds ``(omega_j, p_j, cost_j)`` from an earlier
    sample refresh; the sample Bellman errors are then updated only through
    their (linear) dependence on ``Wc``.
    """
    n, m = sc.plant.n, sc.basis.m
    zeta, Wc, Wa1, Wa2 = _split(X, n, m)
    if not np.all(np.isfinite(X)):
        raise Divergence("non-finite state", t)
    try:
        sc.plant.check_state(zeta)
    except PitchSingularityError as exc:
        raise Divergence(str(exc), t) from None
    zeta = np.ascontiguousarray(zeta)
    dyn, omega, p, delta, u1, u2 = _live_terms(zeta, Wc, Wa1, Wa2, sc)
    tau_d = sc.disturbance(t, sc.plant.k)
    zdot = dyn.f + dyn.g @ (u1 + sc.plant.disturbance_input(zeta, tau_d))

    c = sc.cost
    if frozen is None:
        om_j, p_j, d_j, *_ = bellman_terms(samples.S, samples.F, samples.G, samples.points,
                                           c.Q, c.R, c.R_inv, c.gamma, Wc, Wa1, Wa2)
    else:
        om_j, p_j, cost_j = frozen
        d_j = cost_j + om_j @ Wc
    fresh = SampleSet(samples.points, samples.S, samples.F, samples.G, samples.multiplicity,
                      om_j, p_j, d_j)
    wc_dot = critic_derivative((delta, omega, p), fresh, sc.gains)
    W_bar = sc.initial_weights.W_bar
    wa1_dot = actor_derivative(Wa1, Wc, sc.gains.eta_a1, W_bar, sc.kappa_p)
    wa2_dot = actor_derivative(Wa2, Wc, sc.gains.eta_a2, W_bar, sc.kappa_p)
    info = {"u1": u1, "u2": u2, "delta": delta, "tau_d": tau_d}
    return np.concatenate([zdot, wc_dot, wa1_dot, wa2_dot]), info


def _clip_actor(W, W_bar):
    nrm = np.linalg.norm(W)
    if nrm > W_bar:
        W *= W_bar / nrm


def rk4_step(t, X, dt, sc: Scenario, samples: SampleSet, frozen=None):
    k1, info = augmented_rhs(t, X, sc, samples, frozen)
    k2, _ = augmented_rhs(t + 0.5 * dt, X + 0.5 * dt * k1, sc, samples, frozen)
    k3, _ = augmented_rhs(t + 0.5 * dt, X + 0.5 * dt * k2, sc, samples, frozen)
    k4, _ = augmented_rhs(t + dt, X + dt * k3, sc, samples, frozen)
    X_new = X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    n, m = sc.plant.n, sc.basis.m
    W_bar = sc.initial_weights.W_bar
    # round-off guard: the projection keeps the continuous flow inside the ball
    _clip_actor(X_new[n + m:n + 2 * m], W_bar)
    _clip_actor(X_new[n + 2 * m:], W_bar)
    return X_new, info


def pack(zeta, weights: WeightSet) -> np.ndarray:
    return np.concatenate([zeta, weights.Wc, weights.Wa1, weights.Wa2])


def unpack(X, n, m, W_bar):
    zeta, Wc, Wa1, Wa2 = _split(X, n, m)
    return zeta.copy(), WeightSet(Wc.copy(), Wa1.copy(), Wa2.copy(), W_bar)


def step(zeta, weights: WeightSet, samples: SampleSet, t: float, dt: float, sc: Scenario):
    """One RK4 step of plant plus learner; returns ``(zeta', weights')``."""
    X_new, _ = rk4_step(t, pack(np.asarray(zeta, dtype=float), weights), dt, sc, samples)
    return unpack(X_new, sc.plant.n, sc.basis.m, weights.W_bar)


def _frozen_terms(X, sc: Scenario):
    n, m = sc.plant.n, sc.basis.m
    _, Wc, Wa1, Wa2 = _split(X, n, m)
    s, c = sc.samples, sc.cost
    om, p, _, _, _, cost = bellman_terms(s.S, s.F, s.G, s.points, c.Q, c.R, c.R_inv, c.gamma,
                                         Wc, Wa1, Wa2)
    return om, p, cost


def run(sc: Scenario) -> TrajectoryLog:
    """Integrate the scenario and log every step (both endpoints included).

    On divergence a :class:`Divergence` is raised carrying the partial log.
    """
    n, m, k = sc.plant.n, sc.basis.m, sc.plant.k
    W_bar = sc.initial_weights.W_bar
    steps = sc.n_steps
    rows = steps + 1
    t_grid = np.arange(rows) * sc.dt
    Z = np.zeros((rows, n))
    U1 = np.zeros((rows, k))
    U2 = np.zeros((rows, k))
    TD = np.zeros((rows, k))
    DL = np.zeros(rows)
    NW = np.zeros((rows, 3))
    snapshots = []

    def snapshot(i, X):
        _, ws = unpack(X, n, m, W_bar)
        rep = rank_check(sc.samples, ws, sc.cost)
        snapshots.append({"t": float(t_grid[i]), **rep.to_dict()})
        return rep

    def record(i, X, info):
        zeta, Wc, Wa1, Wa2 = _split(X, n, m)
        Z[i] = zeta
        U1[i], U2[i], TD[i], DL[i] = info["u1"], info["u2"], info["tau_d"], info["delta"]
        NW[i] = np.linalg.norm(Wc), np.linalg.norm(Wa1), np.linalg.norm(Wa2)

    def make_log(upto, status="completed", t_div=None, msg=""):
        sl = slice(0, upto)
        return TrajectoryLog(
            t=t_grid[sl].copy(), zeta=Z[sl].copy(), u1=U1[sl].copy(), u2=U2[sl].copy(),
            tau_d=TD[sl].copy(), delta=DL[sl].copy(), wc_norm=NW[sl, 0].copy(),
            wa1_norm=NW[sl, 1].copy(), wa2_norm=NW[sl, 2].copy(), R=sc.cost.R,
            final_weights=unpack(X, n, m, W_bar)[1], rank_snapshots=snapshots,
            status=status, divergence_time=t_div, message=msg)

    X = pack(sc.initial_state, sc.initial_weights)
    rep = snapshot(0, X)
    if not rep.full_rank:
        log.warning("rank condition fails at t=0: rank %d < m=%d", rep.rank, m)
    frozen = None
    for i in range(steps):
        t = t_grid[i]
        if sc.refresh_every > 1:
            frozen = _frozen_terms(X, sc) if i % sc.refresh_every == 0 else frozen
        try:
            X_new, info = rk4_step(t, X, sc.dt, sc, sc.samples, frozen)
        except Divergence as exc:
            raise Divergence(exc.reason, exc.t, make_log(i, "diverged", exc.t, str(exc))) from None
        record(i, X, info)
        X = X_new
        zn = np.linalg.norm(X[:n])
        if not np.all(np.isfinite(X)) or zn > sc.divergence_bound:
            msg = "non-finite state" if not np.isfinite(zn) else f"|zeta|={zn:.3g} exceeds bound {sc.divergence_bound:g}"
            upto = i + 1
            if np.all(np.isfinite(X)):
                # keep the offending (finite) state in the log
                try:
                    _, info = augmented_rhs(t_grid[i + 1], X, sc, sc.samples, frozen)
                    record(i + 1, X, info)
                    upto = i + 2
                except Divergence:
                    pass
            raise Divergence(msg, t_grid[i + 1], make_log(upto, "diverged", float(t_grid[i + 1]), msg))
        if sc.rank_every and (i + 1) % sc.rank_every == 0 and i + 1 < steps:
            snapshot(i + 1, X)
    _, info = augmented_rhs(t_grid[-1], X, sc, sc.samples, frozen)
    record(steps, X, info)
    snapshot(steps, X)
    return make_log(rows)


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def metrics(traj: TrajectoryLog, oracle: dict | None = None) -> dict:
    """Summary numbers for a (possibly partial) trajectory.

    ``oracle`` may carry ``W`` (ideal weights) plus optional ``basis``,
    ``plant`` and ``cost`` for policy errors.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    zn = np.linalg.norm(traj.zeta, axis=1)
    t = traj.t
    tail = t >= t[-1] - 0.2 * (t[-1] - t[0])
    power = np.einsum("ij,jk,ik->i", traj.u1, traj.R, traj.u1)
    energy = float(np.sum(0.5 * (power[1:] + power[:-1]) * np.diff(t))) if len(t) > 1 else 0.0
    out = {
        "status": traj.status,
        "duration": float(t[-1] - t[0]),
        "max_state_norm": float(zn.max()),
        "final_state_norm": float(zn[-1]),
        "ultimate_bound_estimate": float(zn[tail].max()),
        "control_energy": energy,
        "max_abs_delta": float(np.abs(traj.delta).max()),
        "final_abs_delta": float(abs(traj.delta[-1])),
        "max_wa1_norm": float(traj.wa1_norm.max()),
        "max_wa2_norm": float(traj.wa2_norm.max()),
        "final_wc_norm": float(traj.wc_norm[-1]),
    }
    if traj.divergence_time is not None:
        out["divergence_time"] = traj.divergence_time
    if oracle is not None and traj.final_weights is not None and "W" in oracle:
        from .lq import compare_weights

        out["weight_errors"] = compare_weights(
            traj.final_weights, oracle["W"], oracle.get("basis"), oracle.get("plant"),
            oracle.get("cost"))
    return out


def write_outputs(traj: TrajectoryLog, summary: dict, out_dir) -> None:
    import json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out / "trajectory.csv")
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
