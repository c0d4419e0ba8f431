"""Scenario JSON loading, oracle attachment and gain-condition reports."""
from __future__ import annotations

import copy
import json
from contextlib import contextmanager
from importlib import resources
from pathlib import Path

import numpy as np

from . import lq
from .approx import WeightSet, make_basis
from .game import GameCost, as_matrix, check_gain_conditions, estimate_lipschitz
from .learner import LearnerGains, build_sample_set, rank_check
from .sim import DisturbanceModel, Scenario
from .vehicle import DEFAULT_THETA_MARGIN, AUVPlant, VehicleParams


class ScenarioError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@contextmanager
def _field(name: str):
    try:
        yield
    except ScenarioError:
        raise
    except KeyError as exc:
        raise ScenarioError(name, f"missing key {exc.args[0]!r}") from None
    except (ValueError, TypeError, IndexError, np.linalg.LinAlgError) as exc:
        raise ScenarioError(name, str(exc)) from None


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("", f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("", f"{path}: top level must be a JSON object")
    return doc


def builtin_scenarios() -> list[str]:
    root = resources.files("auvgame.data.scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def builtin_scenario_doc(name: str) -> dict:
    text = resources.files("auvgame.data.scenarios").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def _vehicle(spec, base: Path) -> VehicleParams:
    if spec in (None, "default"):
        return VehicleParams.default()
    if isinstance(spec, str):
        p = Path(spec)
        return VehicleParams.from_json(p if p.is_absolute() else base / p)
    return VehicleParams.from_dict(spec)


def _plant(spec: dict, base: Path):
    kind = spec.get("kind", "auv")
    if kind == "auv":
        return AUVPlant(_vehicle(spec.get("vehicle"), base),
                        float(spec.get("theta_margin", DEFAULT_THETA_MARGIN)))
    if kind == "linear":
        bench = spec.get("benchmark")
        if bench == "auv_linearized":
            auv = AUVPlant(_vehicle(spec.get("vehicle"), base))
            return lq.linearized_auv(auv)
        if bench is not None:
            if bench not in lq.BENCHMARKS:
                raise ValueError(f"unknown benchmark {bench!r}")
            return lq.BENCHMARKS[bench](**spec.get("options", {}))
        return lq.LinearPlant(spec["A"], spec["B"], name=spec.get("name", "linear"))
    raise ValueError(f"unknown plant kind {kind!r}")


def _box(spec: dict, n: int):
    if "half_width" in spec:
        hw = np.broadcast_to(np.asarray(spec["half_width"], dtype=float), (n,))
        return -hw, hw.copy()
    low = np.asarray(spec["low"], dtype=float)
    high = np.asarray(spec["high"], dtype=float)
    if low.shape != (n,) or high.shape != (n,):
        raise ValueError(f"low/high need {n} entries")
    return low, high


def _weights(spec: dict, m: int, seed: int) -> WeightSet:
    W_bar = float(spec.get("W_bar", 100.0))
    init = spec.get("init", "uniform")
    if init == "uniform":
        center = np.broadcast_to(np.asarray(spec.get("center", 0.0), dtype=float), (m,))
        scale = float(spec.get("scale", 0.1))
        w = center + np.random.default_rng(seed).uniform(-scale, scale, m)
        return WeightSet(w, w.copy(), w.copy(), W_bar)
    if init == "zeros":
        return WeightSet.uniform(m, 0.0, W_bar)
    if init == "values":
        wc = np.asarray(spec["Wc"], dtype=float)
        ws = WeightSet(wc, spec.get("Wa1", wc), spec.get("Wa2", wc), W_bar)
        if wc.shape != (m,):
            raise ValueError(f"weight vectors need m={m} entries")
        return ws
    raise ValueError(f"unknown weight init {init!r}")


def scenario_from_dict(doc: dict, base=".", overrides: dict | None = None) -> Scenario:
    """Build a runnable :class:`Scenario`; errors name the offending field."""
    doc = copy.deepcopy(doc)
    for key, val in (overrides or {}).items():
        if val is not None:
            doc[key] = val
    base = Path(base)
    seed = int(doc.get("seed", 0))
    with _field("plant"):
        plant = _plant(doc.get("plant", {"kind": "auv"}), base)
    with _field("cost"):
        c = doc.get("cost", {})
        cost = GameCost(as_matrix(c.get("Q", 1.0), plant.n, "Q"), as_matrix(c.get("R", 1.0), plant.k, "R"),
                        float(c["gamma"]), bool(c.get("theorem_mode", False)))
    with _field("gains"):
        g = doc["gains"]
        gains = LearnerGains(g["eta_c"], g.get("eta_a1", g.get("eta_a", 1.0)),
                             g.get("eta_a2", g.get("eta_a", 1.0)))
    with _field("basis"):
        b = doc.get("basis", {"name": "quadratic"})
        dim = int(b.get("dim", plant.n))
        if dim != plant.n:
            raise ValueError(f"basis dim {dim} does not match plant state dimension {plant.n}")
        basis = make_basis(b.get("name", "quadratic"), dim)
    with _field("samples"):
        s = doc.get("samples", {})
        low, high = _box(s, plant.n)
        samples = build_sample_set(low, high, int(s.get("N", 4 * basis.m)), plant, basis,
                                   s.get("strategy", "latin-hypercube"), int(s.get("seed", seed)))
        refresh_every = int(s.get("refresh_every", 1))
    with _field("weights"):
        weights = _weights(doc.get("weights", {}), basis.m, seed)
    with _field("disturbance"):
        d = doc.get("disturbance", {"kind": "none"})
        dist = DisturbanceModel(d.get("kind", "none"), d.get("amplitude", 0.0),
                                float(d.get("frequency", 0.0)), float(d.get("phase", 0.0)))
        np.broadcast_to(dist.amplitude, (plant.k,))
    with _field("initial_state"):
        z0 = np.asarray(doc["initial_state"], dtype=float)
        if z0.shape != (plant.n,):
            raise ValueError(f"expected {plant.n} entries, got {z0.size}")
        plant.check_state(z0)
    with _field("duration"):
        duration = float(doc["duration"])
        if not duration > 0:
            raise ValueError("must be positive")
    with _field("dt"):
        dt = float(doc.get("dt", 0.005))
        if not dt > 0:
            raise ValueError("must be positive")
        if duration < dt:
            raise ValueError("duration must be at least one step")
    rank_every_s = float(doc.get("rank_every", 0.0))
    extras = {
        "oracle": bool(doc.get("oracle", False)),
        "ultimate_bound": doc.get("ultimate_bound"),
        "conditions": doc.get("conditions", {}),
        "seed": seed,
    }
    with _field("scenario"):
        return Scenario(
            plant=plant, cost=cost, gains=gains, basis=basis, samples=samples,
            initial_state=z0, initial_weights=weights, duration=duration, dt=dt,
            disturbance=dist, kappa_p=float(doc.get("weights", {}).get("kappa_p", 0.05)),
            refresh_every=refresh_every, divergence_bound=float(doc.get("divergence_bound", 1e3)),
            rank_every=int(round(rank_every_s / dt)) if rank_every_s > 0 else 0,
            name=str(doc.get("name", "scenario")), extras=extras)


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    path = Path(path)
    return scenario_from_dict(read_json(path), path.parent, overrides)


def load_builtin(name: str, overrides: dict | None = None) -> Scenario:
    return scenario_from_dict(builtin_scenario_doc(name), ".", overrides)


def attach_oracle(sc: Scenario) -> dict:
    """GARE ground truth for the scenario (linearisation at 0 for the AUV).

    Returns a dict usable by :func:`auvgame.sim.metrics`; on failure it
    carries ``status = "nonconverged"`` and the residual history instead.
    """
    plant = sc.plant
    exact = isinstance(plant, lq.LinearPlant)
    lin = plant if exact else lq.linearized_auv(plant)
    try:
        sol = lq.gare_solve(lin, sc.cost.Q, sc.cost.R, sc.cost.gamma)
    except lq.GareNotConverged as exc:
        return {"status": "nonconverged", "message": str(exc),
                "residual_history": [float(r) for r in exc.residual_history]}
    out = {"status": "ok", "exact": exact, "P": sol.P, "residual": sol.residual,
           "iterations": sol.iterations}
    try:
        out["W"] = lq.ideal_weights(sol, sc.basis)
    except ValueError:
        return out
    out.update(basis=sc.basis, plant=lin, cost=sc.cost)
    return out


def oracle_summary(oracle: dict) -> dict:
    keep = ("status", "exact", "residual", "iterations", "message", "residual_history")
    out = {k: oracle[k] for k in keep if k in oracle}
    if "P" in oracle:
        out["P"] = np.asarray(oracle["P"]).tolist()
    return out


def condition_report(sc: Scenario, weights=None):
    weights = weights if weights is not None else sc.initial_weights
    rep = rank_check(sc.samples, weights, sc.cost)
    cfg = sc.extras.get("conditions", {})
    lf = cfg.get("L_f")
    if lf is None:
        lf = estimate_lipschitz(sc.plant, sc.samples.points)
    report = check_gain_conditions(sc.cost, sc.gains, rep.c_lower, float(lf),
                                   float(cfg.get("eps_prime_bound", 0.0)),
                                   float(cfg.get("epsilon_free", 1.0)))
    out = report.to_dict()
    out["rank"] = rep.to_dict()
    return out
