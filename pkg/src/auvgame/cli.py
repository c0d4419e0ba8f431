"""Command-line entry point: ``auvgame run | verify | sweep``.

Exit codes: 0 success, 1 configuration error, 2 divergence (or oracle
non-convergence inside a sweep), 3 verification failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import scenario as scn
from ._backend import backend_name
from .sim import Divergence, metrics, run, write_outputs
from .verify import format_table, run_checks

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3
SWEEP_AXES = {"eta_c": ("gains", "eta_c"), "eta_a1": ("gains", "eta_a1"),
              "eta_a2": ("gains", "eta_a2"), "gamma": ("cost", "gamma")}
INDEX_METRICS = ("max_state_norm", "ultimate_bound_estimate", "final_abs_delta",
                 "control_energy", "divergence_time")

log = logging.getLogger("auvgame")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def resolve_scenario(arg: str):
    """Scenario document and base directory from a path or a built-in name."""
    path = Path(arg)
    if not path.exists() and arg in scn.builtin_scenarios():
        return scn.builtin_scenario_doc(arg), Path(".")
    return scn.read_json(path), path.parent


def execute(doc: dict, base, out_dir, overrides: dict | None = None,
            oracle: bool | None = None) -> tuple[int, dict]:
    """Run one scenario document and write its artifacts.

    Raises :class:`ScenarioError` for configuration problems; returns
    ``(exit_code, summary)`` otherwise.
    """
    sc = scn.scenario_from_dict(doc, base, overrides)
    want_oracle = sc.extras["oracle"] if oracle is None else oracle
    orc = scn.attach_oracle(sc) if want_oracle else None
    conditions = {"initial": scn.condition_report(sc)}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        traj = run(sc)
        code = EXIT_OK
    except Divergence as exc:
        traj = exc.trajectory
        code = EXIT_DIVERGED
        log.error("run diverged: %s", exc)
    summary = {"scenario": sc.name, "backend": backend_name(), "dt": sc.dt,
               "duration": sc.duration, "seed": sc.extras["seed"], "n": sc.plant.n,
               "k": sc.plant.k, "m": sc.basis.m, "samples": sc.samples.N,
               "rank_snapshots": traj.rank_snapshots}
    if len(traj):
        summary["metrics"] = metrics(traj, orc if orc and orc["status"] == "ok" else None)
    else:
        summary["metrics"] = {"status": traj.status, "divergence_time": traj.divergence_time}
    bound = sc.extras.get("ultimate_bound")
    if bound is not None and len(traj):
        summary["ultimate_bound"] = float(bound)
        summary["within_ultimate_bound"] = (traj.status == "completed"
                                            and summary["metrics"]["ultimate_bound_estimate"] < bound)
    if orc is not None:
        summary["oracle"] = scn.oracle_summary(orc)
    if traj.status == "completed":
        conditions["final"] = scn.condition_report(sc, traj.final_weights)
    write_outputs(traj, _jsonable(summary), out)
    (out / "conditions.json").write_text(json.dumps(_jsonable(conditions), indent=2, sort_keys=True))
    return code, summary


def _overrides(args) -> dict:
    return {"dt": args.dt, "duration": args.duration, "seed": args.seed}


def cmd_run(args) -> int:
    try:
        doc, base = resolve_scenario(args.scenario)
        t0 = time.perf_counter()
        code, summary = execute(doc, base, args.out, _overrides(args), args.oracle)
    except scn.ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    m = summary["metrics"]
    print(f"{summary['scenario']}: {m['status']} in {time.perf_counter() - t0:.2f} s wall, "
          f"max |zeta| {m.get('max_state_norm', float('nan')):.4g}, "
          f"final |delta| {m.get('final_abs_delta', float('nan')):.3g} -> {args.out}")
    if "weight_errors" in m:
        print("weight errors: " + ", ".join(f"{k}={v:.3g}" for k, v in m["weight_errors"].items()))
    return code


def _parse_tol(items) -> dict:
    out = {}
    for item in items or []:
        name, _, val = item.partition("=")
        out[name] = float(val)
    return out


def cmd_verify(args) -> int:
    try:
        tols = _parse_tol(args.tol)
        results = run_checks(tols, seed=args.seed or 0)
    except (KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(format_table(results))
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_VERIFY


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


def _fmt(v) -> str:
    return f"{v:g}" if isinstance(v, float) else str(v)


def sweep_points(axes: dict) -> list[dict]:
    if not axes:
        raise ValueError("sweep needs at least one axis")
    for name, grid in axes.items():
        if name not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {name!r}; choose from {sorted(SWEEP_AXES)}")
        if not isinstance(grid, list) or not grid:
            raise ValueError(f"sweep axis {name!r} needs a non-empty list")
    names = list(axes)
    return [dict(zip(names, map(float, combo))) for combo in itertools.product(*axes.values())]


def apply_point(doc: dict, point: dict) -> dict:
    doc = copy.deepcopy(doc)
    for name, value in point.items():
        section, key = SWEEP_AXES[name]
        doc.setdefault(section, {})[key] = value
    return doc


def _sweep_job(job):
    doc, base, out_dir, overrides, oracle = job
    logging.getLogger("auvgame").setLevel(logging.ERROR)
    try:
        code, summary = execute(doc, base, out_dir, overrides, oracle)
    except scn.ScenarioError as exc:
        return EXIT_CONFIG, {"error": str(exc)}
    return code, _jsonable(summary)


def _index_row(i, point, sub, code, summary):
    row = {"run": i, "dir": sub, **point}
    orc = summary.get("oracle", {}).get("status", "")
    if code == EXIT_CONFIG:
        status = "config-error"
    elif code == EXIT_DIVERGED:
        status = "diverged"
    elif orc == "nonconverged":
        status = "nonconverged"
    else:
        status = "completed"
    row["status"] = status
    row["oracle_status"] = orc
    m = summary.get("metrics", {})
    for key in INDEX_METRICS:
        row[key] = m.get(key, "")
    we = m.get("weight_errors", {})
    for key in ("Wc_rel_error", "Wa1_rel_error", "Wa2_rel_error"):
        row[key] = we.get(key, "")
    row["error"] = summary.get("error", "")
    return row


def cmd_sweep(args) -> int:
    try:
        manifest_path = Path(args.manifest)
        manifest = scn.read_json(manifest_path)
        if "scenario" not in manifest:
            raise scn.ScenarioError("scenario", "sweep manifest needs a scenario path or name")
        target = manifest["scenario"]
        if isinstance(target, str) and not Path(target).is_absolute() and \
                (manifest_path.parent / target).exists():
            target = str(manifest_path.parent / target)
        doc, base = resolve_scenario(target)
        try:
            points = sweep_points(manifest.get("axes", {}))
        except ValueError as exc:
            raise scn.ScenarioError("axes", str(exc)) from None
        # validate the base scenario once before fanning out
        scn.scenario_from_dict(doc, base, _overrides(args))
    except scn.ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or manifest.get("out", "sweep_out"))
    out.mkdir(parents=True, exist_ok=True)
    oracle = args.oracle if args.oracle is not None else manifest.get("oracle")
    subs, jobs = [], []
    for i, point in enumerate(points):
        sub = f"run_{i:03d}_" + "_".join(f"{k}={_fmt(v)}" for k, v in point.items())
        subs.append(sub)
        jobs.append((apply_point(doc, point), base, out / sub, _overrides(args), oracle))
    workers = args.workers or manifest.get("workers") or min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    rows = [_index_row(i, p, s, code, summ)
            for i, (p, s, (code, summ)) in enumerate(zip(points, subs, results))]
    with open(out / "index.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    bad = [r for r in rows if r["status"] != "completed"]
    print(f"{len(rows)} runs, {len(bad)} not completed -> {out / 'index.csv'}")
    for r in bad:
        print(f"  {r['dir']}: {r['status']} {r['error']}".rstrip())
    if any(r["status"] == "config-error" for r in bad) and len(bad) == len(rows):
        return EXIT_CONFIG
    return EXIT_DIVERGED if bad else EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="auvgame", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory")
        p.add_argument("--dt", type=float, help="override the step size (s)")
        p.add_argument("--duration", type=float, help="override the run length (s)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--oracle", action=argparse.BooleanOptionalAction, default=None,
                       help="attach the LQ game oracle")

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("scenario", help="scenario JSON path or built-in name")
    common(p)
    p.set_defaults(func=cmd_run, out="run_out")

    p = sub.add_parser("verify", help="run the embedded check suite")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                   help="override a check tolerance (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run a grid of scenarios")
    p.add_argument("manifest", help="sweep manifest JSON")
    common(p)
    p.add_argument("--workers", type=int, help="parallel processes")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
