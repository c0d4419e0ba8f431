"""Compare the numba and pure-numpy kernel backends.

Each backend runs in its own subprocess (the flag is read at import time).
Kernels are warmed up once so numba compile time is excluded, then timed
with ``timeit``; outputs are compared across backends.

    python3 benchmarks/bench_backends.py [--repeat 5] [--sim-seconds 1.0]
"""
import argparse
import json
import os
import subprocess
import sys
import tempfile
import timeit

import numpy as np


def worker(out_path, repeat, sim_seconds):
    from auvgame import _kernels as K
    from auvgame._backend import backend_name
    from auvgame.scenario import load_builtin
    from auvgame.sim import run

    sc = load_builtin("auv_station_keeping", {"duration": sim_seconds})
    s, c, w = sc.samples, sc.cost, sc.initial_weights
    rng = np.random.default_rng(0)
    Z = np.ascontiguousarray(rng.uniform(-0.5, 0.5, (1000, 12)))
    pargs = sc.plant._args

    cases = {
        "auv_affine_batch[1000]": lambda: K.auv_affine_batch(Z, *pargs),
        "quad_jacobian_batch[1000]": lambda: K.quad_jacobian_batch(Z),
        f"bellman_terms[{s.N}]": lambda: K.bellman_terms(s.S, s.F, s.G, s.points, c.Q, c.R, c.R_inv,
                                                          c.gamma, w.Wc, w.Wa1, w.Wa2),
        f"sim_run[{sc.n_steps} steps]": lambda: run(sc),
    }
    timings, outputs = {}, {}
    for name, fn in cases.items():
        res = fn()  # warm-up (and numba compile)
        number = 1 if name.startswith("sim_run") else 20
        best = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
        timings[name] = best
        if name.startswith("sim_run"):
            outputs[name] = res.zeta[-1].tolist()
        else:
            first = res[0] if isinstance(res, tuple) else res
            outputs[name] = np.asarray(first).ravel()[:2000].tolist()
    with open(out_path, "w") as fh:
        json.dump({"backend": backend_name(), "timings": timings, "outputs": outputs}, fh)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sim-seconds", type=float, default=1.0)
    ap.add_argument("--worker", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        worker(args.worker, args.repeat, args.sim_seconds)
        return

    results = {}
    with tempfile.TemporaryDirectory() as tmp:
        for flag in ("1", "0"):
            path = os.path.join(tmp, f"bench_{flag}.json")
            env = dict(os.environ, AUVGAME_NUMBA=flag)
            subprocess.run([sys.executable, __file__, "--worker", path, "--repeat", str(args.repeat),
                            "--sim-seconds", str(args.sim_seconds)], env=env, check=True)
            with open(path) as fh:
                doc = json.load(fh)
            results[doc["backend"]] = doc

    nb, npy = results["numba"], results["numpy"]
    print(f"{'kernel':<28} {'numba [ms]':>11} {'numpy [ms]':>11} {'speedup':>8} {'max |diff|':>11}")
    for name in nb["timings"]:
        t1, t0 = nb["timings"][name], npy["timings"][name]
        diff = np.max(np.abs(np.subtract(nb["outputs"][name], npy["outputs"][name])))
        print(f"{name:<28} {1e3 * t1:11.3f} {1e3 * t0:11.3f} {t0 / t1:8.2f} {diff:11.2e}")


if __name__ == "__main__":
    main()
