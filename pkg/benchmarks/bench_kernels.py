"""Compiled vs pure-Python simulation loops.

Each backend runs in its own interpreter because ``VLEQ_DISABLE_NUMBA`` is
read at import time.  The compiled timings exclude the first call, which
compiles the loops (or loads them from numba's on-disk cache); its extra cost
is shown separately.

    python benchmarks/bench_kernels.py --samples 20000 --repeat 3
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from vleq import kernels
from vleq._accel import USING_NUMBA
from vleq.sim import SimulationConfig, simulate_run

n, repeat = int(sys.argv[1]), int(sys.argv[2])
cases = {
    "le lms M=11": dict(equalizer="le", le_taps=11, algorithm="lms"),
    "vl_le lms": dict(equalizer="vl_le", delay=8, algorithm="lms"),
    "le rls M=11": dict(equalizer="le", le_taps=11, algorithm="rls"),
    "vl_dfe vslms": dict(equalizer="vl_dfe", algorithm="vslms"),
    "dfe rls 6+4": dict(equalizer="dfe", n_ff=6, nb=4, algorithm="rls"),
}
sc = [{"duration": n, "ebno_db": 15.0, "channel": {"kind": "static", "profile": "model2"}}]
out = {"numba": USING_NUMBA, "cases": {}}
for name, kw in cases.items():
    cfg = SimulationConfig(scenario=sc, **kw)
    t0 = time.perf_counter()
    simulate_run(cfg, 0)                      # includes compilation when numba is on
    first = time.perf_counter() - t0
    best = float("inf")
    for k in range(repeat):
        t0 = time.perf_counter()
        simulate_run(cfg, k + 1)
        best = min(best, time.perf_counter() - t0)
    out["cases"][name] = {"first": first, "best": best}
print(json.dumps(out))
"""


def run_backend(disable: bool, samples: int, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("VLEQ_DISABLE_NUMBA", None)
    if disable:
        env["VLEQ_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(samples), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write the raw timings here")
    args = ap.parse_args(argv)

    fast = run_backend(False, args.samples, args.repeat)
    slow = run_backend(True, args.samples, args.repeat)
    if not fast["numba"]:
        print("numba is not importable; both columns are the pure backend")

    print(f"{args.samples} samples per run, best of {args.repeat}")
    print(f"{'case':<16}{'numba [s]':>12}{'1st call +[s]':>14}{'pure [s]':>11}{'speed-up':>10}")
    for name, f in fast["cases"].items():
        p = slow["cases"][name]["best"]
        print(f"{name:<16}{f['best']:>12.4f}{f['first'] - f['best']:>14.2f}{p:>11.3f}"
              f"{p / f['best']:>9.0f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"numba": fast, "pure": slow, "samples": args.samples}, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
