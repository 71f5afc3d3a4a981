"""Compiled vs pure-numpy kernels.

Each workload runs in a fresh interpreter, once with ``TAILGAME_NUMBA=1``
and once with ``TAILGAME_NUMBA=0`` (the flag is read at import time). The
compiled run is warmed up first so the timing excludes JIT compilation.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from tailgame import _accel, kernels
from tailgame import oneshot, solver, martin
from tailgame.specfile import bundled_spec

quick = sys.argv[1] == "1"
repeat = int(sys.argv[2])
rng = np.random.default_rng(0)
mats = [rng.random((4, 4)) for _ in range(200 if quick else 2000)]
mp = bundled_spec("matching_pennies.json")
g3 = oneshot.random_game(3, 3, np.random.default_rng(1))
plays = 200 if quick else 2000


def matrix_games():
    for M in mats:
        kernels.solve_matrix_game(M)


def pennies_minmax():
    cg = solver.build_concurrent_game(mp, 0)
    solver.solve_values(cg)


def ledger_mc():
    martin.penny_ledger_mc(0.9, 1.0, 0.2, 0.5, 0.5, plays, 100, seed=0)


def regret():
    oneshot.nash_equilibrium(g3, iters=20000 if quick else 100000)


work = {"matrix_games": matrix_games, "pennies_minmax": pennies_minmax,
        "ledger_mc": ledger_mc, "regret_matching": regret}
out = {"numba": _accel.USE_NUMBA}
for name, fn in work.items():
    fn()  # warm-up / compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = best
print(json.dumps(out))
"""


def run(flag: str, quick: bool, repeat: int) -> dict:
    env = dict(os.environ, TAILGAME_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKER, "1" if quick else "0", str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()

    fast = run("1", args.quick, args.repeat)
    slow = run("0", args.quick, args.repeat)
    print(f"{'workload':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name in fast:
        if name == "numba":
            continue
        a, b = fast[name], slow[name]
        print(f"{name:<18}{a:>12.4f}{b:>12.4f}{b / a:>10.1f}x")
    if not fast["numba"]:
        print("note: numba unavailable, both columns ran the numpy kernels")


if __name__ == "__main__":
    main()
