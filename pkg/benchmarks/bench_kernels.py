"""Compare the compiled and numpy kernel backends on the batch workloads used by the safeguard.

Run with ``python benchmarks/bench_kernels.py``. Each backend runs in a fresh
interpreter so the import-time selection is honoured.
"""
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, timeit
import numpy as np
from issakit import kernels

rng = np.random.default_rng(0)
out = {"backend": kernels.BACKEND}
for n in (1, 64, 4096):
    s = np.column_stack([rng.uniform(-3, 3, n), rng.uniform(-3, 3, n),
                         rng.uniform(-3.1, 3.1, n), rng.uniform(0, 1, n)])
    u = rng.uniform(-2, 2, (n, 2))
    obs = np.array([[1.0, 0.5, 0.0, 0.0], [-1.0, 2.0, 0.1, 0.0], [2.0, -1.0, 0.0, 0.2]])
    reps = max(20, 20000 // n)
    def work():
        nxt = kernels.step_second_order(s, u, 0.05, 1.0, -2.0, 2.0, -2.0, 2.0)
        kernels.phi_index(nxt, obs, 0.1, 1.0, 6.0, 0.4)
        kernels.step_toy(s, u, 0.01)
        kernels.phi_toy(s, 1.0, 0.2, 0.5)
    best = min(timeit.repeat(work, number=reps, repeat=5)) / reps
    out[str(n)] = best * 1e6
print(json.dumps(out))
"""


def run(pure: bool) -> dict:
    env = dict(os.environ, ISSAKIT_PURE_PYTHON="1" if pure else "0")
    res = subprocess.run([sys.executable, "-c", WORKLOAD], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    fast, slow = run(False), run(True)
    print(f"{'batch':>6} {fast['backend'] + ' us':>14} {slow['backend'] + ' us':>12} {'speedup':>8}")
    for n in ("1", "64", "4096"):
        print(f"{n:>6} {fast[n]:14.2f} {slow[n]:12.2f} {slow[n] / fast[n]:8.2f}")


if __name__ == "__main__":
    main()
