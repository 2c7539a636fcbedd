"""
Time the hot kernels with numba and with the pure-numpy fallback.

Each backend runs in its own interpreter because ``DMIXREP_DISABLE_JIT`` is
read at import time. The first call of each kernel is untimed so that JIT
compilation (or cache loading) does not count.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from dmixrep import backend, chi2, em, simkit

repeat = int(sys.argv[1])
gen = np.random.default_rng(0)
shapes = gen.uniform(0.3, 8.0, 200_000)
means = gen.uniform(0.0, 30.0, 200_000)
xs = np.linspace(0.01, 60.0, 20_000)
law = chi2.NoncentralChiSq(3, 4.0)
sample = em.simulate_poisson_experiment(10_000, 2.0, simkit.RngStream(1).generator())
config = em.EMConfig(max_iterations=300, loglik_tolerance=1e-300)

cases = {
    "gamma 2e5": lambda: simkit.gamma(shapes, 1.0, np.random.default_rng(1)),
    "poisson 2e5": lambda: simkit.poisson(means, np.random.default_rng(1)),
    "series density 2e4": lambda: chi2.noncentral_density_series(law, xs),
    "em 300 it, n=1e4": lambda: em.fit(sample, config),
}
out = {"backend": backend()}
for name, fn in cases.items():
    fn()
    out[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
print(json.dumps(out))
"""


def run(disable_jit: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("DMIXREP_DISABLE_JIT", None)
    if disable_jit:
        env["DMIXREP_DISABLE_JIT"] = "1"
    res = subprocess.run(
        [sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(res.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    jit = run(False, args.repeat)
    ref = run(True, args.repeat)
    print(f"{'kernel':<22}{jit['backend']:>12}{ref['backend']:>12}{'speedup':>10}")
    for name in jit:
        if name == "backend":
            continue
        print(f"{name:<22}{jit[name]:>11.4f}s{ref[name]:>11.4f}s{ref[name] / jit[name]:>9.1f}x")


if __name__ == "__main__":
    main()
