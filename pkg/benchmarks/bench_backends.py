"""Throughput of the two simulation backends.

    python benchmarks/bench_backends.py --replicates 200 --horizon 20000
"""
import argparse
import time

import numpy as np

from rru import model as m
from rru.montecarlo import derive_seed
from rru.urn_engine import simulate_batch

CASES = {
    "bernoulli": m.DesignConfig(m.bernoulli(0.9), m.bernoulli(0.5), m.identity(1), 2, 2),
    "normal": m.DesignConfig(m.normal(0, 1), m.normal(0, 1), m.clip_affine(-3, 3), 2, 2),
    "beta": m.DesignConfig(m.beta(2, 3), m.beta(3, 2), m.identity(1), 2, 2),
}


def bench(cfg, backend, seeds, workers):
    simulate_batch(cfg.replace(horizon=10, checkpoints=None), seeds[:2], backend=backend)  # compile / warm up
    t0 = time.perf_counter()
    batch = simulate_batch(cfg, seeds, backend=backend, workers=workers)
    return time.perf_counter() - t0, batch


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--replicates", type=int, default=100)
    ap.add_argument("--horizon", type=int, default=10_000)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    seeds = [derive_seed(1, i) for i in range(args.replicates)]
    steps = args.replicates * args.horizon
    print(f"{'case':<10} {'backend':<7} {'seconds':>8} {'ns/step':>9}  same-output")
    for name, cfg in CASES.items():
        cfg = cfg.replace(horizon=args.horizon, checkpoints=None)
        results = {}
        for backend in ("numba", "numpy"):
            secs, batch = bench(cfg, backend, seeds, args.workers)
            results[backend] = batch
            same = ""
            if backend == "numpy":
                same = "yes" if np.array_equal(batch.snaps, results["numba"].snaps) else "ulp-level"
            print(f"{name:<10} {backend:<7} {secs:8.3f} {1e9 * secs / steps:9.1f}  {same}")


if __name__ == "__main__":
    main()
