"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --samples 20000 --trees 64 --depth 8

Each (backend, workload) pair runs once to warm up (JIT compile or cache load)
and then ``--repeat`` times; the best wall time is reported.
"""
import argparse
import time

import numpy as np

from adarf import engine
from adarf.engine import PolicyConfig
from adarf.forest import Dataset
from adarf.quantize import quantize_forest
from adarf.trainer import TrainConfig, train_forest


def make_data(n, n_features, n_classes, seed):
    rng = np.random.default_rng(seed)
    centers = rng.normal(0, 1.2, size=(n_classes, n_features))
    y = rng.integers(0, n_classes, size=n)
    return Dataset(centers[y] + rng.normal(size=(n, n_features)), y, n_classes)


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=20000)
    ap.add_argument("--features", type=int, default=16)
    ap.add_argument("--classes", type=int, default=4)
    ap.add_argument("--trees", type=int, default=64)
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--alpha", type=float, default=4.0)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    train = make_data(3000, args.features, args.classes, args.seed)
    forest = train_forest(train, TrainConfig(args.trees, args.depth, rng_seed=args.seed, n_jobs=4))
    qf = quantize_forest(forest, train)
    Xq = qf.quantize_input(make_data(args.samples, args.features, args.classes, args.seed + 1).features)
    adaptive = PolicyConfig("agg-sm", alpha=args.alpha, batch=2)
    print(f"forest: {qf.num_trees} trees, {qf.n_nodes} nodes; {len(Xq)} inputs")

    workloads = {
        "full": lambda b: engine.run_batch(qf, Xq, backend=b),
        f"agg-sm a={args.alpha:g} B=2": lambda b: engine.run_batch(qf, Xq, adaptive, backend=b),
        "leaf table": lambda b: engine.leaf_table(qf, Xq, backend=b),
    }
    avg_trees = engine.run_batch(qf, Xq, adaptive).trees.mean()
    print(f"{'workload':<22}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, run in workloads.items():
        t_jit = best_of(lambda: run("numba"), args.repeat)
        t_np = best_of(lambda: run("numpy"), args.repeat)
        print(f"{name:<22}{t_jit * 1e3:>10.1f}{t_np * 1e3:>10.1f}{t_np / t_jit:>8.1f}x")
    print(f"adaptive run executes {avg_trees:.2f} of {qf.num_trees} trees on average")


if __name__ == "__main__":
    main()
