"""Time the compiled boosting kernels against the NumPy fallback.

Usage: python3 benchmarks/bench_kernels.py [--rows 2000] [--features 50] [--repeat 3]
"""
import argparse
import time

import numpy as np

from afsbm.learners import LearnerConfig
from afsbm.learners.gbdt import _Binner, fit_gbdt
from afsbm.kernels import get_backend


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=2000)
    p.add_argument("--features", type=int, default=50)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()

    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, (args.rows, args.features))
    y = np.sin(6 * X[:, 0]) + X[:, 1] ** 2 + 0.1 * rng.normal(size=args.rows)
    binner = _Binner(X, 64)
    binned = binner.transform(X)
    rows = np.arange(args.rows, dtype=np.intp)
    feats = np.arange(args.features, dtype=np.intp)
    grad, hess = y - y.mean(), np.ones(args.rows)
    n_used = np.ascontiguousarray(binner.n_bins_used)
    cfg = LearnerConfig(num_leaves=20, n_estimators=50)

    try:
        backends = {"python": get_backend("python"), "cython": get_backend("cython")}
    except ImportError:
        backends = {"python": get_backend("python")}
        print("compiled extension not built; timing the fallback only")

    results = {}
    for name, kern in backends.items():
        model = fit_gbdt(cfg, X, y, kern=kern)
        flat = model._flat
        results[name] = {
            "histogram": best_of(lambda: kern.build_histogram(binned, rows, feats, grad, hess, binner.n_bins),
                                 args.repeat),
            "grow_tree": best_of(lambda: kern.grow_tree(binned, rows, feats, grad, hess, binner.n_bins, n_used,
                                                        20, 20, 0.0, 1e-12), args.repeat),
            "predict": best_of(lambda: kern.predict_ensemble(X, *flat, np.zeros(args.rows)), args.repeat),
            "fit (50 trees)": best_of(lambda: fit_gbdt(cfg, X, y, kern=kern), args.repeat),
        }

    print(f"{args.rows} rows x {args.features} features, best of {args.repeat}")
    print(f"{'kernel':<16}" + "".join(f"{n:>12}" for n in results) + ("     speedup" if len(results) == 2 else ""))
    for key in results["python"]:
        line = f"{key:<16}" + "".join(f"{results[n][key] * 1e3:>10.2f}ms" for n in results)
        if len(results) == 2:
            line += f"{results['python'][key] / results['cython'][key]:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
