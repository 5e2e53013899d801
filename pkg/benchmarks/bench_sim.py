"""Compare the compiled and pure-Python simulation kernels.

Both backends draw the same paths, so the benchmark also checks that the
terminal states agree before reporting timings.

    python benchmarks/bench_sim.py --paths 20000 --t 50
"""

import argparse
import time

import numpy as np

from quadqbd import corpus, kernels
from quadqbd.sim import SimConfig, run_paths

MODELS = {
    "product-form": corpus.product_form,
    "level-independent": corpus.level_independent,
    "variable-k": corpus.variable_k,
}


def bench(spec, backend, paths, t, seed, repeat):
    cfg = SimConfig(seed=seed, horizon=t, paths=paths, backend=backend)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        batch = run_paths(spec, (0, 0, 1), cfg)
        best = min(best, time.perf_counter() - start)
    return best, batch


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=20_000)
    p.add_argument("--t", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--models", nargs="*", default=sorted(MODELS), choices=sorted(MODELS))
    args = p.parse_args(argv)

    backends = kernels.available()
    if "compiled" not in backends:
        print("compiled kernels not built; timing the Python fallback only")
    print(f"{'model':<18} {'backend':<9} {'seconds':>9} {'paths/s':>11} {'jumps/s':>12}")
    for name in args.models:
        spec = MODELS[name]()
        results = {}
        for backend in backends:
            sec, batch = bench(spec, backend, args.paths, args.t, args.seed, args.repeat)
            results[backend] = (sec, batch)
            print(f"{name:<18} {backend:<9} {sec:9.3f} {args.paths / sec:11.0f} {batch.jumps.sum() / sec:12.0f}")
        if len(results) == 2:
            (c_sec, c), (p_sec, py) = results["compiled"], results["python"]
            same = np.array_equal(c.terminal, py.terminal) and np.array_equal(c.jumps, py.jumps)
            print(f"{'':<18} speedup {p_sec / c_sec:.1f}x, identical output: {same}")


if __name__ == "__main__":
    main()
