"""Time the compiled kernels against the pure-Python fallback.

Both backends run the same solves and must return bit-identical solutions;
the script reports median wall time per backend and the speedup.

    python3 benchmarks/bench_backends.py --n 200 --repeat 3
"""

import argparse
import statistics
import time

import numpy as np

from diffuse import kernels
from diffuse.io import make_fixture
from diffuse.solvers import SolveConfig, solve_eigen_diplus, solve_linear


def _cases(n, seed):
    m, b = make_fixture("random_substochastic", n, seed)
    ergodic, _ = make_fixture("random_ergodic", min(n, 100), seed)
    yield "linear greedy", lambda be: solve_linear(m, b, SolveConfig(scheduler="greedy", trace_every=0, backend=be))
    yield "linear cyclic", lambda be: solve_linear(m, b, SolveConfig(scheduler="cyclic", trace_every=0, backend=be))
    yield "DI+ negative", lambda be: solve_eigen_diplus(ergodic, SolveConfig(scheduler="negative", trace_every=0,
                                                                             backend=be))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    backends = kernels.available()
    if "compiled" not in backends:
        print("compiled kernels are not built; only the Python fallback is timed")
    print(f"{'case':<16} {'steps':>8} " + " ".join(f"{b + ' [s]':>14}" for b in backends) + f" {'speedup':>9}")
    for name, run in _cases(args.n, args.seed):
        times, results = {}, {}
        for be in backends:
            samples = []
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                results[be] = run(be)
                samples.append(time.perf_counter() - t0)
            times[be] = statistics.median(samples)
        sols = [r.solution for r in results.values()]
        if not all(np.array_equal(sols[0], s) for s in sols[1:]):
            raise SystemExit(f"{name}: backends disagree")
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        steps = next(iter(results.values())).steps_used
        print(f"{name:<16} {steps:>8d} " + " ".join(f"{times[b]:>14.4f}" for b in backends) + f" {speed:>8.1f}x")
    print("wall times are machine-dependent; solutions were checked bit-identical across backends")


if __name__ == "__main__":
    main()
