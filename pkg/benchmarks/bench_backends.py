"""Compare the compiled and pure-Python backends.

Times a Gaussian Gram matrix and a full kernel LP solve on the bundled
haberman data with each available backend, and checks both give the same
answer.

    python benchmarks/bench_backends.py [--repeat N] [--gamma G] [--C C]
"""

import argparse
import time

import numpy as np

from fatmargin import _kernels
from fatmargin.data_io import bundled_dataset_path, load_csv
from fatmargin.dataset import StandardizationParams
from fatmargin.kernels import KernelSpec, gram_matrix, independent_columns
from fatmargin.lp_solver import SolverOptions, solve_lp
from fatmargin.mcm import RANK_TOLERANCE, build_kernel_lp
from fatmargin.membership import compute_memberships


def best_of(fn, repeat):
    times, result = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return min(times), result


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--gamma", type=float, default=0.1)
    parser.add_argument("--C", type=float, default=0.1)
    args = parser.parse_args(argv)

    ds = load_csv(bundled_dataset_path("haberman"))
    Z = StandardizationParams.fit(ds.features).transform(ds.features)
    spec = KernelSpec.gaussian(args.gamma)
    s = compute_memberships(Z, ds.labels).values
    G = gram_matrix(spec, Z)
    problem = build_kernel_lp(G, ds.labels, args.C, s, candidates=independent_columns(G, RANK_TOLERANCE))
    print(f"haberman: {Z.shape[0]} samples, kernel LP {problem.n_variables} variables x "
          f"{problem.n_constraints} rows")

    results = {}
    for name in _kernels.available_backends():
        t_gram, gram = best_of(lambda: gram_matrix(spec, Z, backend=name), args.repeat)
        t_lp, sol = best_of(lambda: solve_lp(problem, SolverOptions(backend=name)), args.repeat)
        results[name] = (t_gram, t_lp, gram, sol)
        print(f"{name:>7}: gram {t_gram * 1e3:8.2f} ms   lp solve {t_lp:7.3f} s   "
              f"({sol.iterations} pivots, objective {sol.objective_value:.10g})")

    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        print(f"speedup: gram x{py[0] / cy[0]:.2f}   lp solve x{py[1] / cy[1]:.2f}")
        print(f"max |gram difference| {np.max(np.abs(py[2] - cy[2])):.2e}   "
              f"objective difference {abs(py[3].objective_value - cy[3].objective_value):.2e}")
    else:
        print("compiled backend not built; only the fallback was timed")


if __name__ == "__main__":
    main()
