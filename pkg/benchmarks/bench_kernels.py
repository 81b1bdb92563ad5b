"""
Compare the compiled and pure-numpy kernels.

Times ``category_mass`` and ``log_evidence`` on SG graphs of increasing size
for every available backend, in dense and CSR storage, plus one full fit per
backend.  Prints a table and optionally writes it as CSV.

Usage::

    python benchmarks/bench_kernels.py --sizes 200 400 800 --repeat 20
"""

import argparse
import csv
import logging
import sys
import timeit

import numpy as np

from ssbm import kernels
from ssbm.graph import SignedGraph
from ssbm.learner import FitConfig, fit
from ssbm.synth import SgConfig, generate_sg

logger = logging.getLogger("bench_kernels")


def time_call(fn, repeat):
    # best of 3 batches, per call
    timer = timeit.Timer(fn)
    return min(timer.repeat(repeat=3, number=repeat)) / repeat


def bench_size(n, repeat, rng):
    m = n // 4
    graph, _ = generate_sg(SgConfig(4, m, min(m, n - 1), 0.8, 0.5, 0.5, seed=1))
    storages = {"dense": graph,
                "csr": SignedGraph(graph.to_dense(), dense_limit=0)}
    weights = rng.random(graph.n)
    loglam = np.log(rng.dirichlet(np.ones(3), size=graph.n))
    rows = []
    for storage, g in storages.items():
        for backend in kernels.available_backends():
            g.indicator_matrices()  # cached once, outside the timing
            mass = time_call(lambda: kernels.category_mass(
                g, weights, backend=backend), repeat)
            evid = time_call(lambda: kernels.log_evidence(
                g, loglam, backend=backend), repeat)
            rows.append({"n": graph.n, "storage": storage, "backend": backend,
                         "op": "category_mass", "seconds": mass})
            rows.append({"n": graph.n, "storage": storage, "backend": backend,
                         "op": "log_evidence", "seconds": evid})
    for backend in kernels.available_backends():
        result = fit(graph, FitConfig(restarts=1, seed=1, backend=backend))
        rows.append({"n": graph.n, "storage": "dense", "backend": backend,
                     "op": "fit_per_sweep",
                     "seconds": float(np.median(result.sweep_times))})
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[200, 400, 800])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--csv", default=None, help="optional output path")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    logger.info("backends: %s (default %s)", kernels.available_backends(),
                kernels.BACKEND)

    rng = np.random.default_rng(0)
    rows = []
    for n in args.sizes:
        rows.extend(bench_size(n, args.repeat, rng))

    print(f"{'n':>6} {'storage':>7} {'op':>14} " +
          " ".join(f"{b:>12}" for b in kernels.available_backends()) +
          "  speedup")
    keys = sorted({(r["n"], r["storage"], r["op"]) for r in rows})
    for n, storage, op in keys:
        t = {r["backend"]: r["seconds"] for r in rows
             if (r["n"], r["storage"], r["op"]) == (n, storage, op)}
        if not t:
            continue
        cells = " ".join(f"{t.get(b, float('nan')) * 1e3:10.3f}ms"
                         for b in kernels.available_backends())
        speed = t.get("python", np.nan) / t.get("cython", np.nan)
        print(f"{n:>6} {storage:>7} {op:>14} {cells}  {speed:6.2f}x")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
