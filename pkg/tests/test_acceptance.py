"""
End-to-end acceptance gate.

Each criterion prints one ``ACCEPTANCE <n> PASS|FAIL`` line with the
measured numbers, whether or not it passes.  Criteria 1-6 share memoized
fits so criterion 7 can inspect every one of them.
"""

import csv
import functools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from ssbm import harness
from ssbm.errors import DegenerateModel
from ssbm.evaluation import nmi
from ssbm.learner import (FitConfig, ModelParams, cost, fit, fit_from,
                          log_evidence_matrix, m_step_lambda, m_step_phi,
                          responsibilities)
from ssbm.synth import (SgConfig, generate_block_pair, generate_sg,
                        network_vi_config)

import oracles
from conftest import random_signed

pytestmark = pytest.mark.acceptance

SEEDS = range(10)
RESULTS = {}


def report(capsys, number, passed, detail):
    line = f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS[number] = line
    with capsys.disabled():
        print("\n" + line)
    return passed


@functools.lru_cache(maxsize=None)
def run_point(family, params, seed):
    if family == "sg":
        graph, truth = generate_sg(SgConfig(*params, seed=seed))
    else:
        graph, truth = generate_block_pair(network_vi_config(seed=seed))
    result = fit(graph, FitConfig(seed=seed, restarts=5))
    return graph, truth, result


def sweep(family, grid, seeds=SEEDS):
    """Per grid point: (params, median NMI, median K, every K, all runs)."""
    out = []
    for params in grid:
        runs = [run_point(family, params, s) for s in seeds]
        scores = [nmi(t, r.best_partition) for _, t, r in runs]
        ks = [r.k_found for _, _, r in runs]
        out.append((params, float(np.median(scores)), float(np.median(ks)),
                    ks, runs))
    return out


def planted_start(graph, truth, k_max):
    """Parameters whose responsibilities are (almost) the planted blocks."""
    zeta = np.full((graph.n, k_max), 1e-3)
    zeta[np.arange(graph.n), truth.assignment] = 1.0
    zeta /= zeta.sum(axis=1, keepdims=True)
    lam = np.stack([m_step_lambda(graph, zeta, k) for k in range(k_max)])
    phi = np.zeros(k_max)
    phi[:truth.k] = truth.sizes() / graph.n
    return ModelParams(phi, lam)


def cheaper_than_planted(runs):
    """Seeds where the returned model costs less than the planted-start fit."""
    count = 0
    for graph, truth, result in runs:
        k_max = result.best_params.k_max
        ref = fit_from(graph, planted_start(graph, truth, k_max),
                       FitConfig(k_min=truth.k, k_max=k_max))
        count += result.best_cost < ref.per_k_best[truth.k]
    return count


def check_grid(capsys, number, family, grid, min_nmi, need_k4, budget=None):
    started = time.perf_counter()
    points = sweep(family, grid)
    elapsed = time.perf_counter() - started
    passed = [med >= min_nmi and (not need_k4 or k == 4)
              for _, med, k, _, _ in points]
    ok = all(passed) and (budget is None or elapsed < budget)
    detail = "; ".join(f"{p}: nmi={med:.3f} K={k:g} {ks}"
                       for p, med, k, ks, _ in points)
    for good, (_, _, _, _, runs) in zip(passed, points):
        if not good:
            # separates search failures from the cost preferring another model
            detail += (f"; returned model cheaper than planted-start fit in "
                       f"{cheaper_than_planted(runs)}/{len(runs)} seeds")
    limit = "no budget" if budget is None else f"budget {budget}s"
    report(capsys, number, ok, f"{detail}; {elapsed:.0f}s ({limit})")
    assert ok, detail


GRID_1 = [(4, 32, 32, p, 0.0, 0.0) for p in (0.4, 0.6, 0.8, 1.0)]
GRID_2 = [(4, 32, 32, 0.6, p, 0.0) for p in (0.0, 0.25, 0.5)]
GRID_3 = [(4, 32, 32, 0.6, 0.0, p) for p in (0.0, 0.25, 0.5)]
GRID_4 = [(4, 32, 32, 0.6, 0.5, 0.5)]
GRID_5 = [("network_vi",)]
SIZES_6 = (50, 100, 200)
SEEDS_6 = range(3)


def test_criterion_01_balanced_recovery(capsys):
    check_grid(capsys, 1, "sg", GRID_1, 0.99, True, 120)


def test_criterion_02_intra_block_noise(capsys):
    check_grid(capsys, 2, "sg", GRID_2, 0.99, True, 120)


def test_criterion_03_inter_block_noise(capsys):
    check_grid(capsys, 3, "sg", GRID_3, 0.99, False, 120)


def test_criterion_04_double_noise(capsys):
    check_grid(capsys, 4, "sg", GRID_4, 0.95, False)


def test_criterion_05_network_vi(capsys):
    check_grid(capsys, 5, "block_pair", GRID_5, 0.99, True, 180)


def grid_6():
    return [(4, m, m, 0.8, 0.5, 0.5) for m in SIZES_6]


def test_criterion_06_scalability(capsys):
    started = time.perf_counter()
    rows = []
    for params in grid_6():
        runs = [run_point("sg", params, s) for s in SEEDS_6]
        scores = [nmi(t, r.best_partition) for _, t, r in runs]
        per_sweep = float(np.median(np.concatenate(
            [r.sweep_times for _, _, r in runs])))
        rows.append((runs[0][0].n, min(scores), per_sweep))
    elapsed = time.perf_counter() - started
    accurate = all(score >= 0.99 for _, score, _ in rows)
    ratios = [(t2 / t1, 2 * (n2 / n1) ** 3) for (n1, _, t1), (n2, _, t2)
              in zip(rows, rows[1:])]
    cubic = all(r <= bound for r, bound in ratios)
    ok = accurate and cubic and elapsed < 900
    detail = "; ".join(f"n={n}: min nmi={s:.3f} sweep={t * 1e3:.1f}ms"
                       for n, s, t in rows)
    detail += "; growth " + ", ".join(f"{r:.2f}x<={b:.0f}x" for r, b in ratios)
    report(capsys, 6, ok, f"{detail}; {elapsed:.0f}s (budget 900s)")
    assert ok, detail


def all_fits():
    grids = [("sg", GRID_1), ("sg", GRID_2), ("sg", GRID_3), ("sg", GRID_4),
             ("block_pair", GRID_5)]
    for family, grid in grids:
        for params in grid:
            for s in SEEDS:
                yield run_point(family, params, s)
    for params in grid_6():
        for s in SEEDS_6:
            yield run_point("sg", params, s)


def test_criterion_07_resolution_limit(capsys):
    checked, bad = 0, []
    for graph, _, result in all_fits():
        if not result.converged:
            continue
        checked += 1
        live = result.best_params.live
        k_ne = result.best_params.k_ne
        mass = result.best_zeta.sum(axis=0)[live]
        if k_ne > 1 and not np.all(mass > k_ne):
            bad.append((graph.n, k_ne, mass.min()))
        if k_ne >= math.sqrt(graph.n):
            bad.append((graph.n, k_ne, "k_ne >= sqrt(n)"))
    ok = not bad and checked > 0
    report(capsys, 7, ok, f"{checked} converged fits checked, "
                          f"{len(bad)} violations {bad[:3]}")
    assert ok


def test_criterion_08_monotone_cost(capsys):
    rng = np.random.default_rng(8)
    worst, violations = 0.0, 0
    for trial in range(50):
        n = int(rng.integers(6, 41))
        if trial % 2:
            graph = random_signed(rng, n, float(rng.uniform(0.05, 0.9)))
        else:
            c = int(rng.integers(2, 4))
            m = max(2, n // c)
            graph, _ = generate_sg(SgConfig(c, m, min(4, c * m - 1),
                                            float(rng.uniform(0.3, 1)),
                                            float(rng.uniform(0, 0.5)),
                                            float(rng.uniform(0, 0.5)),
                                            seed=trial))
        result = fit(graph, FitConfig(seed=trial, restarts=1))
        regimes = {}
        for _, k_ne, value in result.cost_trace:
            regimes.setdefault(k_ne, []).append(value)
        for values in regimes.values():
            for before, after in zip(values, values[1:]):
                rise = (after - before) / abs(before)
                worst = max(worst, rise)
                violations += rise > 1e-6
    ok = violations == 0
    report(capsys, 8, ok, f"50 graphs, {violations} rises beyond 1e-6, "
                          f"largest relative rise {worst:.2e}")
    assert ok


def rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(a - b) / scale)) if a.size else 0.0


def test_criterion_09_oracle_equivalence(capsys):
    rng = np.random.default_rng(9)
    worst, compared = 0.0, 0
    for _ in range(20):
        n = int(rng.integers(3, 7))
        k = int(rng.integers(1, 3))
        graph = random_signed(rng, n, float(rng.uniform(0.2, 0.9)))
        adj = graph.to_dense()
        phi = oracles.random_fraction_simplex(rng, k)
        lam = [[oracles.random_fraction_simplex(rng, 3) for _ in range(n)]
               for _ in range(k)]
        params = ModelParams([float(x) for x in phi],
                             [[[float(x) for x in t] for t in row]
                              for row in lam])
        c = 2 * k

        zeta_o = oracles.e_step(adj, phi, lam)
        zeta = responsibilities(params.phi, log_evidence_matrix(graph, params))
        worst = max(worst, rel(zeta, [[float(x) for x in r] for r in zeta_o]))
        worst = max(worst, rel([cost(graph, params)],
                               [float(oracles.cost(adj, phi, lam))]))

        masses = [sum(r[j] for r in zeta_o) for j in range(k)]
        if all(m <= Fraction(c, 2) for m in masses):
            with pytest.raises(DegenerateModel):
                m_step_phi(zeta, c)
            compared += 1
            continue
        phi_new_o = oracles.m_step_phi(zeta_o, c)
        update = m_step_phi(zeta, c)
        worst = max(worst, rel(update.phi, [float(x) for x in phi_new_o]))
        live = [j for j in range(k) if phi_new_o[j] > 0]
        zeta_o = [[r[j] if j in live else Fraction(0) for j in range(k)]
                  for r in zeta_o]
        zeta_o = [[x / sum(r) for x in r] for r in zeta_o]
        lam_new_o = [oracles.m_step_lambda(adj, zeta_o, j, floor=1e-10)
                     if j in live else lam[j] for j in range(k)]
        lam_new = params.lam.copy()
        for j in live:
            lam_new[j] = m_step_lambda(graph, update.zeta, j)
            worst = max(worst, rel(lam_new[j], [[float(x) for x in t]
                                                for t in lam_new_o[j]]))
        new = ModelParams(update.phi, lam_new)
        worst = max(worst, rel([cost(graph, new)],
                               [float(oracles.cost(adj, phi_new_o,
                                                   lam_new_o))]))
        compared += 1
    ok = compared == 20 and worst <= 1e-9
    report(capsys, 9, ok, f"{compared} graphs, worst relative error "
                          f"{worst:.2e} (limit 1e-9)")
    assert ok


def test_criterion_10_nmi(capsys):
    rng = np.random.default_rng(10)
    worst, asym, relabel = 0.0, 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(1, 51))
        a = rng.integers(0, int(rng.integers(1, 8)), n).tolist()
        b = rng.integers(0, int(rng.integers(1, 8)), n).tolist()
        v = nmi(a, b)
        worst = max(worst, abs(v - oracles.nmi(oracles.compact(a),
                                               oracles.compact(b))))
        asym = max(asym, abs(v - nmi(b, a)))
        perm = rng.permutation(8)
        relabel = max(relabel, abs(v - nmi([perm[x] for x in a], b)),
                      abs(v - nmi(a, [perm[x] for x in b])))
    ok = max(worst, asym, relabel) <= 1e-12
    report(capsys, 10, ok, f"100 pairs: oracle {worst:.1e}, symmetry "
                           f"{asym:.1e}, relabel {relabel:.1e} (limit 1e-12)")
    assert ok


SUITE_11 = """
[fit]
restarts = 2

[sweep.network_ii]
family = sg
c = 4
m = 16
k = 12
p_in = 0.6
param = p_minus
start = 0
stop = 0.5
step = 0.25
seeds = 2

[sweep.network_vi]
family = network_vi
block_size = 12
param = block_size
values = 12
seeds = 2
"""

METRIC_COLUMNS = ("param_value", "seed", "nmi", "k_found", "error")


def metric_columns(path):
    with open(path, newline="") as fh:
        return [tuple(row[c] for c in METRIC_COLUMNS)
                for row in csv.DictReader(fh)]


def test_criterion_11_bench_determinism(capsys, tmp_path):
    suite = tmp_path / "suite.ini"
    suite.write_text(SUITE_11)
    harness.cmd_bench(suite, tmp_path / "a")
    harness.cmd_bench(suite, tmp_path / "b")
    harness.cmd_bench(suite, tmp_path / "c", workers=2)
    same = True
    rows = 0
    for name in ("network_ii", "network_vi"):
        first = metric_columns(tmp_path / "a" / f"{name}.csv")
        rows += len(first)
        for other in ("b", "c"):
            same &= first == metric_columns(tmp_path / other / f"{name}.csv")
    report(capsys, 11, same, f"{rows} rows identical across 3 reruns "
                             f"(serial, serial, 2 workers)" if same else
           "metric columns differ between reruns")
    assert same
