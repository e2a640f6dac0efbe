"""One test per acceptance criterion; each records a PASS/FAIL line for the summary."""

import math
import subprocess
import sys

import numpy as np

from pbnsim import (BooleanFunction, Model, Node, exact_transition_matrix,
                    find_leaves, generate_random, prepare, reduce, save_model)
from pbnsim.bench import BenchmarkConfig, time_method
from pbnsim.engine import grouped_step_distribution, reference_step_distribution
from pbnsim.estimator import (estimate_steady_state, marginal_steady_state_exact, predict_speedup,
                              stationary_distribution)
from pbnsim.grouping import lower_bound, partition
from pbnsim.sampling import alias_distribution, build_alias, perturbation_probs

from conftest import ACCEPTANCE_LINES, random_small_model


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _pack(ps, s):
    return sum(((s >> node) & 1) << b for b, node in enumerate(ps.bit_nodes))


def _unpacked_row(ps, dist, size):
    row = np.zeros(size)
    for packed, q in dist.items():
        row[sum(((packed >> b) & 1) << node for b, node in enumerate(ps.bit_nodes))] += q
    return row


def test_criterion_1_oracle_equivalence():
    worst = 0.0
    for i in range(200):
        n = 1 + i % 6
        p = (0.01, 0.25)[i % 2]
        m = random_small_model(1000 + i, n, p, max_functions=3, max_parents=3)
        ps = prepare(m, k_max=1 + i % 4)
        P = exact_transition_matrix(m)
        size = 1 << n
        for s in range(size):
            ref = np.zeros(size)
            for nxt, q in reference_step_distribution(m, s).items():
                ref[nxt] += q
            grp = _unpacked_row(ps, grouped_step_distribution(ps, _pack(ps, s)), size)
            worst = max(worst, np.abs(ref - P[s]).max(), np.abs(grp - P[s]).max())
    record(1, worst <= 1e-10, f"200 models, max |row diff| = {worst:.3g} (tol 1e-10)")


def _leafy_models(count):
    rng = np.random.default_rng(77)
    seed = 0
    while count:
        seed += 1
        n = int(rng.integers(4, 11))
        interest = frozenset(int(x) for x in rng.choice(n, size=int(rng.integers(1, n)), replace=False))
        m = random_small_model(seed, n, float(rng.choice([0.01, 0.1, 0.25])), max_parents=3,
                               interest=interest)
        if 2 <= len(find_leaves(m)) <= 5:
            count -= 1
            yield m


def test_criterion_2_reduction_soundness():
    worst = 0.0
    for m in _leafy_models(100):
        rm = reduce(m)
        pi_full = stationary_distribution(exact_transition_matrix(m))
        pi_red = stationary_distribution(exact_transition_matrix(rm))
        marginal = np.zeros(1 << rm.model.n)
        for s, q in enumerate(pi_full):
            marginal[sum(((s >> node) & 1) << b for b, node in enumerate(rm.kept))] += q
        worst = max(worst, np.abs(marginal - pi_red).max())
    record(2, worst <= 1e-8, f"100 models with 2-5 leaves, max |pi diff| = {worst:.3g} (tol 1e-8)")


def test_criterion_3_masked_perturbation():
    worst = 0.0
    for p in (0.1, 0.25, 0.5):
        for k in range(1, 7):
            law = alias_distribution(build_alias(perturbation_probs(k, p)))
            for k_last in range(1, k + 1):
                mask = (1 << k_last) - 1
                joint = np.zeros(1 << k_last)
                for c, q in enumerate(law):
                    joint[c & mask] += q
                for b in range(k_last):
                    marg = sum(q for c, q in enumerate(joint) if (c >> b) & 1)
                    worst = max(worst, abs(marg - p))
                for c in range(1 << k_last):
                    ones = bin(c).count("1")
                    worst = max(worst, abs(joint[c] - p ** ones * (1 - p) ** (k_last - ones)))
    record(3, worst <= 1e-12, f"k<=6, all k', 3 rates, max error = {worst:.3g} (tol 1e-12)")


def _set_partitions(items, max_blocks):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest, max_blocks):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        if len(part) < max_blocks:
            yield [[first]] + part


def test_criterion_4_lower_bound():
    rng = np.random.default_rng(4)
    failures = []
    for trial in range(50):
        weights = [int(w) for w in rng.integers(2, 7, size=int(rng.integers(1, 9)))]
        theta = int(rng.integers(sum(weights), math.prod(weights) + 1))
        m_hat = lower_bound(weights, theta)
        best_below = math.inf
        if m_hat > 1:
            for part in _set_partitions(list(range(len(weights))), m_hat - 1):
                best_below = min(best_below, sum(math.prod(weights[i] for i in b) for b in part))
        nodes = tuple(Node(f"w{i}", tuple(BooleanFunction((), j & 1) for j in range(w)), (1.0 / w,) * w)
                      for i, w in enumerate(weights))
        plan = partition(Model(nodes, 0.1), theta=theta, max_table_bits=30)
        if not (best_below > theta and plan.budget_sum() <= theta):
            failures.append((weights, theta))
    record(4, not failures, f"50 weight lists, counterexamples = {len(failures)}")


def _coverage_models():
    out = []
    seed = 500
    while len(out) < 20:
        seed += 1
        n = 1 + seed % 4
        m = random_small_model(seed, n, (0.02, 0.05, 0.1, 0.2)[seed % 4], max_functions=3, max_parents=2)
        exact = marginal_steady_state_exact(m, ((0, 1),))
        if 0.02 < exact < 0.98:
            out.append((m, exact))
    return out


def test_criterion_5_estimator_coverage():
    worst = 100
    for m, exact in _coverage_models():
        ps = prepare(m)
        hits = 0
        for trial in range(100):
            res = estimate_steady_state("grouped", ps, ((0, 1),), precision=0.01, confidence=0.95, seed=trial)
            hits += abs(res.estimate - exact) <= 0.01
        worst = min(worst, hits)
    record(5, worst >= 90, f"20 models x 100 trials, worst model {worst}/100 within r=0.01 (need >= 90)")


def test_criterion_6_performance_trend():
    steps = 10 ** 7
    cfg = BenchmarkConfig(corpus=[], steps=steps, methods=("old", "grouped"), warmup=1000, repeats=1)
    speedups = {}
    for name, (n, d, leaves) in {"leafy": (450, 1.6, 0.9), "dense": (1000, 7.0, 0.003)}.items():
        m = generate_random(n, d, leaves, seed=1)
        _, t_old, _ = time_method("old", m, cfg)
        _, t_new, _ = time_method("grouped", m, cfg)
        speedups[name] = t_old / t_new
    ok = speedups["leafy"] > 5 and speedups["leafy"] > speedups["dense"] and speedups["dense"] >= 1.2
    record(6, ok, f"10^7 steps, leafy {speedups['leafy']:.2f}x (need > 5), "
                  f"dense {speedups['dense']:.2f}x (need >= 1.2 and < leafy)")


def test_criterion_7_regression():
    cases = [((0.0, 1.0), 1.95), ((0.9, 1.6), 6.4506), ((0.5, 2.0), 4.385), ((1.0, 0.0), 8.0),
             ((0.25, 8.1), 36.9356)]
    worst = max(abs(predict_speedup(*x) - y) for x, y in cases)
    record(7, worst <= 1e-12, f"5 inputs, max error = {worst:.3g} (tol 1e-12)")


def test_criterion_8_cli_determinism(tmp_path):
    path = tmp_path / "m.pbn"
    save_model(generate_random(60, 2.0, 0.4, seed=8, perturbation_rate=0.01), path)
    outs = []
    for run in range(2):
        csv_path = tmp_path / f"run{run}.csv"
        proc = subprocess.run([sys.executable, "-m", "pbnsim", "simulate", "--model", str(path), "--steps",
                               "100000", "--seed", "42", "--report-csv", str(csv_path)],
                              capture_output=True, check=True)
        outs.append((proc.stdout, csv_path.read_bytes()))
    same = outs[0] == outs[1] and outs[0][0] == outs[0][1]
    record(8, same, f"two 'simulate --seed 42' runs, CSV bytes identical = {same}")
