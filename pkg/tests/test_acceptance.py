"""End-to-end acceptance suite: one PASS/FAIL line per criterion.

Lines are collected through the ``acceptance_report`` fixture and printed in
the terminal summary, so they show up even without ``-s``.
"""

import math
import time

import numpy as np
import pytest

from ssdec.bench import CostModel, rows_to_csv, simulate_cost, sweep_beta, sweep_draft_len
from ssdec.cli import main
from ssdec.models import TabularMarkovModel, cross_entropy, fit_tabular
from ssdec.scenarios import _corpus, load_scenario
from ssdec.ssd import SsdConfig, ssd_decode
from ssdec.verify import check_acceptance_rate, check_losslessness, check_step_endpoints

# argmax of mean speedup over draft lengths 1..8 on degraded-draft, 200 trials, seed 0
PINNED_BEST_DRAFT_LEN = 3
SWEEP_TRIALS = 200


def record(report, number, name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {number}. {name}: {detail}"
    report.append(line)
    print(line)
    return passed


@pytest.fixture(scope="module")
def degraded():
    return load_scenario("degraded-draft")


def test_1_lossless_at_beta_zero(acceptance_report):
    start = time.perf_counter()
    result = check_losslessness(60, seed=0, tol=1e-10)
    elapsed = time.perf_counter() - start
    ok = result.passed and elapsed < 60
    assert record(acceptance_report, 1, "lossless at beta=0", ok,
                  f"max TV {result.measured:.2e} over 60 pairs (< 1e-10), {elapsed:.1f}s (< 60s)")


def test_2_acceptance_rate_formula(acceptance_report):
    result = check_acceptance_rate(100_000, sigmas=3.0, betas=(0.0, 0.2, 0.4, 1.0))
    assert record(acceptance_report, 2, "acceptance rate matches closed form", result.passed,
                  f"worst |z| {result.measured:.2f} over 100k cycles per beta (<= 3)")


def test_3_beta_endpoints(acceptance_report):
    result = check_step_endpoints(1000, tol=1e-12)
    assert record(acceptance_report, 3, "step law endpoints", result.passed,
                  f"max deviation {result.measured:.1e} over 1000 pairs (<= 1e-12)")


def test_4_rtf_trend_in_beta(acceptance_report, degraded):
    rows = sweep_beta(degraded.target, degraded.draft, degraded.prefix, SsdConfig(),
                      [0.0, 0.1, 0.2, 0.3, 0.4], CostModel(), SWEEP_TRIALS)
    ok = True
    for a, b in zip(rows, rows[1:]):
        sigma = math.hypot(a.sem("rtf_analog"), b.sem("rtf_analog"))
        ok &= b.rtf_analog <= a.rtf_analog or b.rtf_analog - a.rtf_analog <= sigma
    trend = " -> ".join(f"{r.rtf_analog:.3g}" for r in rows)
    assert record(acceptance_report, 4, "rtf_analog non-increasing in beta", ok, trend)


def test_5_draft_len_interior_max(acceptance_report, degraded):
    rows = sweep_draft_len(degraded.target, degraded.draft, degraded.prefix, SsdConfig(),
                           range(1, 9), CostModel(), SWEEP_TRIALS)
    speedups = [r.speedup_vs_ar for r in rows]
    best = rows[int(np.argmax(speedups))].draft_len
    ok = 1 < best < 8 and best == PINNED_BEST_DRAFT_LEN
    assert record(acceptance_report, 5, "speedup peaks at an interior draft length", ok,
                  f"argmax L_d={best} (pinned {PINNED_BEST_DRAFT_LEN}), "
                  f"peak {max(speedups):.4g}")


def test_6_identical_models_speedup(acceptance_report):
    sc = load_scenario("identical")
    cost = CostModel(c_draft=1.0, c_target=3.0, c_target_serial=3.0)
    result = ssd_decode(sc.target, sc.draft, sc.prefix,
                        SsdConfig(draft_len=3, target_len=100, beta=0.0, seed=0))
    measured = simulate_cost(result, cost).speedup_vs_ar
    expected = (3 + 1) * cost.c_target_serial / (3 * cost.c_draft + cost.c_target)
    ok = abs(measured - expected) < 1e-9 and expected == 2.0
    assert record(acceptance_report, 6, "identical-models speedup equals closed form", ok,
                  f"measured {measured!r}, closed form {expected!r}")


def test_7_fit_minimizes_cross_entropy(acceptance_report):
    start = time.perf_counter()
    corpus = _corpus("degraded-draft")
    model = fit_tabular(corpus, 2, smoothing=0.0)
    base = cross_entropy(model, corpus)
    rng = np.random.default_rng(7)
    table = model.table
    contexts = sorted(table)
    worse = 0
    for _ in range(100):
        perturbed = dict(table)
        for ctx in rng.choice(len(contexts), size=3, replace=False):
            ctx = contexts[ctx]
            eps = rng.uniform(1e-3, 0.2)
            perturbed[ctx] = (1 - eps) * table[ctx] + eps * rng.dirichlet(np.ones(corpus.vocab_size))
        candidate = TabularMarkovModel(corpus.vocab_size, 2, perturbed)
        worse += cross_entropy(candidate, corpus) > base
    elapsed = time.perf_counter() - start
    ok = worse == 100 and elapsed < 10
    assert record(acceptance_report, 7, "fitted table minimizes cross-entropy", ok,
                  f"{worse}/100 perturbations strictly worse, {elapsed:.1f}s (< 10s)")


def test_8_determinism(acceptance_report, capsys, tmp_path):
    outputs = []
    for run in range(2):
        csv_path = tmp_path / f"sweep{run}.csv"
        main(["decode", "--scenario", "degraded-draft", "--seed", "17", "--beta", "0.3"])
        decoded = capsys.readouterr().out
        main(["sweep", "--kind", "beta", "--scenario", "adversarial-draft", "--seed", "17",
              "--trials", "10", "--out", str(csv_path)])
        capsys.readouterr()
        sc = load_scenario("degraded-draft")
        rows = sweep_beta(sc.target, sc.draft, sc.prefix, SsdConfig(seed=17), [0.0, 0.4],
                          CostModel(), 10, workers=run + 1)
        outputs.append((decoded, csv_path.read_bytes(), rows_to_csv(rows)))
    ok = outputs[0] == outputs[1] and "cycle" in outputs[0][0]
    assert record(acceptance_report, 8, "byte-identical reruns", ok,
                  "decode tokens and traces, CLI sweep CSV, threaded sweep CSV")
