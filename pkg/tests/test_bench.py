import csv
import io
import math

import numpy as np
import pytest

from conftest import order0
from ssdec.bench import (CSV_HEADER, CostModel, run_point, rows_to_csv, simulate_cost,
                         sweep_beta, sweep_draft_len, write_csv)
from ssdec.oracle import analytic_acceptance_prob
from ssdec.scenarios import load_scenario
from ssdec.ssd import SsdConfig, replay_contexts, ssd_decode
from ssdec.verify import random_tabular


@pytest.fixture(scope="module")
def pair():
    rng = np.random.default_rng(11)
    return random_tabular(rng, 4, 2, 0.0), random_tabular(rng, 4, 0, 0.0)


def closed_form_speedup(draft_len, cost):
    return (draft_len + 1) * cost.c_target_serial / (draft_len * cost.c_draft + cost.c_target)


class TestCostModel:
    def test_defaults(self):
        cost = CostModel()
        assert cost.c_draft / cost.c_target == pytest.approx(1 / 3)
        assert cost.token_duration == 0.04

    @pytest.mark.parametrize("field", ["c_draft", "c_target", "c_target_serial", "token_duration"])
    def test_positive(self, field):
        with pytest.raises(ValueError):
            CostModel(**{field: 0.0})


class TestSimulateCost:
    def test_identical_models_best_case(self, pair):
        target, _ = pair
        result = ssd_decode(target, target, [0], SsdConfig(draft_len=3, target_len=100, beta=0.0))
        m = simulate_cost(result, CostModel(1.0, 3.0, 3.0))
        assert m.target_calls == 25
        assert m.sim_cost == 25 * 6
        assert m.speedup_vs_ar == 2.0
        assert m.acceptance_rate == 1.0
        assert m.mean_emitted_per_cycle == 4.0

    def test_always_rejected_worst_case(self):
        target, draft = order0([0.0, 1.0]), order0([1.0, 0.0])
        cost = CostModel(1.0, 3.0, 3.0)
        result = ssd_decode(target, draft, [], SsdConfig(draft_len=1, target_len=40, beta=0.0))
        m = simulate_cost(result, cost)
        assert result.tokens == [1] * 40
        assert m.acceptance_rate == 0.0
        assert m.sim_cost == 40 * (1.0 + 3.0)
        assert m.speedup_vs_ar == pytest.approx(3.0 / 4.0)
        assert m.speedup_vs_ar < 1

    def test_rtf_definition(self, pair):
        target, _ = pair
        result = ssd_decode(target, target, [0], SsdConfig(draft_len=3, target_len=40, beta=0.0))
        m = simulate_cost(result, CostModel(0.5, 0.5, 3.0, token_duration=1.0))
        assert m.sim_cost == 40 / 2
        assert m.rtf_analog == 0.5

    @pytest.mark.parametrize("beta", [0.0, 0.5, 1.0])
    def test_metric_bounds(self, pair, beta):
        target, draft = pair
        for seed in range(10):
            cfg = SsdConfig(draft_len=4, target_len=30, beta=beta, seed=seed)
            m = simulate_cost(ssd_decode(target, draft, [1], cfg), CostModel())
            assert 0 <= m.acceptance_rate <= 1
            assert 1 <= m.mean_emitted_per_cycle <= 5
            assert m.speedup_vs_ar > 0

    def test_recompute_bit_for_bit(self, pair):
        target, draft = pair
        result = ssd_decode(target, draft, [0], SsdConfig(seed=5))
        assert simulate_cost(result, CostModel()) == simulate_cost(result, CostModel())

    def test_free_drafting_limit(self, pair):
        target, _ = pair
        cost = CostModel(c_draft=1e-12, c_target=3.0, c_target_serial=3.0)
        result = ssd_decode(target, target, [0], SsdConfig(draft_len=5, target_len=60, beta=0.0))
        assert simulate_cost(result, cost).speedup_vs_ar == pytest.approx(6.0, rel=1e-9)


class TestSweeps:
    def test_beta_one_row_accepts_all(self, pair):
        target, draft = pair
        rows = sweep_beta(target, draft, [0], SsdConfig(target_len=30), [1.0], CostModel(), 5)
        assert rows[0].acceptance_rate == 1.0

    def test_beta_zero_acceptance_matches_oracle(self, pair):
        """Pooled accepted/tested against the sum of per-slot closed-form probabilities."""
        target, draft = pair
        prefix = [0]
        row = run_point(target, draft, prefix, SsdConfig(target_len=60, beta=0.0), CostModel(),
                        trials=100, point=0, keep_decodes=True)
        hits = tests = 0
        mean = var = 0.0
        for res in row.decodes:
            for trace, ctx in replay_contexts(prefix, res):
                ctx = list(ctx)
                for d, ok in zip(trace.draft_tokens, trace.accept_flags):
                    a = analytic_acceptance_prob(target.next_distribution(ctx),
                                                 draft.next_distribution(ctx), 0.0)
                    mean += a
                    var += a * (1 - a)
                    hits += ok
                    tests += 1
                    ctx.append(d.token)
        assert abs(hits - mean) / math.sqrt(var) < 3
        assert row.acceptance_rate == pytest.approx(
            np.mean([m.acceptance_rate for m in row.runs]))

    def test_identical_models_speedup_increases(self, pair):
        target, _ = pair
        cost = CostModel()
        rows = sweep_draft_len(target, target, [0], SsdConfig(target_len=2520, beta=0.0),
                               range(1, 9), cost, trials=1)
        speedups = [r.speedup_vs_ar for r in rows]
        assert all(b > a for a, b in zip(speedups, speedups[1:]))
        for r in rows:
            # 2520 is divisible by every L_d + 1 in range, so no overshoot
            assert r.speedup_vs_ar == pytest.approx(closed_form_speedup(r.draft_len, cost), abs=1e-12)

    def test_draft_len_one_emission_bounds(self, pair):
        target, draft = pair
        rows = sweep_draft_len(target, draft, [0], SsdConfig(target_len=40), [1], CostModel(), 10)
        assert 1 <= rows[0].mean_emitted_per_cycle <= 2

    def test_rejects_bad_lists(self, pair):
        target, draft = pair
        with pytest.raises(ValueError):
            sweep_beta(target, draft, [0], SsdConfig(), [], CostModel(), 1)
        with pytest.raises(ValueError):
            sweep_draft_len(target, draft, [0], SsdConfig(), [0, 3], CostModel(), 1)
        with pytest.raises(ValueError):
            sweep_draft_len(target, draft, [0], SsdConfig(), [17], CostModel(), 1)

    def test_deterministic_and_order_independent(self, pair):
        target, draft = pair
        args = (target, draft, [0], SsdConfig(target_len=30, seed=9), [0.0, 0.2, 0.4],
                CostModel(), 6)
        serial = rows_to_csv(sweep_beta(*args))
        assert serial == rows_to_csv(sweep_beta(*args))
        assert serial == rows_to_csv(sweep_beta(*args, workers=3))

    def test_disjoint_seeds_agree(self, pair):
        target, draft = pair
        rates = []
        for seed in (1, 2):
            row = run_point(target, draft, [0], SsdConfig(target_len=200, beta=0.2, seed=seed),
                            CostModel(), trials=40, point=0, keep_decodes=True)
            hits = sum(r.accepted_tokens for r in row.decodes)
            tests = sum(r.tested_tokens for r in row.decodes)
            rates.append((hits / tests, tests))
        (r1, n1), (r2, n2) = rates
        pooled = (r1 * n1 + r2 * n2) / (n1 + n2)
        sd = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
        assert abs(r1 - r2) < 3 * sd

    def test_step_tv_zero_at_beta_zero(self, pair):
        target, draft = pair
        rows = sweep_beta(target, draft, [0], SsdConfig(target_len=30), [0.0, 0.5], CostModel(), 3)
        assert rows[0].step_tv_mean < 1e-12
        assert rows[1].step_tv_mean > 0


class TestCsv:
    def test_format(self, pair, tmp_path):
        target, draft = pair
        rows = sweep_beta(target, draft, [0], SsdConfig(target_len=30), [0.0, 0.3], CostModel(), 3)
        write_csv(rows, tmp_path / "out.csv")
        raw = (tmp_path / "out.csv").read_bytes()
        text = raw.decode("utf-8")
        assert text.splitlines()[0] == ",".join(CSV_HEADER)
        assert "\r" not in text
        parsed = list(csv.DictReader(io.StringIO(text)))
        assert len(parsed) == 2
        assert parsed[1]["beta"] == "0.3" and parsed[1]["draft_len"] == "3"
        assert parsed[1]["trials"] == "3"
        for rec in parsed:
            for key in ("acceptance_rate", "sim_cost", "speedup_vs_ar"):
                mantissa = rec[key].split("e")[0].replace(".", "").replace("-", "").lstrip("0")
                assert len(mantissa) <= 6


class TestScenarios:
    def test_shapes(self):
        for name in ("identical", "degraded-draft", "adversarial-draft"):
            sc = load_scenario(name)
            assert sc.target.vocab_size == sc.draft.vocab_size == 6
        assert load_scenario("identical").draft is load_scenario("identical").target
        assert load_scenario("degraded-draft").draft.order == 0

    def test_adversarial_accepts_less(self):
        cfg = SsdConfig(target_len=100, beta=0.0)
        rates = {}
        for name in ("degraded-draft", "adversarial-draft"):
            sc = load_scenario(name)
            rows = sweep_beta(sc.target, sc.draft, sc.prefix, cfg, [0.0], CostModel(), 20)
            rates[name] = rows[0].acceptance_rate
        assert rates["adversarial-draft"] < rates["degraded-draft"]

    def test_unknown(self):
        with pytest.raises(KeyError):
            load_scenario("nope")
