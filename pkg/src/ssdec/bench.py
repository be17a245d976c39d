"""Unit-cost latency model and parameter sweeps.

A cycle is billed ``draft_len * c_draft`` for drafting plus one
``c_target`` for verification, however many tokens it checks. Plain
autoregressive decoding pays ``c_target_serial`` per token.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .models import SequenceModel
from .oracle import step_emission_distribution, tv_distance
from .ssd import DecodeResult, SsdConfig, replay_contexts, ssd_decode

CSV_HEADER = ["beta", "draft_len", "trials", "acceptance_rate", "mean_emitted_per_cycle",
              "target_calls", "draft_tokens", "sim_cost", "rtf_analog", "speedup_vs_ar",
              "step_tv_mean"]


@dataclass(frozen=True)
class CostModel:
    c_draft: float = 1.0
    c_target: float = 3.0
    c_target_serial: float = 3.0
    token_duration: float = 0.04  # seconds of speech per token (25 tokens/s)

    def __post_init__(self):
        for name in ("c_draft", "c_target", "c_target_serial", "token_duration"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"{name} must be positive, got {val!r}")

    def ar_cost(self, n_tokens: int) -> float:
        return n_tokens * self.c_target_serial


@dataclass(frozen=True)
class Metrics:
    acceptance_rate: float
    mean_emitted_per_cycle: float
    target_calls: int
    draft_tokens: int
    sim_cost: float
    rtf_analog: float
    speedup_vs_ar: float


def simulate_cost(result: DecodeResult, cost: CostModel) -> Metrics:
    """Bill a finished decode against ``cost``.

    ``acceptance_rate`` counts accepted drafts over drafts that reached an
    acceptance test; drafts discarded after a rejection are not counted.
    ``mean_emitted_per_cycle`` uses pre-truncation emissions.
    """
    n = len(result.tokens)
    sim_cost = result.draft_tokens_generated * cost.c_draft + result.target_calls * cost.c_target
    tested = result.tested_tokens
    return Metrics(
        acceptance_rate=result.accepted_tokens / tested if tested else 0.0,
        mean_emitted_per_cycle=result.emitted_tokens / result.target_calls,
        target_calls=result.target_calls,
        draft_tokens=result.draft_tokens_generated,
        sim_cost=sim_cost,
        rtf_analog=sim_cost / (n * cost.token_duration),
        speedup_vs_ar=cost.ar_cost(n) / sim_cost,
    )


@dataclass
class SweepRow:
    beta: float
    draft_len: int
    trials: int
    acceptance_rate: float
    mean_emitted_per_cycle: float
    target_calls: float
    draft_tokens: float
    sim_cost: float
    rtf_analog: float
    speedup_vs_ar: float
    step_tv_mean: float
    runs: list[Metrics] = field(default_factory=list, repr=False)
    decodes: list[DecodeResult] = field(default_factory=list, repr=False)

    def std(self, name: str) -> float:
        vals = np.array([getattr(m, name) for m in self.runs], dtype=np.float64)
        return float(vals.std(ddof=1)) if len(vals) > 1 else 0.0

    def sem(self, name: str) -> float:
        """Standard error of the mean of a per-run metric."""
        return self.std(name) / math.sqrt(len(self.runs)) if self.runs else 0.0

    def csv_values(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in CSV_HEADER]


def _fmt(val) -> str:
    if isinstance(val, (int, np.integer)):
        return str(int(val))
    return f"{val:.6g}"


def trial_seed(base_seed: int, point: int, trial: int) -> int:
    """Seed for one decode, derived only from (base seed, sweep index, trial)."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(point, trial))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def step_tv(target: SequenceModel, draft: SequenceModel, prefix: Sequence[int],
            result: DecodeResult, beta: float) -> float:
    """Mean one-slot TV gap to the target over every tested draft position of a run."""
    gaps = []
    for trace, ctx in replay_contexts(prefix, result):
        ctx = list(ctx)
        for d in trace.draft_tokens[:len(trace.accept_flags)]:
            q = target.next_distribution(ctx)
            p = draft.next_distribution(ctx)
            gaps.append(tv_distance(step_emission_distribution(q, p, beta), q))
            ctx.append(d.token)
    return float(np.mean(gaps)) if gaps else 0.0


def run_point(target: SequenceModel, draft: SequenceModel, prefix: Sequence[int],
              config: SsdConfig, cost: CostModel, trials: int, point: int,
              keep_decodes: bool = False) -> SweepRow:
    """Average ``trials`` independent decodes at one sweep point."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    runs, tvs, decodes = [], [], []
    for t in range(trials):
        cfg = replace(config, seed=trial_seed(config.seed, point, t))
        res = ssd_decode(target, draft, prefix, cfg)
        runs.append(simulate_cost(res, cost))
        tvs.append(step_tv(target, draft, prefix, res, cfg.beta))
        if keep_decodes:
            decodes.append(res)

    def mean(name):
        return float(np.mean([getattr(m, name) for m in runs]))

    return SweepRow(
        beta=config.beta, draft_len=config.draft_len, trials=trials,
        acceptance_rate=mean("acceptance_rate"),
        mean_emitted_per_cycle=mean("mean_emitted_per_cycle"),
        target_calls=mean("target_calls"), draft_tokens=mean("draft_tokens"),
        sim_cost=mean("sim_cost"), rtf_analog=mean("rtf_analog"),
        speedup_vs_ar=mean("speedup_vs_ar"), step_tv_mean=float(np.mean(tvs)),
        runs=runs, decodes=decodes,
    )


def _sweep(target, draft, prefix, configs, cost, trials, workers, keep_decodes):
    jobs = [(target, draft, prefix, cfg, cost, trials, i, keep_decodes)
            for i, cfg in enumerate(configs)]
    if workers <= 1:
        return [run_point(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map() preserves submission order
        return list(pool.map(lambda job: run_point(*job), jobs))


def sweep_beta(target: SequenceModel, draft: SequenceModel, prefix: Sequence[int],
               base_config: SsdConfig, betas: Sequence[float], cost: CostModel,
               trials: int, workers: int = 1, keep_decodes: bool = False) -> list[SweepRow]:
    if not betas:
        raise ValueError("empty beta list")
    configs = [replace(base_config, beta=float(b)) for b in betas]
    return _sweep(target, draft, prefix, configs, cost, trials, workers, keep_decodes)


def sweep_draft_len(target: SequenceModel, draft: SequenceModel, prefix: Sequence[int],
                    base_config: SsdConfig, lens: Sequence[int], cost: CostModel,
                    trials: int, workers: int = 1, keep_decodes: bool = False) -> list[SweepRow]:
    if not lens:
        raise ValueError("empty draft length list")
    bad = [n for n in lens if not 1 <= n <= 16]
    if bad:
        raise ValueError(f"draft lengths must lie in [1, 16], got {bad}")
    configs = [replace(base_config, draft_len=int(n)) for n in lens]
    return _sweep(target, draft, prefix, configs, cost, trials, workers, keep_decodes)


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.csv_values())
    return buf.getvalue()


def write_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))
