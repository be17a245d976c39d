"""Property suites run by ``ssdec verify``.

Each check returns a :class:`CheckResult`; none of them raise on failure.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, stats

from .models import BOS, RandomStream, TabularMarkovModel
from .oracle import (_residual, analytic_acceptance_prob, exact_ar_distribution,
                     exact_ssd_distribution, step_emission_distribution, tv_distance)
from .ssd import SsdConfig, ssd_cycle, ssd_decode

BETA_GRID = tuple(round(0.1 * i, 1) for i in range(11))


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<28} measured={self.measured:.3e}  limit={self.threshold:.3e}  {self.detail}"


def random_distribution(rng: np.random.Generator, vocab_size: int,
                        zero_prob: float = 0.2) -> np.ndarray:
    """Dirichlet draw with some entries forced to zero (never all of them)."""
    probs = rng.dirichlet(np.full(vocab_size, 0.7))
    mask = rng.random(vocab_size) < zero_prob
    if mask.all():
        mask[rng.integers(vocab_size)] = False
    probs[mask] = 0.0
    return probs / probs.sum()


def random_tabular(rng: np.random.Generator, vocab_size: int, order: int,
                   zero_prob: float = 0.2) -> TabularMarkovModel:
    symbols = range(BOS, vocab_size)
    table = {ctx: random_distribution(rng, vocab_size, zero_prob)
             for ctx in itertools.product(symbols, repeat=order)}
    return TabularMarkovModel(vocab_size, order, table)


def random_pair(rng: np.random.Generator):
    """A random (target, draft, prefix, config, horizon) losslessness instance."""
    V = int(rng.choice([2, 3]))
    target = random_tabular(rng, V, int(rng.integers(0, 3)))
    draft = random_tabular(rng, V, int(rng.integers(0, 3)))
    prefix = [int(t) for t in rng.integers(0, V, size=rng.integers(0, 3))]
    horizon = int(rng.integers(1, 4))
    config = SsdConfig(draft_len=int(rng.integers(1, 4)), target_len=horizon, beta=0.0)
    return target, draft, prefix, config, horizon


def check_losslessness(n_pairs: int, seed: int = 0, tol: float = 1e-10,
                       residual: Callable = _residual) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        target, draft, prefix, config, horizon = random_pair(rng)
        ssd = exact_ssd_distribution(target, draft, prefix, config, horizon, residual=residual)
        ar = exact_ar_distribution(target, prefix, horizon)
        worst = max(worst, tv_distance(ssd, ar))
    return CheckResult("beta0_lossless", worst < tol, worst, tol, f"pairs={n_pairs}")


def check_step_endpoints(n_pairs: int, seed: int = 1, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        V = int(rng.integers(2, 7))
        q, p = random_distribution(rng, V), random_distribution(rng, V)
        worst = max(worst,
                    float(np.abs(step_emission_distribution(q, p, 0.0) - q).max()),
                    float(np.abs(step_emission_distribution(q, p, 1.0) - p).max()))
    return CheckResult("step_endpoints", worst <= tol, worst, tol, f"pairs={n_pairs}")


def check_monotone_in_beta(n_pairs: int, seed: int = 2, slack: float = 1e-12) -> CheckResult:
    """Acceptance probability and TV(step law, q) are non-decreasing in beta."""
    rng = np.random.default_rng(seed)
    worst_drop = 0.0
    for _ in range(n_pairs):
        V = int(rng.integers(2, 7))
        q, p = random_distribution(rng, V), random_distribution(rng, V)
        acc = [analytic_acceptance_prob(q, p, b) for b in BETA_GRID]
        tv = [tv_distance(step_emission_distribution(q, p, b), q) for b in BETA_GRID]
        for series in (acc, tv):
            worst_drop = max(worst_drop, -float(np.diff(series).min()))
    return CheckResult("monotone_in_beta", worst_drop <= slack, max(worst_drop, 0.0), slack,
                       f"pairs={n_pairs} grid={len(BETA_GRID)}")


def _integrated_acceptance(q: np.ndarray, p: np.ndarray, beta: float) -> float:
    """Integrate P(r < threshold(x)) over r ~ U[0, 1) numerically, token by token."""
    total = 0.0
    for x in np.flatnonzero(p > 0):
        threshold = min(1.0, q[x] / p[x]) + beta
        inner = [t for t in (threshold,) if 0 < t < 1]
        val, _ = integrate.quad(lambda r: 1.0 if r < threshold else 0.0, 0.0, 1.0,
                                points=inner or None, epsabs=1e-13, epsrel=1e-13, limit=200)
        total += p[x] * val
    return total


def check_acceptance_integral(n_pairs: int, seed: int = 3, tol: float = 1e-9) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        V = int(rng.integers(2, 6))
        q, p = random_distribution(rng, V), random_distribution(rng, V)
        for beta in (0.0, 0.2, 0.4, 1.0):
            worst = max(worst, abs(analytic_acceptance_prob(q, p, beta)
                                   - _integrated_acceptance(q, p, beta)))
    return CheckResult("acceptance_integral", worst < tol, worst, tol, f"pairs={n_pairs}")


def check_acceptance_rate(n_cycles: int, seed: int = 4, sigmas: float = 3.0,
                          betas=(0.0, 0.2, 0.4, 1.0)) -> CheckResult:
    """Empirical acceptance of tested draft slots vs the closed form.

    Order-0 models make every slot share one (q, p) pair, so the pooled hit
    count over all tested slots is a plain binomial.
    """
    rng = np.random.default_rng(seed)
    V = 4
    target = random_tabular(rng, V, 0, zero_prob=0.0)
    draft = random_tabular(rng, V, 0, zero_prob=0.0)
    q, p = target.next_distribution([]), draft.next_distribution([])
    worst = 0.0
    for k, beta in enumerate(betas):
        z = acceptance_z_score(target, draft, q, p, beta, n_cycles, seed * 1000 + k)
        worst = max(worst, abs(z))
    return CheckResult("acceptance_rate_mc", worst <= sigmas, worst, sigmas,
                       f"cycles={n_cycles} (sigma units)")


def acceptance_z_score(target, draft, q, p, beta: float, n_cycles: int, seed: int) -> float:
    """Signed z-score of pooled acceptance over ``n_cycles`` draft-length-3 cycles."""
    config = SsdConfig(draft_len=3, target_len=1, beta=beta)
    stream = RandomStream(seed)
    tests = hits = 0
    for _ in range(n_cycles):
        flags = ssd_cycle(target, draft, [], config, stream).accept_flags
        tests += len(flags)
        hits += sum(flags)
    expected = analytic_acceptance_prob(q, p, beta)
    sd = math.sqrt(expected * (1 - expected) / tests)
    if sd == 0:
        return 0.0 if hits == tests * expected else math.inf
    return (hits / tests - expected) / sd


def check_monte_carlo(n_samples: int, seed: int = 5, alpha: float = 1e-3) -> CheckResult:
    """Chi-square of decoder frequencies against the exact law, at beta 0 and 0.3."""
    rng = np.random.default_rng(seed)
    V, H = 3, 3
    target = random_tabular(rng, V, 2, zero_prob=0.1)
    draft = random_tabular(rng, V, 1, zero_prob=0.1)
    worst_p = 1.0
    for beta in (0.0, 0.3):
        config = SsdConfig(draft_len=2, target_len=H, beta=beta)
        law = exact_ssd_distribution(target, draft, [0], config, H)
        stream = RandomStream(seed + int(beta * 10))
        counts = Counter(tuple(ssd_decode(target, draft, [0], config, stream).tokens)
                         for _ in range(n_samples))
        unexpected = set(counts) - {s for s, w in law.items() if w > 0}
        if unexpected:
            return CheckResult("decoder_vs_oracle_chi2", False, 0.0, alpha,
                               f"impossible outcomes {sorted(unexpected)[:3]}")
        keys = sorted(s for s, w in law.items() if w > 0)
        obs = np.array([counts.get(k, 0) for k in keys], dtype=float)
        exp = np.array([law[k] for k in keys]) * n_samples
        exp *= obs.sum() / exp.sum()
        worst_p = min(worst_p, float(stats.chisquare(obs, exp).pvalue))
    return CheckResult("decoder_vs_oracle_chi2", worst_p > alpha, worst_p, alpha,
                       f"samples={n_samples} (p-value, must exceed limit)")


LEVELS = {
    "quick": dict(pairs=12, endpoint_pairs=200, cycles=20_000, samples=20_000),
    "full": dict(pairs=60, endpoint_pairs=1000, cycles=100_000, samples=100_000),
}


def run_suite(level: str = "quick") -> list[CheckResult]:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {sorted(LEVELS)}")
    cfg = LEVELS[level]
    return [
        check_losslessness(cfg["pairs"]),
        check_step_endpoints(cfg["endpoint_pairs"]),
        check_monotone_in_beta(cfg["endpoint_pairs"]),
        check_acceptance_integral(cfg["pairs"]),
        check_acceptance_rate(cfg["cycles"]),
        check_monte_carlo(cfg["samples"]),
    ]
