"""Exact output laws by brute-force enumeration, for desk-scale checking.

Everything here integrates the acceptance uniforms out in closed form, so
results are exact up to floating point. Residual and acceptance arithmetic
is written out locally rather than borrowed from the decoder, keeping the
two routes independent.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Callable, Mapping, Sequence

import numpy as np

from .models import SequenceModel

MAX_OUTCOMES = 10**6

SequenceDistribution = dict[tuple[int, ...], float]


class EnumerationSizeError(ValueError):
    pass


def _guard(vocab_size: int, horizon: int) -> None:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if vocab_size ** horizon > MAX_OUTCOMES:
        raise EnumerationSizeError(
            f"{vocab_size}^{horizon} outcomes exceeds the enumeration limit {MAX_OUTCOMES}")


def acceptance_probs(q: np.ndarray, p: np.ndarray, beta: float) -> np.ndarray:
    """Per-token P(accept | drafted x) = min(1, min(1, q/p) + beta); 0 where p = 0."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    ratio = np.divide(q, p, out=np.zeros_like(q), where=p > 0)
    return np.where(p > 0, np.minimum(1.0, np.minimum(1.0, ratio) + beta), 0.0)


def analytic_acceptance_prob(q: np.ndarray, p: np.ndarray, beta: float) -> float:
    """Acceptance probability of one drafted token, marginalized over the draft."""
    return float(np.dot(p, acceptance_probs(q, p, beta)))


def _residual(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    diff = np.clip(np.asarray(q) - np.asarray(p), 0.0, None)
    mass = diff.sum()
    return np.asarray(q, dtype=np.float64) if mass < 1e-12 else diff / mass


def step_emission_distribution(q: np.ndarray, p: np.ndarray, beta: float,
                               residual: Callable = _residual) -> np.ndarray:
    """Law of the single token emitted at one verification slot."""
    acc = np.asarray(p, dtype=np.float64) * acceptance_probs(q, p, beta)
    return acc + max(0.0, 1.0 - acc.sum()) * residual(q, p)


def tv_distance(a, b) -> float:
    """Half the L1 distance between two vectors or two sequence distributions."""
    if isinstance(a, Mapping) or isinstance(b, Mapping):
        if not (isinstance(a, Mapping) and isinstance(b, Mapping)):
            raise ValueError("cannot compare a sequence distribution with a vector")
        lengths = {len(s) for s in a} | {len(s) for s in b}
        if len(lengths) > 1:
            raise ValueError(f"sequence distributions mix lengths {sorted(lengths)}")
        keys = set(a) | set(b)
        return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"support mismatch: {a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())


def exact_ar_distribution(model: SequenceModel, prefix: Sequence[int],
                          horizon: int) -> SequenceDistribution:
    """Probability of every length-``horizon`` continuation under plain sampling."""
    _guard(model.vocab_size, horizon)
    model.check_prefix(prefix)
    out: SequenceDistribution = {}

    def walk(seq: tuple[int, ...], weight: float):
        if len(seq) == horizon:
            out[seq] = weight
            return
        dist = model.next_distribution(list(prefix) + list(seq))
        for tok in np.flatnonzero(dist > 0):
            walk(seq + (int(tok),), weight * dist[tok])

    walk((), 1.0)
    return out


def exact_ssd_distribution(target: SequenceModel, draft: SequenceModel,
                           prefix: Sequence[int], config, horizon: int,
                           residual: Callable = _residual) -> SequenceDistribution:
    """Exact law of the first ``horizon`` tokens emitted by the speculative decoder.

    Branches over every drafted token, the accept/reject outcome at each
    slot (with its closed-form probability), the resampled token and the
    bonus token. A branch stops as soon as its first ``horizon`` tokens are
    fixed, since later randomness cannot change them. ``residual`` may be
    swapped out to build negative controls.
    """
    _guard(target.vocab_size, horizon)
    if horizon > config.target_len:
        raise ValueError("horizon cannot exceed the decoder's target length")
    if target.vocab_size != draft.vocab_size:
        raise ValueError("target and draft disagree on vocabulary size")
    target.check_prefix(prefix)
    base = list(prefix)
    beta, L = config.beta, config.draft_len
    out: dict[tuple[int, ...], float] = defaultdict(float)

    def cycle(emitted: tuple[int, ...], weight: float):
        if len(emitted) >= horizon:
            out[emitted[:horizon]] += weight
            return
        slot(emitted, 0, weight)

    def slot(seq: tuple[int, ...], i: int, weight: float):
        # seq = tokens emitted in earlier cycles + drafts accepted so far this cycle
        if len(seq) >= horizon:
            out[seq[:horizon]] += weight
            return
        ctx = base + list(seq)
        p = draft.next_distribution(ctx)
        q = target.next_distribution(ctx)
        acc = acceptance_probs(q, p, beta)
        reject_mass = 1.0 - float(np.dot(p, acc))
        for x in np.flatnonzero(p > 0):
            w = weight * p[x] * acc[x]
            if w == 0:
                continue
            nxt = seq + (int(x),)
            if i + 1 < L:
                slot(nxt, i + 1, w)
            elif len(nxt) >= horizon:
                out[nxt[:horizon]] += w
            else:
                q_bonus = target.next_distribution(base + list(nxt))
                for y in np.flatnonzero(q_bonus > 0):
                    cycle(nxt + (int(y),), w * q_bonus[y])
        if reject_mass > 0:
            res = residual(q, p)
            for y in np.flatnonzero(res > 0):
                cycle(seq + (int(y),), weight * reject_mass * res[y])

    cycle((), 1.0)
    return dict(out)
