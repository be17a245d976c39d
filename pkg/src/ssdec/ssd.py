"""Speculative decoding with a tolerance-relaxed acceptance rule.

Each cycle drafts ``draft_len`` tokens from the cheap model, scores them
with the target in one (logically parallel) verification pass, accepts a
prefix of them, and emits either a resampled token at the first rejection
or a bonus token when every draft survives.

RNG consumption per cycle is fixed: ``draft_len`` draws for drafting, one
draw per acceptance test (none after a rejection), then one draw for the
resample or bonus token.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .models import RandomStream, SequenceModel, VocabularyError, sample_token

RESIDUAL_EPS = 1e-12


class ConfigError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class SsdConfig:
    draft_len: int = 3
    target_len: int = 100
    beta: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.draft_len, (int, np.integer)) or self.draft_len < 1:
            raise ConfigError(f"draft_len must be an integer >= 1, got {self.draft_len!r}")
        if not isinstance(self.target_len, (int, np.integer)) or self.target_len < 1:
            raise ConfigError(f"target_len must be an integer >= 1, got {self.target_len!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


@dataclass
class DraftToken:
    token: int
    p_prob: float
    q_prob: float


@dataclass
class CycleTrace:
    draft_tokens: list[DraftToken]
    accept_flags: list[bool] = field(default_factory=list)
    uniform_draws: list[float] = field(default_factory=list)
    resampled: tuple[int, int] | None = None
    bonus: int | None = None
    residual_fallback: bool = False

    @property
    def num_accepted(self) -> int:
        return sum(self.accept_flags)

    @property
    def emitted(self) -> list[int]:
        out = [d.token for d, ok in zip(self.draft_tokens, self.accept_flags) if ok]
        if self.resampled is not None:
            out.append(self.resampled[1])
        if self.bonus is not None:
            out.append(self.bonus)
        return out

    def check(self) -> None:
        """Raise InvariantError if the trace is structurally inconsistent."""
        flags = self.accept_flags
        if False in flags and flags.index(False) != len(flags) - 1:
            raise InvariantError("a rejection must terminate the acceptance tests")
        if len(flags) != len(self.uniform_draws):
            raise InvariantError("one uniform draw per acceptance test")
        rejected = bool(flags) and not flags[-1]
        if rejected != (self.resampled is not None):
            raise InvariantError("resample present iff a draft token was rejected")
        if rejected and self.resampled[0] != len(flags) - 1:
            raise InvariantError("resample position must match the rejected slot")
        all_ok = len(flags) == len(self.draft_tokens) and all(flags)
        if all_ok != (self.bonus is not None):
            raise InvariantError("bonus present iff every draft token was accepted")
        if any(d.p_prob <= 0 for d in self.draft_tokens):
            raise InvariantError("drafted token has zero draft probability")


@dataclass
class DecodeResult:
    tokens: list[int]
    cycles: list[CycleTrace]
    draft_tokens_generated: int
    target_calls: int
    accepted_tokens: int

    @property
    def tested_tokens(self) -> int:
        """Draft tokens that reached an acceptance test."""
        return sum(len(c.accept_flags) for c in self.cycles)

    @property
    def emitted_tokens(self) -> int:
        """Tokens produced before truncation to ``target_len``."""
        return sum(len(c.emitted) for c in self.cycles)

    @property
    def residual_fallbacks(self) -> int:
        return sum(c.residual_fallback for c in self.cycles)


def _check_pair(target: SequenceModel, draft: SequenceModel) -> None:
    if target.vocab_size != draft.vocab_size:
        raise VocabularyError(
            f"target vocabulary {target.vocab_size} != draft vocabulary {draft.vocab_size}")


def draft_generate(draft: SequenceModel, prefix: Sequence[int], draft_len: int,
                   rng: RandomStream) -> tuple[list[int], list[np.ndarray]]:
    """Sample ``draft_len`` tokens autoregressively from the draft model."""
    if draft_len < 1:
        raise ValueError("draft_len must be at least 1")
    context = list(prefix)
    tokens, dists = [], []
    for _ in range(draft_len):
        p = draft.next_distribution(context)
        tok = sample_token(p, rng)
        tokens.append(tok)
        dists.append(p)
        context.append(tok)
    return tokens, dists


def target_verify(target: SequenceModel, prefix: Sequence[int],
                  draft_tokens: Sequence[int]) -> list[np.ndarray]:
    """Target conditionals after each draft prefix, ``len(draft_tokens) + 1`` of them.

    A transformer gets these from one forward pass; here they are computed
    one by one, but callers bill them as a single target call.
    """
    context = list(prefix)
    out = [target.next_distribution(context)]
    for tok in draft_tokens:
        context.append(tok)
        out.append(target.next_distribution(context))
    return out


def accept_token(q_at_x: float, p_at_x: float, beta: float, r: float) -> bool:
    if p_at_x <= 0:
        raise InvariantError(f"drafted token has draft probability {p_at_x!r}")
    return r < min(1.0, q_at_x / p_at_x) + beta


def residual_distribution(q: np.ndarray, p: np.ndarray,
                          counter: Counter | None = None) -> np.ndarray:
    """``normalize(max(0, q - p))``, or ``q`` itself if that has no mass.

    Fallbacks are tallied under ``"residual_fallback"`` in ``counter``.
    """
    resid = np.maximum(q - p, 0.0)
    total = resid.sum()
    if total < RESIDUAL_EPS:
        if counter is not None:
            counter["residual_fallback"] += 1
        return q
    return resid / total


def ssd_cycle(target: SequenceModel, draft: SequenceModel, prefix: Sequence[int],
              config: SsdConfig, rng: RandomStream) -> CycleTrace:
    tokens, p_dists = draft_generate(draft, prefix, config.draft_len, rng)
    q_dists = target_verify(target, prefix, tokens)
    trace = CycleTrace([DraftToken(x, float(p[x]), float(q[x]))
                        for x, p, q in zip(tokens, p_dists, q_dists)])
    for i, d in enumerate(trace.draft_tokens):
        r = rng.uniform()
        trace.uniform_draws.append(r)
        ok = accept_token(d.q_prob, d.p_prob, config.beta, r)
        trace.accept_flags.append(ok)
        if not ok:
            tally = Counter()
            resid = residual_distribution(q_dists[i], p_dists[i], tally)
            trace.residual_fallback = bool(tally)
            trace.resampled = (i, sample_token(resid, rng))
            return trace
    trace.bonus = sample_token(q_dists[-1], rng)
    return trace


def ssd_decode(target: SequenceModel, draft: SequenceModel, prefix: Sequence[int],
               config: SsdConfig, rng: RandomStream | None = None) -> DecodeResult:
    """Run cycles until ``config.target_len`` tokens exist; return the first that many.

    ``rng`` defaults to a fresh stream seeded with ``config.seed``.
    """
    _check_pair(target, draft)
    target.check_prefix(prefix)
    if rng is None:
        rng = RandomStream(config.seed)
    context = list(prefix)
    out: list[int] = []
    cycles: list[CycleTrace] = []
    accepted = 0
    while len(out) < config.target_len:
        trace = ssd_cycle(target, draft, context, config, rng)
        cycles.append(trace)
        accepted += trace.num_accepted
        emitted = trace.emitted
        out.extend(emitted)
        context.extend(emitted)
    return DecodeResult(
        tokens=out[:config.target_len],
        cycles=cycles,
        draft_tokens_generated=len(cycles) * config.draft_len,
        target_calls=len(cycles),
        accepted_tokens=accepted,
    )


def replay_contexts(prefix: Sequence[int], result: DecodeResult):
    """Yield (cycle, context at cycle start) for every cycle of a decode."""
    context = list(prefix)
    for trace in result.cycles:
        yield trace, tuple(context)
        context.extend(trace.emitted)
