"""Autoregressive token models: the abstract interface and tabular Markov models.

A model maps a prefix (a flat sequence of token ids) to a dense probability
vector over the vocabulary. Tabular models keep one vector per length-k
context; contexts shorter than k are front-padded with ``BOS``.
"""

from __future__ import annotations

import math
import threading
from abc import ABC, abstractmethod
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

BOS = -1
PROB_ATOL = 1e-9

Context = tuple[int, ...]


class VocabularyError(ValueError):
    """A token id falls outside the model's vocabulary."""


class FitError(ValueError):
    pass


class DivergenceError(ValueError):
    """An observed token has zero probability under the model."""

    def __init__(self, sequence: int, position: int, token: int):
        self.sequence = sequence
        self.position = position
        self.token = token
        super().__init__(
            f"token {token} at sequence {sequence}, position {position} has zero probability"
        )


class FormatError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


def as_distribution(probs, vocab_size: int | None = None) -> np.ndarray:
    """Validate ``probs`` as a probability vector and return it as float64."""
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"distribution must be a non-empty vector, got shape {arr.shape}")
    if vocab_size is not None and arr.size != vocab_size:
        raise ValueError(f"distribution has {arr.size} entries, expected {vocab_size}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("distribution entries must be finite and non-negative")
    if abs(arr.sum() - 1.0) > PROB_ATOL:
        raise ValueError(f"distribution sums to {arr.sum()!r}")
    return arr


def uniform(vocab_size: int) -> np.ndarray:
    return np.full(vocab_size, 1.0 / vocab_size)


class RandomStream:
    """Seeded source of uniform draws on [0, 1); counts how many were used."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))
        self.draws = 0

    def uniform(self) -> float:
        self.draws += 1
        return float(self._gen.random())


def sample_token(dist: np.ndarray, rng: RandomStream) -> int:
    """Inverse-CDF draw: token ``i`` owns the half-open cell [cdf[i-1], cdf[i])."""
    u = rng.uniform()
    cdf = np.asarray(dist).cumsum()
    idx = int(cdf.searchsorted(u, side="right"))
    if idx >= len(dist):
        # u landed above a cdf total that rounded below 1
        idx = int(np.flatnonzero(dist > 0)[-1])
    return idx


class SequenceModel(ABC):
    """Next-token predictor P(y_t | y_<t) over a fixed vocabulary."""

    vocab_size: int

    @abstractmethod
    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray: ...

    def check_prefix(self, prefix: Sequence[int]) -> None:
        if len(prefix) and (min(prefix) < 0 or max(prefix) >= self.vocab_size):
            bad = next(t for t in prefix if not 0 <= t < self.vocab_size)
            raise VocabularyError(f"token {bad} outside vocabulary of size {self.vocab_size}")


class TabularMarkovModel(SequenceModel):
    """Order-k Markov model backed by a context -> distribution table.

    Contexts missing from the table get the uniform distribution. With
    ``smoothing > 0`` that is exactly what additive smoothing gives an
    unseen context; with ``smoothing == 0`` it is a fallback, and each
    use is counted in ``fallback_count``.
    """

    def __init__(self, vocab_size: int, order: int, table: dict[Context, np.ndarray],
                 smoothing: float = 0.0):
        if vocab_size < 1:
            raise ValueError("vocab_size must be positive")
        if order < 0:
            raise ValueError("order must be non-negative")
        if smoothing < 0:
            raise ValueError("smoothing must be non-negative")
        self.vocab_size = vocab_size
        self.order = order
        self.smoothing = float(smoothing)
        self._table: dict[Context, np.ndarray] = {}
        for ctx, probs in table.items():
            ctx = tuple(int(t) for t in ctx)
            if len(ctx) != order:
                raise ValueError(f"context {ctx} does not have length {order}")
            if any(t != BOS and not 0 <= t < vocab_size for t in ctx):
                raise VocabularyError(f"context {ctx} has tokens outside the vocabulary")
            arr = as_distribution(probs, vocab_size).copy()
            arr.setflags(write=False)
            self._table[ctx] = arr
        self._uniform = uniform(vocab_size)
        self._uniform.setflags(write=False)
        self._lock = threading.Lock()
        self.fallback_count = 0

    @property
    def table(self) -> dict[Context, np.ndarray]:
        return dict(self._table)

    def context_of(self, prefix: Sequence[int]) -> Context:
        return context_of(prefix, self.order)

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        self.check_prefix(prefix)
        dist = self._table.get(self.context_of(prefix))
        if dist is None:
            if self.smoothing == 0:
                with self._lock:
                    self.fallback_count += 1
            return self._uniform
        return dist

    def __repr__(self):
        return (f"TabularMarkovModel(vocab_size={self.vocab_size}, order={self.order}, "
                f"contexts={len(self._table)}, smoothing={self.smoothing})")


def context_of(prefix: Sequence[int], order: int) -> Context:
    if order == 0:
        return ()
    tail = tuple(prefix[-order:])
    return (BOS,) * (order - len(tail)) + tail


@dataclass
class Corpus:
    sequences: list[list[int]]
    vocab_size: int

    def __post_init__(self):
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be positive")
        self.sequences = [[int(t) for t in seq] for seq in self.sequences]
        for i, seq in enumerate(self.sequences):
            for j, tok in enumerate(seq):
                if not 0 <= tok < self.vocab_size:
                    raise VocabularyError(
                        f"sequence {i} position {j}: token {tok} outside vocabulary of size {self.vocab_size}")

    @property
    def num_tokens(self) -> int:
        return sum(len(s) for s in self.sequences)

    def positions(self, order: int) -> Iterable[tuple[int, Context, int]]:
        """Yield (index within sequence, padded length-``order`` context, token)."""
        for seq in self.sequences:
            for t, tok in enumerate(seq):
                yield t, context_of(seq[:t], order), tok


def _count_contexts(corpus: Corpus, order: int) -> dict[Context, np.ndarray]:
    counts: dict[Context, np.ndarray] = defaultdict(lambda: np.zeros(corpus.vocab_size))
    for _, ctx, tok in corpus.positions(order):
        counts[ctx][tok] += 1
    return dict(counts)


def fit_tabular(corpus: Corpus, order: int, smoothing: float = 0.0) -> TabularMarkovModel:
    """Maximum-likelihood (optionally add-``smoothing``) fit of an order-k model.

    Each observed context gets ``(count + smoothing) / (total + smoothing * V)``.
    At ``smoothing == 0`` this is the exact minimizer of the corpus
    cross-entropy among order-k tables.
    """
    if order < 0:
        raise FitError("order must be non-negative")
    if smoothing < 0:
        raise FitError("smoothing must be non-negative")
    if corpus.num_tokens == 0:
        raise FitError("cannot fit on an empty corpus")
    V = corpus.vocab_size
    table = {ctx: (c + smoothing) / (c.sum() + smoothing * V)
             for ctx, c in _count_contexts(corpus, order).items()}
    return TabularMarkovModel(V, order, table, smoothing)


def derive_draft(target: TabularMarkovModel, new_order: int, reference: Corpus,
                 extra_smoothing: float = 0.0) -> TabularMarkovModel:
    """Collapse ``target`` to a shorter context, weighting by ``reference`` counts.

    For every draft context the conditional is the count-weighted mean of
    the target's conditionals over the longer contexts that end with it,
    then add-``extra_smoothing`` smoothed against those counts. Positions
    whose target context is padded with BOS are skipped, except where the
    draft context is padded too (those have no other evidence).
    """
    if new_order >= target.order:
        raise ValueError(f"draft order {new_order} must be below target order {target.order}")
    if new_order < 0:
        raise ValueError("draft order must be non-negative")
    if extra_smoothing < 0:
        raise ValueError("extra_smoothing must be non-negative")
    if reference.vocab_size != target.vocab_size:
        raise VocabularyError("reference corpus and target model disagree on vocabulary size")
    V = target.vocab_size
    k, kd = target.order, new_order
    mass: dict[Context, np.ndarray] = defaultdict(lambda: np.zeros(V))
    weight: dict[Context, int] = defaultdict(int)
    for seq in reference.sequences:
        for t in range(len(seq)):
            if t < k and not t < kd:
                continue
            ctx = context_of(seq[:t], kd)
            mass[ctx] += target.next_distribution(seq[:t])
            weight[ctx] += 1
    table = {ctx: (mass[ctx] + extra_smoothing) / (weight[ctx] + extra_smoothing * V)
             for ctx in mass}
    return TabularMarkovModel(V, kd, table, extra_smoothing)


def cross_entropy(model: SequenceModel, corpus: Corpus) -> float:
    """Mean negative log-likelihood of the corpus, in nats per token."""
    if corpus.vocab_size != model.vocab_size:
        raise VocabularyError("corpus and model disagree on vocabulary size")
    if corpus.num_tokens == 0:
        raise FitError("empty corpus")
    total = 0.0
    for i, seq in enumerate(corpus.sequences):
        for t, tok in enumerate(seq):
            prob = model.next_distribution(seq[:t])[tok]
            if prob <= 0:
                raise DivergenceError(i, t, tok)
            total -= math.log(prob)
    return total / corpus.num_tokens


def ar_decode(model: SequenceModel, prefix: Sequence[int], target_len: int,
              rng: RandomStream) -> list[int]:
    """Plain token-by-token sampling; one uniform draw per token."""
    if target_len < 1:
        raise ValueError("target_len must be at least 1")
    model.check_prefix(prefix)
    context = list(prefix)
    out = []
    for _ in range(target_len):
        tok = sample_token(model.next_distribution(context), rng)
        context.append(tok)
        out.append(tok)
    return out


# --- file formats ---------------------------------------------------------

def read_corpus(path) -> Corpus:
    """Read ``vocab=<V>`` followed by one whitespace-separated sequence per line.

    Blank lines and ``#`` comments are ignored.
    """
    path = Path(path)
    vocab = None
    sequences = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if vocab is None:
                key, sep, val = line.partition("=")
                if not sep or key.strip() != "vocab":
                    raise FormatError(path, lineno, "expected header 'vocab=<V>'")
                try:
                    vocab = int(val)
                except ValueError:
                    raise FormatError(path, lineno, f"bad vocabulary size {val.strip()!r}") from None
                if vocab < 1:
                    raise FormatError(path, lineno, "vocabulary size must be positive")
                continue
            try:
                seq = [int(tok) for tok in line.split()]
            except ValueError:
                raise FormatError(path, lineno, "token ids must be decimal integers") from None
            bad = [tok for tok in seq if not 0 <= tok < vocab]
            if bad:
                raise FormatError(path, lineno, f"token {bad[0]} outside vocabulary of size {vocab}")
            sequences.append(seq)
    if vocab is None:
        raise FormatError(path, 0, "missing 'vocab=<V>' header")
    return Corpus(sequences, vocab)


def write_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"vocab={corpus.vocab_size}\n")
        for seq in corpus.sequences:
            fh.write(" ".join(map(str, seq)) + "\n")


def save_model(model: TabularMarkovModel, path) -> None:
    """Write a plain-text dump; floats use repr() so reload is bit-exact."""
    lines = [
        "format = tabular-markov/1",
        f"vocab = {model.vocab_size}",
        f"order = {model.order}",
        f"smoothing = {model.smoothing!r}",
    ]
    for ctx in sorted(model.table):
        probs = " ".join(repr(float(x)) for x in model.table[ctx])
        lines.append(f"context {' '.join(map(str, ctx))}: {probs}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path) -> TabularMarkovModel:
    path = Path(path)
    header: dict[str, str] = {}
    rows: dict[Context, list[float]] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("context"):
            lhs, sep, rhs = line[len("context"):].partition(":")
            if not sep:
                raise FormatError(path, lineno, "context row needs ':'")
            try:
                rows[tuple(int(t) for t in lhs.split())] = [float(x) for x in rhs.split()]
            except ValueError:
                raise FormatError(path, lineno, "malformed context row") from None
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise FormatError(path, lineno, f"unrecognized line {line!r}")
        header[key.strip()] = val.strip()
    try:
        vocab, order = int(header["vocab"]), int(header["order"])
        smoothing = float(header.get("smoothing", "0.0"))
    except (KeyError, ValueError) as exc:
        raise FormatError(path, 0, f"bad or missing header field: {exc}") from None
    try:
        return TabularMarkovModel(vocab, order, rows, smoothing)
    except ValueError as exc:
        raise FormatError(path, 0, str(exc)) from None
