"""Regenerate the bundled scenario corpora under src/ssdec/data/.

The corpora come from a synthetic order-2 Markov source whose conditionals
mix a shared base distribution with a context-specific Dirichlet draw; a
low ``mix`` makes the source strongly context dependent, so an order-0
draft fitted to it is a poor (but not useless) proposer.
"""

from pathlib import Path

import numpy as np

from ssdec.models import BOS, Corpus, write_corpus

DATA = Path(__file__).resolve().parents[1] / "src" / "ssdec" / "data"
VOCAB = 6


def order2_source(seed: int, mix: float, concentration: float):
    rng = np.random.default_rng(seed)
    base = rng.dirichlet(np.full(VOCAB, 2.0))
    return {(a, b): mix * base + (1 - mix) * rng.dirichlet(np.full(VOCAB, concentration))
            for a in range(BOS, VOCAB) for b in range(BOS, VOCAB)}


def sample_corpus(source, seed: int, n_seq: int = 80, length: int = 150) -> Corpus:
    rng = np.random.default_rng(seed)
    seqs = []
    for _ in range(n_seq):
        seq = []
        for _ in range(length):
            ctx = tuple(([BOS, BOS] + seq)[-2:])
            seq.append(int(rng.choice(VOCAB, p=source[ctx])))
        seqs.append(seq)
    return Corpus(seqs, VOCAB)


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    main_source = order2_source(7, mix=0.2, concentration=0.3)
    write_corpus(sample_corpus(main_source, 7), DATA / "degraded-draft.txt")
    write_corpus(sample_corpus(main_source, 11), DATA / "identical.txt")
    other = order2_source(1234, mix=0.2, concentration=0.3)
    write_corpus(sample_corpus(other, 1234), DATA / "adversarial-draft.txt")


if __name__ == "__main__":
    main()
