"""Bundled (target, draft) pairs built from corpora shipped with the package.

identical
    draft is the target itself: every draft token is accepted.
degraded-draft
    order-2 target; draft is the target collapsed to order 0.
adversarial-draft
    same target; draft is an order-1 model fitted to an unrelated source.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .models import TabularMarkovModel, derive_draft, fit_tabular, read_corpus

DEFAULT_PREFIX = (0, 1)
TARGET_ORDER = 2
TARGET_SMOOTHING = 0.1


@dataclass(frozen=True)
class Scenario:
    name: str
    target: TabularMarkovModel
    draft: TabularMarkovModel
    prefix: tuple[int, ...] = DEFAULT_PREFIX


def corpus_path(name: str):
    return resources.files("ssdec") / "data" / f"{name}.txt"


def _corpus(name: str):
    with resources.as_file(corpus_path(name)) as path:
        return read_corpus(path)


@lru_cache(maxsize=None)
def load_scenario(name: str) -> Scenario:
    if name == "identical":
        target = fit_tabular(_corpus("identical"), TARGET_ORDER, TARGET_SMOOTHING)
        return Scenario(name, target, target)
    if name == "degraded-draft":
        corpus = _corpus("degraded-draft")
        target = fit_tabular(corpus, TARGET_ORDER, TARGET_SMOOTHING)
        return Scenario(name, target, derive_draft(target, 0, corpus, extra_smoothing=0.5))
    if name == "adversarial-draft":
        target = fit_tabular(_corpus("degraded-draft"), TARGET_ORDER, TARGET_SMOOTHING)
        draft = fit_tabular(_corpus("adversarial-draft"), 1, smoothing=0.5)
        return Scenario(name, target, draft)
    raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIO_NAMES)}")


SCENARIO_NAMES = ("identical", "degraded-draft", "adversarial-draft")
