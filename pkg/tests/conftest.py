import numpy as np
import pytest

from ssdec.models import Corpus, TabularMarkovModel, fit_tabular


class ScriptedStream:
    """Stand-in RandomStream that replays fixed uniforms and records usage."""

    def __init__(self, values):
        self.values = list(values)
        self.draws = 0

    def uniform(self):
        val = self.values[self.draws]
        self.draws += 1
        return val


@pytest.fixture
def scripted():
    return ScriptedStream


@pytest.fixture
def alternating():
    """Order-1 fit of the corpus {[0, 1, 0, 1]}, no smoothing."""
    return fit_tabular(Corpus([[0, 1, 0, 1]], 2), order=1, smoothing=0.0)


def point_mass_model(vocab_size=3, token=0):
    dist = np.zeros(vocab_size)
    dist[token] = 1.0
    return TabularMarkovModel(vocab_size, 0, {(): dist})


def order0(probs):
    return TabularMarkovModel(len(probs), 0, {(): np.asarray(probs, dtype=float)})


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
