import numpy as np
import pytest

from ttess import Polygon, TTessellation
from ttess import operators as ops

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def square():
    return Polygon.square()


@pytest.fixture
def empty(square):
    return TTessellation.new_empty(square)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_state(seed: int, n_updates: int = 200, max_segments: int = 25) -> TTessellation:
    """A reachable tessellation from a random walk of splits, merges and flips."""
    rng = np.random.default_rng(seed)
    t = TTessellation.new_empty(Polygon.square())
    for _ in range(n_updates):
        x = rng.random()
        try:
            if x < 0.45 and t.stats.nseint < max_segments:
                ops.apply(t, ops.sample_uniform_split(t, rng))
            elif x < 0.7:
                ops.apply(t, ops.sample_uniform_merge(t, rng))
            else:
                ops.apply(t, ops.sample_uniform_flip(t, rng))
        except ops.InapplicableUpdate:
            pass
    return t


def stats_close(a, b, rel=1e-9):
    """Compare two StatsCache values: integers exactly, reals to ``rel``."""
    for name, x in a.as_dict().items():
        y = getattr(b, name)
        if isinstance(x, int):
            if x != y:
                return False
        elif abs(x - y) > rel * (1.0 + abs(y)):
            return False
    return True
