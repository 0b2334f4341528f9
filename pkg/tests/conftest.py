import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=60)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def spread_points(rng, n, min_sep=0.2, box=2.0):
    """Random points in a square with a minimum pairwise separation."""
    pts = []
    while len(pts) < n:
        c = rng.uniform(-box, box, 2)
        if all(np.hypot(*(c - p)) >= min_sep for p in pts):
            pts.append(c)
    return np.array(pts)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
