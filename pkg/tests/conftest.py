import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def batch_means_se(series, n_batches: int = 50) -> float:
    """Standard error of the mean of an autocorrelated series (batch means)."""
    s = np.asarray(series, dtype=float)
    size = s.size // n_batches
    means = s[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


# one line per acceptance criterion, filled in by test_acceptance.py
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
