import numpy as np
import pytest

from pcptensor import KruskalModel

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion and assert it."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)


def random_model(rng, dims, rank, lo=0.2, hi=1.5):
    return KruskalModel(tuple(rng.uniform(lo, hi, size=(n, rank)) for n in dims))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
