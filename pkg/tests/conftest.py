import numpy as np
import pytest

from randlogrank.survival import SurvivalRecord


def naive_LU(time, event, group):
    """Re-derive L and U from scratch: full contingency table at every distinct time."""
    L = 0.0
    U = 0.0
    for t in sorted(set(time)):
        n1 = n0 = d1 = d0 = 0
        for w, e, z in zip(time, event, group):
            if w >= t:
                if z == 1:
                    n1 += 1
                else:
                    n0 += 1
            if e and w == t:
                if z == 1:
                    d1 += 1
                else:
                    d0 += 1
        N, D = n1 + n0, d1 + d0
        if D == 0:
            continue
        L += d1 - D * n1 / N
        if N > 1:
            U += D * (N - D) * n1 * n0 / (N * N * (N - 1))
    return L, U


def records_from(time, event, group, stratum=None):
    stratum = [0] * len(time) if stratum is None else stratum
    return [SurvivalRecord(i, float(t), bool(e), int(g), int(s)) for i, (t, e, g, s) in enumerate(zip(time, event, group, stratum))]


@pytest.fixture
def two_records():
    return [SurvivalRecord("a", 1.0, True, 1), SurvivalRecord("b", 2.0, True, 0)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
