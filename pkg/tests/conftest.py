import numpy as np
import pytest

from contourgas.geometry import BLOB, CIRCLE, ELLIPSE_02, build_contour, ellipse
from contourgas.maps import interior_map
from contourgas.operators import OperatorSet


def _ops(spec, M):
    g = build_contour(spec, M)
    return OperatorSet(g, interior_map(g))


@pytest.fixture(scope="session")
def circle_ops():
    return _ops(CIRCLE, 128)


@pytest.fixture(scope="session")
def ellipse_ops():
    return _ops(ellipse(0.3), 256)


@pytest.fixture(scope="session")
def ellipse02_ops():
    return _ops(ELLIPSE_02, 256)


@pytest.fixture(scope="session")
def blob_ops():
    return _ops(BLOB, 256)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion; lines are echoed in the summary."""
    def _report(number, title, passed, detail):
        line = "%s criterion %2d  %-34s %s" % ("PASS" if passed else "FAIL", number, title, detail)
        _ACCEPTANCE.append(line)
        print(line)
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
