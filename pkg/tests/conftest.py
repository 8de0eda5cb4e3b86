import numpy as np
import pytest

from weakkam.grid import PeriodicGrid
from weakkam.model import free_model, pendulum_model
from weakkam.semigroup import build_kernel


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def pendulum64():
    return build_kernel(pendulum_model(), PeriodicGrid.circle(64), 0.05, 4.0)


@pytest.fixture(scope="session")
def pendulum16():
    return build_kernel(pendulum_model(), PeriodicGrid.circle(16), 0.1, 4.0)


@pytest.fixture(scope="session")
def free32():
    return build_kernel(free_model(), PeriodicGrid.circle(32), 0.1, 4.0)


@pytest.fixture(scope="session")
def torus_kernel():
    """U = cos x1 on a 24x24 torus; x2 is a free direction."""
    return build_kernel(pendulum_model(2), PeriodicGrid.torus((24, 24)), 0.2, 2.0)


# -- acceptance reporting ---------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        num, title = mark.args
        ok = rep.passed
        detail = "" if ok else (str(getattr(call.excinfo, "value", "")).strip().splitlines() or ["failed"])[0][:160]
        prev = _CRITERIA.get(num)
        if prev is None or prev[1]:
            _CRITERIA[num] = (title, ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[num]
        line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  ({detail})"
        tr.write_line(line)
