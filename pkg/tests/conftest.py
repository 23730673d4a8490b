import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def detail(request):
    """Attach a short measurement summary to the acceptance line of this test."""

    def note(text):
        request.node.user_properties.append(("detail", text))

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        notes = "; ".join(v for k, v in item.user_properties if k == "detail")
        status = "PASS" if rep.passed else "FAIL"
        _CRITERIA[number] = f"criterion {number:>2} {status}  {title}" + (f"  [{notes}]" if notes else "")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
