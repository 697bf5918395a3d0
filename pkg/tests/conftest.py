import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synthgen.scene import Scene  # noqa: E402

TRIANGLE_OBJ = """\
v -1 -1 0
v 1 -1 0
v 0 1 0
f 1 2 3
"""

_acceptance: list[tuple[str, str, float]] = []


@pytest.fixture
def scene():
    return Scene()


@pytest.fixture
def tri_obj(tmp_path):
    path = tmp_path / "tri.obj"
    path.write_text(TRIANGLE_OBJ)
    return path


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    start = time.perf_counter()
    yield
    item.user_properties.append(("elapsed", time.perf_counter() - start))


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        elapsed = dict(report.user_properties).get("elapsed", report.duration)
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome, elapsed))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, elapsed in _acceptance:
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}  ({elapsed:.2f} s)")
