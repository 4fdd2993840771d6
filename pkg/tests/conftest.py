import os

import hypothesis
import pytest
from hypothesis import strategies as st

hypothesis.settings.register_profile("default", max_examples=200, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=1000, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

tiles = st.one_of(st.just(0), st.integers(1, 13).map(lambda k: 2 ** k))
boards = st.lists(tiles, min_size=16, max_size=16).map(tuple)


def pytest_addoption(parser):
    parser.addoption("--skip-full", action="store_true",
                     help="skip the full-budget (200,000 game) evolution runs")


def pytest_collection_modifyitems(config, items):
    if not config.getoption("--skip-full"):
        return
    skip = pytest.mark.skip(reason="--skip-full given")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


# ---- acceptance report ----------------------------------------------------

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance criterion.

    Call ``criterion(name, passed, detail)``; a failing verdict also fails
    the test unless ``gating=False``.
    """

    def record(name, passed, detail="", gating=True):
        tag = "PASS" if passed else ("FAIL" if gating else "INFO")
        ACCEPTANCE_LINES.append(f"[{tag}] {name}: {detail}".rstrip(": "))
        if gating:
            assert passed, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
