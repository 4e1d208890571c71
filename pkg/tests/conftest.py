import os
import re
from pathlib import Path

import numpy as np
import pytest

ACCEPTANCE_FILE = "test_acceptance.py"
_results: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if ACCEPTANCE_FILE not in report.nodeid:
        return
    m = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    num, name = int(m.group(1)), m.group(2).replace("_", " ")
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _results[num] = ("PASS" if report.passed else "FAIL", name)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        status, name = _results[num]
        terminalreporter.write_line(f"criterion {num:2d} {status}  {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    monkeypatch.delenv("CROSSIMPACT_OUT", raising=False)
    return tmp_path / "out"


FIXTURES = Path(__file__).parent / "fixtures"
