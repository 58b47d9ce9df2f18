import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria = []


@pytest.fixture
def record(request):
    """Attach ``key=value`` details to the acceptance summary line of this test."""

    def rec(**kv):
        request.node.user_properties.extend(kv.items())

    return rec


def pytest_runtest_logreport(report):
    if "acceptance" not in report.keywords:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _criteria.append(report)


def _fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for rep in sorted(_criteria, key=lambda r: r.nodeid):
        name = rep.nodeid.split("::")[-1]
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        detail = " ".join(f"{k}={_fmt(v)}" for k, v in rep.user_properties)
        terminalreporter.write_line(f"{status}  {name}  {detail}".rstrip())
