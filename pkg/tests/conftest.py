"""Suite-wide pytest wiring.

The terminal-summary hook prints one PASS/FAIL line per acceptance
criterion after the run, keyed off the test names in
``test_acceptance.py``, so the gate's verdict is readable at a glance
even inside a long -v listing.
"""

from __future__ import annotations

import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    try:
        from test_acceptance import CRITERIA
    except ImportError:
        return
    results: dict[str, str] = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::" not in nodeid:
                continue
            name = nodeid.split("::")[-1].split("[")[0]
            if name in CRITERIA:
                verdict = "PASS" if outcome == "passed" else "FAIL"
                # keep the worst verdict if a test somehow reports twice
                if results.get(name) != "FAIL":
                    results[name] = verdict
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, label in CRITERIA.items():
        verdict = results.get(name)
        if verdict is not None:
            terminalreporter.write_line(f"{verdict}  {label}")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240817)
