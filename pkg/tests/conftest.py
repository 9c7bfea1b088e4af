import re

CRITERIA = {
    1: "pricing exactness vs oracle",
    2: "bound sandwich",
    3: "refinement monotonicity",
    4: "column-generation exactness",
    5: "merge safety",
    6: "configuration grid integrity",
    7: "refinement budget",
    8: "diving",
    9: "two-dimensional resource correctness",
    10: "determinism",
}

_PATTERN = re.compile(r"test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion at the end of the run."""
    results = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            m = _PATTERN.search(nodeid)
            if not m:
                continue
            num = int(m.group(1))
            ok = outcome == "passed"
            results[num] = results.get(num, True) and ok
    if not results:
        return
    tr = terminalreporter
    tr.write_sep("-", "acceptance criteria")
    for num in sorted(results):
        label = CRITERIA.get(num, "?")
        verdict = "PASS" if results[num] else "FAIL"
        tr.write_line(f"criterion {num:2d} ({label}): {verdict}")
