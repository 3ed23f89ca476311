import pytest

# key -> title, in report order
CRITERIA = {
    "golden-0.1": "Five-vehicle example, V=0.1 timeline",
    "golden-1": "Five-vehicle example, V=1 timeline",
    "batch-oracle": "Batch solver equals exhaustive matching",
    "sssp-oracle": "SSSP equals Floyd-Warshall",
    "hol-recursion": "HOL recursion property suite",
    "second-moment": "Inter-arrival second moment and K",
    "stability": "Stability verdicts at 60% and 150% load",
    "tradeoff": "Cost-delay trade-off direction",
    "dominance": "MDPP dominates nearest-FCFS + charger chasing",
    "audits": "Conservation and viability audits",
    "determinism": "Byte-identical re-runs",
}

_results: dict = {}


@pytest.fixture
def report():
    """``report(key, ok, detail)`` records one acceptance outcome (parts are AND-ed)."""

    def _record(key, ok, detail=""):
        assert key in CRITERIA, key
        prev = _results.get(key)
        if prev is None:
            _results[key] = (bool(ok), [detail] if detail else [])
        else:
            _results[key] = (prev[0] and bool(ok), prev[1] + ([detail] if detail else []))
        print(f"[{'PASS' if ok else 'FAIL'}] {CRITERIA[key]}: {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key, title in CRITERIA.items():
        if key not in _results:
            tr.write_line(f"[----] {title}: not run")
            continue
        ok, details = _results[key]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {title}: {'; '.join(details)}")
