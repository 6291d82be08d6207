import time
from contextlib import contextmanager

ACCEPTANCE_LINES = []


@contextmanager
def criterion(number, title, budget_s):
    """Time a block, record one PASS/FAIL line, and enforce the time budget."""
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        first = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        ACCEPTANCE_LINES.append(f"criterion {number:2d} FAIL  {title} ({elapsed:.2f} s): {first}")
        raise
    elapsed = time.perf_counter() - start
    ok = elapsed < budget_s
    ACCEPTANCE_LINES.append(
        f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title} "
        f"({elapsed:.2f} s, budget {budget_s:g} s)"
    )
    assert ok, f"criterion {number} took {elapsed:.2f} s, budget {budget_s} s"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
