import contextlib
import time

# criterion number -> list of (part title, passed, seconds)
ACCEPTANCE: dict[int, list[tuple[str, bool, float]]] = {}


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record one part of an acceptance criterion as passed or failed; failures still propagate."""
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        ACCEPTANCE.setdefault(number, []).append((title, ok, time.perf_counter() - t0))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p[1] for p in parts)
        title = "; ".join(p[0] + ("" if p[1] else " [failed]") for p in parts)
        secs = sum(p[2] for p in parts)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} {title} ({secs:.2f} s)")
