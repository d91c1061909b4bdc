import pytest

from moskcsk.channel import ChannelParams, SlotGrid

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance check."""

    def _report(label, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {label}" + (f"  ({detail})" if detail else ""))
        print(ACCEPTANCE_LINES[-1])
        return ok

    def info(label, detail):
        ACCEPTANCE_LINES.append(f"[INFO] {label}  ({detail})")
        print(ACCEPTANCE_LINES[-1])

    _report.info = info
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def fig3_params():
    return ChannelParams(D=100.0, mu_d=0.0, r_rx=4.0)


@pytest.fixture
def slot():
    return SlotGrid(T_s=0.2, L=0)
