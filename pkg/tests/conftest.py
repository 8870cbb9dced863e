import pytest

from historic_nds import NDS, ObservableSpec, UnperturbedMap
from historic_nds.newhouse import ItineraryParams, build_schedule


@pytest.fixture(scope="session")
def f0():
    return UnperturbedMap()


@pytest.fixture
def nds(f0):
    return NDS(f0, 0.1)


@pytest.fixture(scope="session")
def phi():
    return ObservableSpec.from_noise(0.1)


@pytest.fixture(scope="session")
def newhouse_params():
    return build_schedule(ItineraryParams(), 10)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record one pass/fail line per acceptance criterion; printed in the
    terminal summary so it survives output capturing."""

    def record(number: int, title: str, ok: bool, detail: str, elapsed: float, budget: float):
        within = elapsed < budget
        status = "PASS" if ok and within else "FAIL"
        line = f"[{status}] criterion {number:2d}: {title} | {detail} | {elapsed:.2f}s (< {budget:g}s)"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
        assert within, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
