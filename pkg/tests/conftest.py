import pytest

from spinbarrier.experiments import DEFAULT_RABI, default_scenario, run_scenario
from spinbarrier.model import DecayConfig

# the cw damage family: 0, Omega/10, Omega/3, Omega
CW_GAMMAS = (0.0, DEFAULT_RABI / 10, DEFAULT_RABI / 3, DEFAULT_RABI)


@pytest.fixture(scope="session")
def baseline_run():
    return run_scenario(default_scenario("laser_off_baseline"))


@pytest.fixture(scope="session")
def cw_runs():
    runs = {}
    for gamma in CW_GAMMAS:
        cfg = default_scenario("cw_decoupling", decay=DecayConfig(gamma), label=f"gamma={gamma:g}")
        runs[gamma] = run_scenario(cfg)
    return runs


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
