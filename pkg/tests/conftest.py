import re
from pathlib import Path

import pytest

from selbias.harness import ScenarioConfig, run_one_sample_scenario, run_two_sample_scenario

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

ACCEPTANCE_LINES: list[str] = []


def record(criterion, passed: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
    return passed


def _criterion_order(line):
    m = re.match(r"criterion (\d+)(\S*):", line)
    return int(m.group(1)), m.group(2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_criterion_order):
            terminalreporter.write_line(line)


def pytest_configure(config):
    ACCEPTANCE_LINES.clear()


def by_key(rows):
    return {(r.scenario, r.method, r.k): r for r in rows}


@pytest.fixture(scope="session")
def equicorr_config():
    return ScenarioConfig.from_json(CONFIGS / "equicorrelation_scaled.json")


@pytest.fixture(scope="session")
def equicorr_rows(equicorr_config):
    return run_one_sample_scenario(equicorr_config, threads=1)


@pytest.fixture(scope="session")
def two_sample_config():
    return ScenarioConfig.from_json(CONFIGS / "two_sample_scaled.json")


@pytest.fixture(scope="session")
def two_sample_rows(two_sample_config):
    return run_two_sample_scenario(two_sample_config, threads=1)
