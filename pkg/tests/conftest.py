from pathlib import Path

import numpy as np
import pytest

from svaid.model import load_model
from svaid.sim import load_scenario, run_scenario

DATA = Path(__file__).resolve().parents[1] / "src" / "svaid" / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def dp_model():
    return load_model(DATA / "double_pendulum.model")


@pytest.fixture(scope="session")
def arm_model():
    return load_model(DATA / "arm4.model")


@pytest.fixture(scope="session")
def leg_model():
    return load_model(DATA / "leg4.model")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def dp_offline_run(dp_model):
    """Noiseless 10 s / 1 kHz double-pendulum run shared by several tests."""
    scn, cfg = load_scenario(DATA / "double_pendulum_offline.json", dp_model)
    return scn, cfg, run_scenario(scn, cfg)


@pytest.fixture(scope="session")
def arm_run(arm_model):
    scn, cfg = load_scenario(DATA / "arm_online_gated.json", arm_model)
    return scn, cfg, run_scenario(scn, cfg)


ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
