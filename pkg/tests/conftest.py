import time

import numpy as np
import pytest

from flyby_guidance.montecarlo import CampaignConfig, run_campaign
from flyby_guidance.scenario import build_benchmark
from flyby_guidance.scp import run_scp

# acceptance outcomes, printed at the end of the session
ACCEPTANCE = {}


def record_acceptance(number, title, passed, detail=""):
    ACCEPTANCE[number] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}" + (f"  ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def benchmark():
    return build_benchmark()


@pytest.fixture(scope="session")
def faulty_benchmark():
    return build_benchmark(fault=4)


@pytest.fixture(scope="session")
def nominal_solution(benchmark):
    return run_scp(benchmark)


def timed_campaign(config):
    t0 = time.perf_counter()
    result = run_campaign(config)
    result.elapsed = time.perf_counter() - t0
    return result


@pytest.fixture(scope="session")
def nominal_campaign():
    return timed_campaign(CampaignConfig(sample_count=200, seed=0, timing=True))


@pytest.fixture(scope="session")
def faulty_campaign():
    return timed_campaign(CampaignConfig(sample_count=200, fault=4, seed=0, timing=True))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
