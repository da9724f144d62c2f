from pathlib import Path

import numpy as np
import pytest

from app.types.scenario import ChannelParams, Mission, Scenario, Sensor
from app.utils.scenario_io import REFERENCE_CHANNEL, dump_scenario, load_scenario

ROOT = Path(__file__).parent
REFERENCE_SCENARIO = ROOT / "scenarios" / "four_sensors.toml"


def make_scenario(
    positions=((-200.0, 100.0), (200.0, -100.0)),
    data_bits: float = 8e6,
    power_w: float = 0.1,
    horizon: float = 20.0,
    slot_len: float = 0.5,
    v_max: float = 50.0,
    altitude: float = 100.0,
    q_start=(-400.0, 0.0),
    q_end=(400.0, 0.0),
    blocks_per_slot: int = 1000,
    kappa: float = 1e-4,
    **channel,
) -> Scenario:
    """테스트용 소형 시나리오 (기본: 센서 2개, M=40)"""
    return Scenario(
        sensors=[Sensor(position=tuple(p), data_bits=data_bits, power_w=power_w) for p in positions],
        mission=Mission(
            altitude=altitude,
            v_max=v_max,
            horizon=horizon,
            slot_len=slot_len,
            q_start=tuple(q_start),
            q_end=tuple(q_end),
            blocks_per_slot=blocks_per_slot,
        ),
        channel=ChannelParams(**{**REFERENCE_CHANNEL, **channel}),
        tol_kappa=kappa,
    )


@pytest.fixture
def small_scenario() -> Scenario:
    return make_scenario()


@pytest.fixture
def small_scenario_file(tmp_path, small_scenario) -> Path:
    return dump_scenario(small_scenario, tmp_path / "small.toml")


@pytest.fixture(scope="session")
def reference_scenario() -> Scenario:
    return load_scenario(REFERENCE_SCENARIO)


@pytest.fixture(scope="session")
def small_solution():
    from app.graph.solver_graph import run_pipeline

    s = make_scenario()
    return s, run_pipeline(s)


@pytest.fixture(scope="session")
def reference_solutions(reference_scenario):
    """T = 50 s / 100 s 에서의 전체 파이프라인 결과"""
    from app.graph.solver_graph import run_pipeline

    return {
        horizon: run_pipeline(reference_scenario.with_overrides(horizon=horizon)) for horizon in (50.0, 100.0)
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
