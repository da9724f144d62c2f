import math

import numpy as np
import pytest

from app.graph.solver_graph import run_pipeline
from app.types.reports import CollectionResult, SensorCollection
from app.types.solution import BlockAllocation, Trajectory
from app.utils.channel import rate_matrix
from app.utils.geo import straight_line
from app.verify import simulate_collection, verify_report
from conftest import make_scenario


def _straight(s) -> Trajectory:
    return Trajectory(points=straight_line(s.mission.q_start, s.mission.q_end, s.num_slots))


def _allocation(s, per_slot: int = 500) -> BlockAllocation:
    counts = np.zeros((s.num_sensors, s.num_slots), dtype=np.int64)
    counts[0, :10] = per_slot
    counts[1, 30:] = per_slot
    return BlockAllocation(
        counts=counts, blocks_per_slot=s.mission.blocks_per_slot, fraction_loss=np.zeros(s.num_sensors)
    )


def _collection(sensor, n_blocks, failed, nominal, delivered, slot=3) -> SensorCollection:
    return SensorCollection(
        sensor=sensor,
        nominal_bits=nominal,
        delivered_bits=delivered,
        n_blocks=n_blocks,
        failed_blocks=failed,
        empirical_outage=failed / n_blocks if n_blocks else 0.0,
        slot_blocks={slot: n_blocks} if n_blocks else {},
        slot_failures={slot: failed} if n_blocks else {},
    )


def test_no_fading_means_no_failures():
    s = make_scenario(fading="deterministic")
    solution = run_pipeline(s)
    result = simulate_collection(s, solution.blocks, solution.trajectory, seed=3)
    for item in result.sensors:
        assert item.failed_blocks == 0
        assert item.n_blocks == int(solution.blocks.counts[item.sensor].sum())
        assert item.delivered_bits == pytest.approx(item.nominal_bits, rel=1e-12)
    assert verify_report(result).passed


@pytest.mark.parametrize("eps", [1e-2, 1e-1])
def test_empirical_outage_is_calibrated(eps):
    s = make_scenario(outage_eps=eps)
    N = _allocation(s)
    result = simulate_collection(s, N, _straight(s), seed=21, n_reps=4)
    for item in result.sensors:
        assert item.n_blocks == 4 * 5000
        sigma = math.sqrt(eps * (1.0 - eps) / item.n_blocks)
        assert abs(item.empirical_outage - eps) <= 4.0 * sigma
        assert item.delivered_bits <= item.nominal_bits * (1.0 + 1e-12)


def test_simulation_is_reproducible():
    s = make_scenario()
    N = _allocation(s, per_slot=50)
    Q = _straight(s)
    first = simulate_collection(s, N, Q, seed=5)
    second = simulate_collection(s, N, Q, seed=5)
    other = simulate_collection(s, N, Q, seed=6)
    assert first == second
    assert [item.slot_failures for item in first.sensors] != [item.slot_failures for item in other.sensors]
    with pytest.raises(ValueError):
        simulate_collection(s, N, Q, seed=5, n_reps=0)


def test_report_passes_on_calibrated_counts():
    results = CollectionResult(
        seed=1,
        n_reps=1,
        outage_eps=0.01,
        data_bits=[1e7],
        demand_ratio=[1.0],
        sensors=[_collection(0, 10_000, 100, 1e7, 0.99e7)],
    )
    report = verify_report(results)
    assert report.passed
    item = report.sensors[0]
    assert item.ci_low <= 0.01 <= item.ci_high
    assert item.expected_delivered_bits == pytest.approx(0.99e7)
    assert report.to_dict()["pass"] is True
    assert report.to_dict()["sensors"][0]["pass"] is True


def test_report_flags_excess_outage():
    sigma = math.sqrt(0.01 * 0.99 / 10_000)
    failed = math.ceil((0.01 + 5.0 * sigma) * 10_000)
    results = CollectionResult(
        seed=1,
        n_reps=1,
        outage_eps=0.01,
        data_bits=[1e7, 1e7],
        demand_ratio=[1.0, 1.0],
        sensors=[_collection(0, 10_000, 100, 1e7, 0.99e7), _collection(1, 10_000, failed, 1e7, 0.99e7, slot=7)],
    )
    report = verify_report(results)
    assert not report.passed
    assert report.failed_sensors == [1]
    reasons = report.sensors[1].reasons
    assert any("sigma above" in reason for reason in reasons)
    assert report.sensors[1].worst_slots[0]["slot"] == 8


def test_report_flags_missing_blocks():
    results = CollectionResult(
        seed=1,
        n_reps=1,
        outage_eps=0.01,
        data_bits=[1e7],
        demand_ratio=[0.0],
        sensors=[_collection(0, 0, 0, 0.0, 0.0)],
    )
    report = verify_report(results)
    assert not report.passed
    assert any(reason.startswith("demand unmet") for reason in report.sensors[0].reasons)


def test_inflated_rates_fail_verification():
    s = make_scenario()
    N = _allocation(s, per_slot=200)
    Q = _straight(s)
    honest = rate_matrix(s, Q.points)
    result = simulate_collection(s, N, Q, seed=9, rates=2.0 * honest)
    assert all(item.empirical_outage > 0.5 for item in result.sensors)
    assert not verify_report(result).passed


def test_delivered_floor_uses_requested_data():
    """명목 전송량이 S_k 보다 작으면 그만큼 하한 미달"""
    short = _collection(0, 10_000, 100, 0.95e7, 0.94e7)
    results = CollectionResult(
        seed=1, n_reps=1, outage_eps=0.01, data_bits=[1e7], demand_ratio=[0.995], sensors=[short]
    )
    report = verify_report(results)
    assert not report.passed
    item = report.sensors[0]
    sigma = math.sqrt(0.01 * 0.99 / 10_000)
    assert item.delivered_floor == pytest.approx((1.0 - 0.01 - 3.0 * sigma) * 1e7, rel=1e-12)
    assert any(reason.startswith("delivered") for reason in item.reasons)
