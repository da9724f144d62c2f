import numpy as np
import pytest
from scipy.optimize import linprog

from app.nodes.schedule_node import build_schedule_lp, schedule_lp_from_rates, solve_lp, write_lp
from app.types.solution import LpStatus, Trajectory
from app.utils.geo import straight_line


def _random_instance(rng, K, M):
    rates = rng.uniform(0.1, 8.0, size=(K, M))
    energies = rng.uniform(0.01, 0.1, size=K)
    u = rng.uniform(0.2, 0.95, size=K)
    # 모든 슬롯을 1/K 씩 나누면 달성되는 양의 일부 -> 항상 실행 가능
    demands = u * rates.sum(axis=1) / K
    return rates, energies, demands


def test_reference_problem_size(reference_scenario):
    s = reference_scenario
    Q = Trajectory(points=straight_line(s.mission.q_start, s.mission.q_end, s.num_slots))
    lp = build_schedule_lp(s, Q)
    assert lp.num_variables == 401
    assert lp.num_structural == 108
    assert lp.variable_name(0) == "x_1_1"
    assert lp.variable_name(400) == "theta"
    assert lp.row_name(4) == "demand_1"
    assert lp.row_name(107) == "slot_100"


def test_zero_rates_are_infeasible():
    lp = schedule_lp_from_rates(np.zeros((2, 3)), [0.05, 0.05], [1.0, 1.0])
    solution = solve_lp(lp)
    assert solution.status == LpStatus.INFEASIBLE
    assert solution.infeasible_sensors == [0, 1]


def test_single_sensor_single_slot():
    solution = solve_lp(schedule_lp_from_rates([[4.0]], [0.5], [2.0]))
    assert solution.is_optimal
    assert solution.schedule.x[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert solution.theta == pytest.approx(0.25, abs=1e-12)


def test_single_sensor_prefers_better_slot():
    solution = solve_lp(schedule_lp_from_rates([[2.0, 1.0]], [1.0], [2.0]))
    assert np.allclose(solution.schedule.x, [[1.0, 0.0]], atol=1e-12)
    assert solution.theta == pytest.approx(1.0, abs=1e-12)


def test_equal_rates_share_slots():
    """동일 전송률이면 θ = E·r/R, 슬롯 합은 1 이하"""
    solution = solve_lp(schedule_lp_from_rates(np.ones((2, 4)), [0.2, 0.2], [1.5, 1.5]))
    assert solution.theta == pytest.approx(0.2 * 1.5, abs=1e-12)
    assert np.all(solution.schedule.x.sum(axis=0) <= 1.0 + 1e-12)
    assert np.allclose(solution.schedule.x.sum(axis=1), 1.5, atol=1e-12)


@pytest.mark.parametrize("index", range(50))
def test_matches_reference_lp_solver(index):
    rng = np.random.default_rng(1000 + index)
    K = int(rng.integers(1, 6))
    M = int(rng.integers(K, 40))
    rates, energies, demands = _random_instance(rng, K, M)
    lp = schedule_lp_from_rates(rates, energies, demands)
    solution = solve_lp(lp)
    reference = linprog(lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub, bounds=(0, None), method="highs")
    assert reference.status == 0
    assert solution.is_optimal
    assert solution.theta == pytest.approx(reference.fun, rel=1e-6, abs=1e-9)
    assert solution.certificate <= 1e-8
    assert solution.primal_residual <= 1e-9
    x = solution.schedule.x
    assert np.all((rates * x).sum(axis=1) >= demands * (1.0 - 1e-9))
    assert np.all(x.sum(axis=0) <= 1.0 + 1e-9)


def test_theta_scales_with_energy():
    rng = np.random.default_rng(7)
    rates, energies, demands = _random_instance(rng, 3, 20)
    base = solve_lp(schedule_lp_from_rates(rates, energies, demands)).theta
    scaled = solve_lp(schedule_lp_from_rates(rates, 3.0 * energies, demands)).theta
    assert scaled == pytest.approx(3.0 * base, rel=1e-9)


def test_theta_nondecreasing_in_demand():
    rng = np.random.default_rng(8)
    rates, energies, demands = _random_instance(rng, 3, 20)
    thetas = [solve_lp(schedule_lp_from_rates(rates, energies, demands * f)).theta for f in (0.5, 0.75, 1.0)]
    assert thetas[0] <= thetas[1] + 1e-12
    assert thetas[1] <= thetas[2] + 1e-12


def test_unreachable_sensor_is_named():
    rates = np.array([[1.0, 1.0, 1.0], [0.5, 0.5, 0.5]])
    solution = solve_lp(schedule_lp_from_rates(rates, [0.1, 0.1], [0.5, 5.0]))
    assert solution.status == LpStatus.INFEASIBLE
    assert 1 in solution.infeasible_sensors


def test_write_lp_text(tmp_path):
    lp = schedule_lp_from_rates([[2.0, 1.0], [1.0, 3.0]], [0.05, 0.1], [1.0, 2.0])
    path = write_lp(lp, tmp_path / "dump" / "schedule.lp")
    text = path.read_text(encoding="utf-8")
    assert text.splitlines()[1] == "Minimize"
    assert " obj: theta" in text
    assert " energy_1: 0.05 x_1_1 + 0.05 x_1_2 - 1.0 theta <= 0.0" in text
    assert " demand_2: 1.0 x_2_1 + 3.0 x_2_2 >= 2.0" in text
    assert " slot_2: 1.0 x_1_2 + 1.0 x_2_2 <= 1.0" in text
    assert " 0 <= x_2_2 <= 1" in text
    assert text.rstrip().endswith("End")
