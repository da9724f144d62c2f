"""
비교 기법과 파라미터 스윕

- straight: q_0 → q_F 등속 직선 비행 + (P2) 스케줄
- static:   센서 기하학적 중심 상공 (고도 H) 고정 수집기 + (P2) 스케줄
- optimized: BCD 파이프라인 (직선 비행에서 시작)
"""

import concurrent.futures
import logging
import math
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.config import LOG_LEVEL, SWEEP_WORKERS, TOLERANCES
from app.graph.solver_graph import run_pipeline
from app.nodes.colored_log_handler import ColoredLogHandler
from app.nodes.schedule_node import build_schedule_lp, solve_lp
from app.types.errors import CollectorError, InfeasibleScheduleError
from app.types.reports import ComparisonRow
from app.types.scenario import Scenario
from app.types.solution import LpSolution, Solution, Trajectory
from app.utils.geo import centroid, straight_line

logging.basicConfig(level=LOG_LEVEL, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)

SCHEMES = ("optimized", "straight", "static")

# 스윕 변수 -> Scenario.with_overrides 인자
SWEEP_VARIABLES = {"S": "data_bits", "eps": "outage_eps", "T": "horizon"}

# 임무가 바뀌지 않아 지점 사이에 궤적을 재사용할 수 있는 스윕 변수와 θ 의 기대 추세
THETA_TREND = {"S": 1, "eps": -1}
# 직선 비행 대비 이득이 커져야 하는 변수
GAIN_TREND = {"S": 1}
WARM_START_VARIABLES = tuple(THETA_TREND)


def straight_trajectory(s: Scenario) -> Trajectory:
    return Trajectory(points=straight_line(s.mission.q_start, s.mission.q_end, s.num_slots))


def static_collector(s: Scenario) -> Tuple[np.ndarray, LpSolution]:
    """센서 중심 상공에 고정된 수집기 (끝점 제약 없음)"""
    position = centroid(s.positions)
    Q = Trajectory(points=np.tile(position, (s.num_slots, 1)))
    return position, solve_lp(build_schedule_lp(s, Q))


def parse_sweep(text: Optional[str]) -> Tuple[Optional[str], List[float]]:
    """'S=2e6:2e6:2e7' (start:step:stop, 끝 포함) 또는 'eps=1e-4,1e-3' 형식"""
    if not text:
        return None, []
    if "=" not in text:
        raise ValueError(f"sweep must look like <var>=<grid>, got '{text}'")
    variable, grid = (part.strip() for part in text.split("=", 1))
    if variable not in SWEEP_VARIABLES:
        raise ValueError(f"unknown sweep variable '{variable}' (choose from {sorted(SWEEP_VARIABLES)})")
    if ":" in grid:
        parts = [float(v) for v in grid.split(":")]
        if len(parts) != 3:
            raise ValueError(f"range grid must be start:step:stop, got '{grid}'")
        start, step, stop = parts
        if step <= 0 or stop < start:
            raise ValueError(f"range grid needs step > 0 and stop >= start, got '{grid}'")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [start + i * step for i in range(count)]
    else:
        values = [float(v) for v in grid.split(",") if v.strip()]
    if not values:
        raise ValueError(f"empty sweep grid in '{text}'")
    return variable, values


def sweep_scenarios(s: Scenario, variable: Optional[str], values: Sequence[float]) -> List[Scenario]:
    if variable is None:
        return [s]
    key = SWEEP_VARIABLES[variable]
    return [s.with_overrides(**{key: value}) for value in values]


def _row(variable, value, scheme, theta=None, iterations=0, wall_time=0.0, detail="") -> ComparisonRow:
    return ComparisonRow(
        sweep_variable=variable or "",
        value=value,
        scheme=scheme,
        theta=theta,
        feasible=theta is not None,
        iterations=iterations,
        wall_time=wall_time,
        detail=detail,
    )


def _write_point_bundle(solution: Solution, s: Scenario, out_dir: Optional[str], variable, value) -> None:
    if not out_dir:
        return
    from app.utils.bundle import write_bundle

    write_bundle(solution, s, out_dir, {"kappa": s.tol_kappa, "sweep_variable": variable, "sweep_value": value})


def _optimized_row(
    s: Scenario, variable: Optional[str], value: Optional[float], Q0: Optional[Trajectory] = None
) -> Tuple[ComparisonRow, Optional[Solution]]:
    started = time.perf_counter()
    try:
        solution = run_pipeline(s, Q0)
    except CollectorError as exc:
        logger.warning(f"optimized 실패 ({variable}={value}): {exc}")
        return _row(variable, value, "optimized", wall_time=time.perf_counter() - started, detail=str(exc)), None
    row = _row(variable, value, "optimized", solution.theta, solution.trace.outer_iterations, time.perf_counter() - started)
    return row, solution


def _baseline_rows(s: Scenario, variable: Optional[str], value: Optional[float]) -> List[ComparisonRow]:
    rows: List[ComparisonRow] = []
    started = time.perf_counter()
    try:
        straight = solve_lp(build_schedule_lp(s, straight_trajectory(s)))
        if straight.is_optimal:
            rows.append(_row(variable, value, "straight", straight.theta, 1, time.perf_counter() - started))
        else:
            detail = str(InfeasibleScheduleError(straight.infeasible_sensors, "straight flight"))
            rows.append(_row(variable, value, "straight", wall_time=time.perf_counter() - started, detail=detail))
    except CollectorError as exc:
        rows.append(_row(variable, value, "straight", wall_time=time.perf_counter() - started, detail=str(exc)))

    started = time.perf_counter()
    try:
        _, static = static_collector(s)
        if static.is_optimal:
            rows.append(_row(variable, value, "static", static.theta, 1, time.perf_counter() - started))
        else:
            detail = str(InfeasibleScheduleError(static.infeasible_sensors, "static collector"))
            rows.append(_row(variable, value, "static", wall_time=time.perf_counter() - started, detail=detail))
    except CollectorError as exc:
        rows.append(_row(variable, value, "static", wall_time=time.perf_counter() - started, detail=str(exc)))
    return rows


def _with_gains(rows: List[ComparisonRow]) -> List[ComparisonRow]:
    """gain_ratio = θ_scheme / θ_optimized (첫 행이 optimized)"""
    reference = rows[0].theta
    if not reference:
        return [row.model_copy(update={"gain_ratio": None}) for row in rows]
    return [row.model_copy(update={"gain_ratio": row.theta / reference if row.feasible else None}) for row in rows]


def _solve_point(
    s: Scenario, variable: Optional[str] = None, value: Optional[float] = None, out_dir: Optional[str] = None
) -> Tuple[List[ComparisonRow], Optional[np.ndarray]]:
    optimized, solution = _optimized_row(s, variable, value)
    rows = _with_gains([optimized] + _baseline_rows(s, variable, value))
    if solution is None:
        return rows, None
    _write_point_bundle(solution, s, out_dir, variable, value)
    return rows, solution.trajectory.points


def compare_point(
    s: Scenario, variable: Optional[str] = None, value: Optional[float] = None, out_dir: Optional[str] = None
) -> List[ComparisonRow]:
    """한 시나리오에서 세 기법의 θ 계산 (기법별 실패는 행에 기록)"""
    return _solve_point(s, variable, value, out_dir)[0]


def _straight_gain(rows: List[ComparisonRow]) -> Optional[float]:
    straight = next(row for row in rows if row.scheme == "straight")
    return straight.gain_ratio if rows[0].feasible else None


def _violations(variable: str, before: List[ComparisonRow], after: List[ComparisonRow]) -> List[str]:
    """인접 지점 쌍에서 어긋난 추세 - 'forward' 는 뒤 지점을, 'backward' 는 앞 지점을 다시 푼다

    실행 불가능한 지점은 θ = ∞ 로 본다.
    """
    a, b = before[0], after[0]
    order = 1 if b.value > a.value else -1
    tol = TOLERANCES["monotone"]
    theta_a = a.theta if a.feasible else math.inf
    theta_b = b.theta if b.feasible else math.inf
    trend = THETA_TREND[variable] * order
    found = []
    if trend < 0 and theta_b > theta_a * (1.0 + tol):
        found.append("forward")
    if trend > 0 and theta_b < theta_a * (1.0 - tol):
        found.append("backward")
    gain_a, gain_b = _straight_gain(before), _straight_gain(after)
    if variable in GAIN_TREND and gain_a is not None and gain_b is not None:
        if GAIN_TREND[variable] * order > 0 and gain_b < gain_a * (1.0 - tol):
            found.append("forward")
        if GAIN_TREND[variable] * order < 0 and gain_b > gain_a * (1.0 + tol):
            found.append("backward")
    return list(dict.fromkeys(found))


def _retry(jobs, results, trajectories, target: int, source: int) -> bool:
    """source 지점의 최적 궤적에서 target 지점을 다시 풀어 θ 가 줄면 교체"""
    if trajectories[source] is None:
        return False
    s, variable, value, out_dir = jobs[target]
    row, solution = _optimized_row(s, variable, value, Q0=Trajectory(points=trajectories[source]))
    current = results[target][0]
    if solution is None or (current.feasible and row.theta >= current.theta):
        return False
    _write_point_bundle(solution, s, out_dir, variable, value)
    logger.info(f"{variable}={value!r}: 이웃 궤적에서 재시작해 θ {current.theta!r} -> {row.theta!r}")
    results[target] = _with_gains([row] + results[target][1:])
    trajectories[target] = solution.trajectory.points
    return True


def _warm_start_sweep(jobs, results: List[List[ComparisonRow]], trajectories: List[Optional[np.ndarray]]) -> int:
    """추세가 어긋난 인접 지점을 이웃의 최적 궤적에서 다시 풀기

    S, eps 스윕은 임무 (끝점, 슬롯, 속도) 가 같아 이웃 궤적이 그대로 실행 가능하다.
    BCD 는 시작 궤적의 (P2) 값보다 나빠지지 않으므로 θ 추세 위반은 재시작 한 번으로 해소된다.
    앞 지점 재시작이 그 앞 쌍을 다시 어긋나게 할 수 있어 교체가 없을 때까지 (최대 지점 수만큼) 훑는다.
    """
    variable = jobs[0][1]
    replaced = 0
    for _ in range(len(jobs)):
        changed = False
        for i in range(1, len(jobs)):
            for direction in _violations(variable, results[i - 1], results[i]):
                target, source = (i, i - 1) if direction == "forward" else (i - 1, i)
                if _retry(jobs, results, trajectories, target, source):
                    changed = True
                    replaced += 1
        if not changed:
            break
    return replaced


def _point_dir(out_dir: Optional[str], index: int, variable: Optional[str], value: Optional[float]) -> Optional[str]:
    if not out_dir:
        return None
    name = f"point_{index:03d}" if variable is None else f"point_{index:03d}_{variable}={value!r}"
    return str(Path(out_dir) / name)


def compare(
    s: Scenario,
    sweep: Optional[str] = None,
    workers: Optional[int] = None,
    out_dir: Optional[str] = None,
    warm_start: bool = True,
) -> List[ComparisonRow]:
    """세 기법 비교 - 스윕 지점마다 직선 비행에서 풀고, S/eps 스윕은 이웃 궤적으로 한 번 더 다듬는다"""
    variable, values = parse_sweep(sweep)
    scenarios = sweep_scenarios(s, variable, values)
    points = values if variable else [None]
    workers = max(1, min(workers or SWEEP_WORKERS, len(scenarios)))
    logger.info(f"비교 시작: {len(scenarios)}개 지점, 워커 {workers}개")

    jobs = [(sc, variable, value, _point_dir(out_dir, i, variable, value)) for i, (sc, value) in enumerate(zip(scenarios, points))]
    outcomes: List[Tuple[List[ComparisonRow], Optional[np.ndarray]]] = [([], None) for _ in jobs]
    if workers == 1:
        for i, job in enumerate(jobs):
            outcomes[i] = _solve_point(*job)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(_solve_point, *job): i for i, job in enumerate(jobs)}
            for future in concurrent.futures.as_completed(futures):
                outcomes[futures[future]] = future.result()
    results = [rows for rows, _ in outcomes]
    trajectories = [trajectory for _, trajectory in outcomes]

    if warm_start and variable in WARM_START_VARIABLES and len(jobs) > 1:
        replaced = _warm_start_sweep(jobs, results, trajectories)
        logger.info(f"이웃 궤적 재시작으로 {replaced}개 지점 개선")
    return [row for point_rows in results for row in point_rows]
