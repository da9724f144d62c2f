"""
웨이크업 스케줄 LP (P2) 노드
고정 궤적에서 min-max 에너지 θ 와 분수 스케줄 X 를 구한다
"""

import math
import time
import logging
from pathlib import Path
from typing import Dict, Any, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.config import LOG_LEVEL, TOLERANCES
from app.nodes.colored_log_handler import ColoredLogHandler
from app.nodes.trajectory_node import eval_eta
from app.types.errors import InfeasibleScheduleError, SolverFailureError
from app.types.scenario import Scenario
from app.types.solution import LpSolution, LpStatus, Schedule, Trajectory
from app.utils.channel import rate_matrix
from app.utils.simplex import revised_simplex

logging.basicConfig(level=LOG_LEVEL, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)


class ScheduleLp(BaseModel):
    """(P2) 인스턴스: 변수 [x_{1,1..M}, ..., x_{K,1..M}, θ]

    행 순서: 에너지 (5) K개, 데이터 요구량 (6) K개, 슬롯 (7) M개.
    x <= 1 상한 (11) 은 슬롯 행과 x >= 0 에서 따라오므로 단순형 행에는 넣지 않는다.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    num_sensors: int
    num_slots: int
    rates: np.ndarray
    energies: np.ndarray
    demands: np.ndarray
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    upper: np.ndarray

    @property
    def num_variables(self) -> int:
        return self.c.size

    @property
    def num_structural(self) -> int:
        return self.A_ub.shape[0]

    def variable_name(self, index: int) -> str:
        if index == self.num_variables - 1:
            return "theta"
        k, m = divmod(index, self.num_slots)
        return f"x_{k + 1}_{m + 1}"

    def row_name(self, row: int) -> str:
        K = self.num_sensors
        if row < K:
            return f"energy_{row + 1}"
        if row < 2 * K:
            return f"demand_{row - K + 1}"
        return f"slot_{row - 2 * K + 1}"

    def demand_row(self, sensor: int) -> int:
        return self.num_sensors + sensor


def build_schedule_lp(s: Scenario, Q: Trajectory) -> ScheduleLp:
    """고정 궤적 Q 에서 (P2) 구성 - R_k[m] 은 상수로 미리 계산"""
    return schedule_lp_from_rates(rate_matrix(s, Q.points), s.energies, s.demands)


def schedule_lp_from_rates(rates, energies, demands) -> ScheduleLp:
    rates = np.asarray(rates, dtype=float)
    energies = np.asarray(energies, dtype=float)
    demands = np.asarray(demands, dtype=float)
    K, M = rates.shape
    n = K * M + 1
    A = np.zeros((2 * K + M, n))
    b = np.zeros(2 * K + M)
    for k in range(K):
        cols = slice(k * M, (k + 1) * M)
        A[k, cols] = energies[k]
        A[k, -1] = -1.0
        A[K + k, cols] = -rates[k]
        b[K + k] = -demands[k]
    for m in range(M):
        A[2 * K + m, m : K * M : M] = 1.0
        b[2 * K + m] = 1.0
    c = np.zeros(n)
    c[-1] = 1.0
    upper = np.ones(n)
    upper[-1] = np.inf
    return ScheduleLp(
        num_sensors=K,
        num_slots=M,
        rates=rates,
        energies=energies,
        demands=demands,
        c=c,
        A_ub=A,
        b_ub=b,
        upper=upper,
    )


def solve_lp(lp: ScheduleLp) -> LpSolution:
    """revised simplex 로 (P2) 풀이 - 실행 불가능하면 원인 센서 보고"""
    result = revised_simplex(lp.c, lp.A_ub, lp.b_ub)
    K, M = lp.num_sensors, lp.num_slots
    if result.status == "infeasible":
        sensors = sorted({row - K for row in result.infeasible_rows if K <= row < 2 * K})
        if not sensors:
            # 개별 행으로 특정되지 않으면 달성 가능한 최대 처리량이 부족한 센서를 보고
            best = lp.rates.max(axis=1) * M
            sensors = [k for k in range(K) if best[k] < lp.demands[k]] or list(range(K))
        logger.warning(f"(P2) 실행 불가능 - 데이터 요구량 미충족 센서: {[k + 1 for k in sensors]}")
        return LpSolution(status=LpStatus.INFEASIBLE, iterations=result.iterations, infeasible_sensors=sensors)
    if result.status != "optimal":
        raise SolverFailureError("revised simplex", f"status {result.status} after {result.iterations} pivots")

    x = np.clip(result.x[:-1].reshape(K, M), 0.0, 1.0)
    schedule = Schedule(x=x)
    theta = float(np.max(x.sum(axis=1) * lp.energies))
    if result.certificate > 1e-8:
        logger.warning(f"(P2) 최적성 인증값 {result.certificate:.2e} 가 허용치보다 큼")
    return LpSolution(
        status=LpStatus.OPTIMAL,
        schedule=schedule,
        theta=theta,
        certificate=result.certificate,
        primal_residual=result.primal_residual,
        duals=result.duals,
        iterations=result.iterations,
    )


def _lp_term(coef: float, name: str, first: bool) -> str:
    sign = "-" if coef < 0 else ("" if first else "+")
    return f"{sign} {abs(coef)!r} {name}".strip() if sign else f"{abs(coef)!r} {name}"


def write_lp(lp: ScheduleLp, path) -> Path:
    """CPLEX LP 텍스트 포맷으로 덤프 (외부 솔버 교차 검증용)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\\ wake-up schedule LP", "Minimize", " obj: theta", "Subject To"]
    senses = ["<="] * lp.num_sensors + [">="] * lp.num_sensors + ["<="] * lp.num_slots
    for row in range(lp.num_structural):
        coeffs = lp.A_ub[row]
        rhs = lp.b_ub[row]
        if senses[row] == ">=":
            coeffs, rhs = -coeffs, -rhs
        terms: List[str] = []
        for index in np.flatnonzero(coeffs):
            terms.append(_lp_term(float(coeffs[index]), lp.variable_name(int(index)), not terms))
        body = " ".join(terms) if terms else "0 theta"
        lines.append(f" {lp.row_name(row)}: {body} {senses[row]} {float(rhs)!r}")
    lines.append("Bounds")
    for index in range(lp.num_variables - 1):
        lines.append(f" 0 <= {lp.variable_name(index)} <= 1")
    lines.append(" theta >= 0")
    lines.append("End")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def solve_schedule(state: Dict[str, Any]) -> Dict[str, Any]:
    """BCD 단계: 현재 궤적 Q^r 에서 (P2) 를 풀어 X^r, θ^r 갱신"""
    s: Scenario = state["scenario"]
    Q: Trajectory = state["trajectory"]
    trace = state["trace"]
    r = state["iteration"]
    started = time.perf_counter()

    lp = build_schedule_lp(s, Q)
    dump_dir: Optional[str] = state.get("lp_dump_dir")
    if dump_dir:
        write_lp(lp, Path(dump_dir) / f"schedule_r{r:03d}.lp")
    solution = solve_lp(lp)

    prev_schedule: Optional[Schedule] = state.get("schedule")
    prev_theta: Optional[float] = state.get("theta")
    if not solution.is_optimal:
        if prev_schedule is None:
            raise InfeasibleScheduleError(solution.infeasible_sensors, "at the initial trajectory")
        # X^{r-1} 은 Q^r 에서도 실행 가능 (η >= 1) 이므로 유지
        logger.warning(f"r={r}: (P2) 실행 불가능 보고 - 이전 스케줄 유지")
        schedule, theta = prev_schedule, prev_theta
        trace.kept_previous_schedule.append(r)
    else:
        schedule, theta = solution.schedule, solution.theta
        if prev_theta is not None and theta > prev_theta * (1.0 + TOLERANCES["monotone"]):
            if eval_eta(s, prev_schedule, Q) >= 1.0 - TOLERANCES["monotone"]:
                logger.warning(f"r={r}: θ 가 수치적으로 증가 ({prev_theta!r} -> {theta!r}) - 이전 스케줄 유지")
                schedule, theta = prev_schedule, prev_theta
                trace.kept_previous_schedule.append(r)

    trace.theta.append(theta)
    trace.lp_iterations.append(solution.iterations)
    trace.add_time("schedule_lp", time.perf_counter() - started)

    kappa = state["kappa"]
    if prev_theta is None:
        decrease = math.inf
    else:
        decrease = (prev_theta - theta) / prev_theta if prev_theta > 0 else 0.0
    state["converged"] = math.isinf(kappa) or decrease < kappa
    state["hit_cap"] = not state["converged"] and r + 1 >= state["max_outer"]
    if state["hit_cap"]:
        logger.warning(f"외부 반복 상한 {state['max_outer']}회 도달 - 수렴 전 종료")
    state["schedule"] = schedule
    state["theta"] = theta
    state["lp_solution"] = solution
    logger.info(f"r={r}: θ = {theta:.9g} J (감소율 {decrease:.3e}, 피벗 {solution.iterations}회)")
    return state
