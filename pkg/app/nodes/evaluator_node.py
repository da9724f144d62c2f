"""
해 평가 노드 - 센서별 에너지, 명목 처리량, 요구량 충족 비율
"""

import time
import logging
from typing import Dict, Any, List, Union

import numpy as np

from app.config import LOG_LEVEL, TOLERANCES
from app.nodes.colored_log_handler import ColoredLogHandler
from app.types.scenario import Scenario
from app.types.solution import BlockAllocation, Schedule, SensorEvaluation, Trajectory
from app.utils.channel import rate_matrix

logging.basicConfig(level=LOG_LEVEL, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)


def evaluate_solution(s: Scenario, plan: Union[Schedule, BlockAllocation], Q: Trajectory) -> List[SensorEvaluation]:
    """energy_k = Σ_m x_k[m]·E_k, throughput_k = Σ_m x_k[m]·R_k[m], ratio_k = throughput_k / r_k

    BlockAllocation 이 주어지면 x 대신 N/L 을 쓴다.
    """
    fractions = plan.fractions if isinstance(plan, BlockAllocation) else plan.x
    rates = rate_matrix(s, Q.points)
    energy = fractions.sum(axis=1) * s.energies
    throughput = np.sum(fractions * rates, axis=1)
    ratio = throughput / s.demands
    return [
        SensorEvaluation(sensor=k, energy_j=float(energy[k]), throughput=float(throughput[k]), ratio=float(ratio[k]))
        for k in range(s.num_sensors)
    ]


def assess_solution(state: Dict[str, Any]) -> Dict[str, Any]:
    s = state["scenario"]
    Q = state["trajectory"]
    started = time.perf_counter()
    relaxed = evaluate_solution(s, state["schedule"], Q)
    rounded = evaluate_solution(s, state["blocks"], Q)
    state["evaluation"] = relaxed
    state["block_evaluation"] = rounded
    state["trace"].add_time("evaluation", time.perf_counter() - started)

    worst = min(item.ratio for item in relaxed)
    worst_rounded = min(item.ratio for item in rounded)
    if worst < 1.0 - TOLERANCES["eta_feasible"]:
        logger.warning(f"완화 해의 최소 충족 비율 {worst!r} < 1")
    if worst_rounded < 1.0 - TOLERANCES["rounding_ratio"]:
        logger.warning(f"라운딩 후 최소 충족 비율 {worst_rounded!r} - 손실이 큼")
    logger.info(
        f"평가 완료: θ = {max(item.energy_j for item in relaxed):.9g} J, "
        f"최소 충족 비율 {worst:.6f} (라운딩 후 {worst_rounded:.6f})"
    )
    return state
