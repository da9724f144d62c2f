import math
import logging
from typing import Dict, Any

from app.config import LOG_LEVEL, TOLERANCES
from app.nodes.colored_log_handler import ColoredLogHandler
from app.types.errors import ScenarioValidationError
from app.types.scenario import Scenario
from app.types.solution import SolveTrace, Trajectory
from app.utils.geo import straight_line

logging.basicConfig(level=LOG_LEVEL, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)


def initialize_context(state: Dict[str, Any]) -> Dict[str, Any]:
    """BCD 상태 초기화 노드

    초기 궤적이 없으면 직선 비행을 쓰고, 끝점/속도 제약을 검사한다.
    """
    s: Scenario = state["scenario"]
    Q0 = state.get("initial_trajectory")
    if Q0 is None:
        Q0 = Trajectory(points=straight_line(s.mission.q_start, s.mission.q_end, s.num_slots))
    if Q0.num_slots != s.num_slots:
        raise ScenarioValidationError("trajectory_length", f"initial trajectory has {Q0.num_slots} points, M = {s.num_slots}")
    problems = Q0.violations(s.mission.q_start, s.mission.q_end, s.d_max, TOLERANCES["speed"])
    if problems:
        raise ScenarioValidationError("initial_trajectory", "; ".join(problems))

    kappa = state.get("kappa")
    state["kappa"] = s.tol_kappa if kappa is None else float(kappa)
    state["max_outer"] = state.get("max_outer") or s.solver.max_outer
    state["max_sca"] = state.get("max_sca") or s.solver.max_sca
    state["initial_trajectory"] = Q0
    state["trajectory"] = Q0
    state["schedule"] = None
    state["theta"] = None
    state["iteration"] = 0
    state["converged"] = False
    state["trace"] = SolveTrace()

    kappa_text = "∞" if math.isinf(state["kappa"]) else f"{state['kappa']:.1e}"
    logger.info(
        f"초기화: K={s.num_sensors}, M={s.num_slots}, D_max={s.d_max:.6g} m, κ={kappa_text}, "
        f"최대 외부 반복 {state['max_outer']}회"
    )
    return state
