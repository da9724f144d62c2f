from langgraph.graph import StateGraph, END
from typing import Dict, Any, Optional, Tuple
import logging

from app.config import LOG_LEVEL
from app.nodes.colored_log_handler import ColoredLogHandler
from app.nodes.context_node import initialize_context
from app.nodes.schedule_node import solve_schedule
from app.nodes.trajectory_node import optimize_trajectory
from app.nodes.rounding_node import allocate_blocks
from app.nodes.evaluator_node import assess_solution
from app.types.scenario import Scenario
from app.types.solution import Schedule, Solution, SolveTrace, Trajectory

logging.basicConfig(level=LOG_LEVEL, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)


def route_after_schedule(state: Dict[str, Any]) -> str:
    """θ 감소율이 κ 미만이거나 반복 상한이면 라운딩으로, 아니면 궤적 최적화로"""
    if state["converged"] or state.get("hit_cap"):
        return "round_schedule"
    return "optimize_trajectory"


def create_solver_graph():
    """BCD (스케줄 LP ⇄ 궤적 SCA) 파이프라인 그래프"""

    workflow = StateGraph(Dict[str, Any])

    workflow.add_node("initialize_context", initialize_context)
    workflow.add_node("solve_schedule", solve_schedule)
    workflow.add_node("optimize_trajectory", optimize_trajectory)
    workflow.add_node("round_schedule", allocate_blocks)
    workflow.add_node("evaluate_solution", assess_solution)

    workflow.set_entry_point("initialize_context")

    workflow.add_edge("initialize_context", "solve_schedule")
    workflow.add_conditional_edges(
        "solve_schedule",
        route_after_schedule,
        {
            "optimize_trajectory": "optimize_trajectory",
            "round_schedule": "round_schedule",
        },
    )
    workflow.add_edge("optimize_trajectory", "solve_schedule")
    workflow.add_edge("round_schedule", "evaluate_solution")
    workflow.add_edge("evaluate_solution", END)

    return workflow.compile()


solver_graph = create_solver_graph()


def run_pipeline(
    s: Scenario,
    Q0: Optional[Trajectory] = None,
    kappa: Optional[float] = None,
    max_outer: Optional[int] = None,
    max_sca: Optional[int] = None,
    lp_dump_dir: Optional[str] = None,
    sca_dump_dir: Optional[str] = None,
) -> Solution:
    """시나리오 하나에 대해 전체 파이프라인 실행"""
    state: Dict[str, Any] = {
        "scenario": s,
        "initial_trajectory": Q0,
        "kappa": kappa,
        "max_outer": max_outer,
        "max_sca": max_sca,
        "lp_dump_dir": lp_dump_dir,
        "sca_dump_dir": sca_dump_dir,
    }
    outer_cap = max_outer or s.solver.max_outer
    # 외부 반복당 노드 2개 + 초기화/라운딩/평가
    final = solver_graph.invoke(state, config={"recursion_limit": 2 * outer_cap + 10})

    trace: SolveTrace = final["trace"]
    trace.outer_iterations = len(trace.theta)
    trace.converged = bool(final["converged"])
    trace.hit_cap = bool(final.get("hit_cap"))
    return Solution(
        schedule=final["schedule"],
        trajectory=final["trajectory"],
        theta=final["theta"],
        trace=trace,
        blocks=final["blocks"],
        rates=final["rates"],
        evaluation=final["evaluation"],
        block_evaluation=final["block_evaluation"],
    )


def optimize(
    s: Scenario, Q0: Optional[Trajectory] = None, kappa: Optional[float] = None, **kwargs
) -> Tuple[Schedule, Trajectory, float, SolveTrace]:
    """BCD 로 (X, Q, θ, trace) 계산"""
    solution = run_pipeline(s, Q0, kappa=kappa, **kwargs)
    return solution.schedule, solution.trajectory, solution.theta, solution.trace
