"""
Dense revised simplex
min c^T x  s.t.  A x <= b,  x >= 0

2단계(phase 1/2) 방식, 행 평형화, Dantzig 가격 결정 + 퇴화 시 Bland 규칙.
동점은 항상 가장 작은 변수 인덱스 우선 (결과 재현성).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg as la

from app.config import LOG_LEVEL, SIMPLEX_SETTINGS, TOLERANCES
from app.nodes.colored_log_handler import ColoredLogHandler

logging.basicConfig(level=LOG_LEVEL, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)


class UnboundedError(Exception):
    "Raised when the objective decreases without bound"
    pass


@dataclass
class SimplexResult:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    duals: Optional[np.ndarray] = None  # A x <= b 의 라그랑주 승수 (<= 0)
    iterations: int = 0
    certificate: float = float("inf")
    primal_residual: float = float("inf")
    infeasible_rows: List[int] = field(default_factory=list)


class _Tableau:
    """표준형 [A | ±I | 인공변수] 와 기저 역행렬"""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        m, n = A.shape
        row_max = np.max(np.abs(A), axis=1) if n else np.zeros(m)
        self.row_scale = np.where(row_max > 0, 1.0 / np.where(row_max > 0, row_max, 1.0), 1.0)
        A_s = A * self.row_scale[:, None]
        b_s = b * self.row_scale
        self.sign = np.where(b_s < 0, -1.0, 1.0)
        flipped = np.flatnonzero(self.sign < 0)

        self.n = n
        self.m = m
        self.num_art = flipped.size
        total = n + m + self.num_art
        T = np.zeros((m, total), order="F")
        T[:, :n] = A_s * self.sign[:, None]
        T[np.arange(m), n + np.arange(m)] = self.sign
        self.art_rows = flipped
        self.art_cols = n + m + np.arange(self.num_art)
        T[flipped, self.art_cols] = 1.0
        self.T = T
        self.rhs = b_s * self.sign

        basis = n + np.arange(m)
        basis[flipped] = self.art_cols
        self.basis = basis
        self.Binv = np.eye(m)
        self.xB = self.rhs.copy()

    def refactor(self) -> None:
        B = self.T[:, self.basis]
        lu = la.lu_factor(B)
        self.Binv = la.lu_solve(lu, np.eye(self.m))
        self.xB = la.lu_solve(lu, self.rhs)
        self.xB[np.abs(self.xB) < 1e-15] = 0.0

    def pivot(self, row: int, col: int, u: np.ndarray, step: float) -> None:
        self.xB -= step * u
        self.xB[row] = step
        np.maximum(self.xB, 0.0, out=self.xB)
        pivot_row = self.Binv[row] / u[row]
        u_other = u.copy()
        u_other[row] = 0.0
        self.Binv -= np.outer(u_other, pivot_row)
        self.Binv[row] = pivot_row
        self.basis[row] = col


def _run(tab: _Tableau, cost: np.ndarray, allowed: np.ndarray, phase: str) -> tuple:
    settings = SIMPLEX_SETTINGS
    opt_tol = TOLERANCES["lp_optimality"]
    piv_tol = TOLERANCES["lp_pivot"]
    bland = False
    degenerate_run = 0
    for it in range(settings["max_iter"]):
        if it % settings["refactor_every"] == 0 and it > 0:
            tab.refactor()
        y = cost[tab.basis] @ tab.Binv
        reduced = cost - y @ tab.T
        reduced[tab.basis] = 0.0
        reduced[~allowed] = 0.0
        candidates = np.flatnonzero(reduced < -opt_tol)
        if candidates.size == 0:
            return "optimal", it
        if bland:
            col = int(candidates[0])
        else:
            col = int(candidates[np.argmin(reduced[candidates])])
        u = tab.Binv @ tab.T[:, col]
        positive = np.flatnonzero(u > piv_tol)
        if positive.size == 0:
            return "unbounded", it
        ratios = tab.xB[positive] / u[positive]
        best = ratios.min()
        ties = positive[ratios <= best + 1e-12 * (1.0 + best)]
        # 동점 행 중 기저 변수 인덱스가 가장 작은 행
        row = int(ties[np.argmin(tab.basis[ties])])
        step = tab.xB[row] / u[row]
        if step <= 1e-12:
            degenerate_run += 1
            if degenerate_run >= settings["degenerate_switch"] and not bland:
                logger.debug(f"{phase}: 퇴화 피벗 {degenerate_run}회 연속 - Bland 규칙으로 전환")
                bland = True
        else:
            degenerate_run = 0
            bland = False
        tab.pivot(row, col, u, step)
    return "iteration_limit", settings["max_iter"]


def _drive_out_artificials(tab: _Tableau) -> None:
    """phase 1 이후 기저에 남은 (값 0) 인공변수를 실제 변수로 교체"""
    structural = tab.n + tab.m
    for row in range(tab.m):
        if tab.basis[row] < structural:
            continue
        row_coeffs = tab.Binv[row] @ tab.T[:, :structural]
        row_coeffs[tab.basis[tab.basis < structural]] = 0.0
        candidates = np.flatnonzero(np.abs(row_coeffs) > 1e-9)
        if candidates.size == 0:
            # 중복 행 - 인공변수는 0 으로 고정된 채 남는다
            continue
        col = int(candidates[0])
        u = tab.Binv @ tab.T[:, col]
        tab.pivot(row, col, u, 0.0)


def revised_simplex(c: np.ndarray, A: np.ndarray, b: np.ndarray) -> SimplexResult:
    """min c^T x s.t. A x <= b, x >= 0"""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    tab = _Tableau(A, b)
    total = tab.T.shape[1]
    structural = tab.n + tab.m
    iterations = 0

    if tab.num_art:
        cost1 = np.zeros(total)
        cost1[tab.art_cols] = 1.0
        allowed = np.ones(total, dtype=bool)
        status, its = _run(tab, cost1, allowed, "phase1")
        iterations += its
        tab.refactor()
        if status != "optimal":
            return SimplexResult(status=status, iterations=iterations)
        art_values = np.zeros(total)
        art_values[tab.basis] = tab.xB
        residual = art_values[tab.art_cols]
        if residual.sum() > TOLERANCES["lp_feasibility"]:
            rows = tab.art_rows[residual > TOLERANCES["lp_feasibility"]].tolist()
            logger.debug(f"phase1 최적값 {residual.sum():.3e} > 0 - 실행 불가능 행 {rows}")
            return SimplexResult(status="infeasible", iterations=iterations, infeasible_rows=rows)
        _drive_out_artificials(tab)
        tab.refactor()

    cost2 = np.zeros(total)
    cost2[: tab.n] = c
    allowed = np.zeros(total, dtype=bool)
    allowed[:structural] = True
    status, its = _run(tab, cost2, allowed, "phase2")
    iterations += its
    if status != "optimal":
        return SimplexResult(status=status, iterations=iterations)

    tab.refactor()
    values = np.zeros(total)
    values[tab.basis] = np.maximum(tab.xB, 0.0)
    x = values[: tab.n]

    # 원래 (스케일 전) 행 기준 쌍대 변수와 최적성 인증
    y = cost2[tab.basis] @ tab.Binv
    duals = y * tab.sign * tab.row_scale
    primal = float(c @ x)
    dual = float(duals @ b)
    dual_infeas = max(0.0, float(np.max(A.T @ duals - c, initial=0.0)), float(np.max(duals, initial=0.0)))
    certificate = abs(primal - dual) / max(1.0, abs(primal)) + dual_infeas
    primal_residual = float(np.max(A @ x - b, initial=0.0))
    logger.debug(f"simplex 완료: {iterations}회 피벗, 목적값 {primal:.12g}, 인증 {certificate:.2e}")
    return SimplexResult(
        status="optimal",
        x=x,
        objective=primal,
        duals=duals,
        iterations=iterations,
        certificate=certificate,
        primal_residual=primal_residual,
    )
