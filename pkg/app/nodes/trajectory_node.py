"""
궤적 최적화 노드 (SCA)
고정 스케줄 X 에서 가중 최소 처리량 η 를 최대화하는 궤적을 구한다.

- bound_coeffs / eval_rate_lb: 전송률의 1차 테일러 하한 (확장점에서 tight)
- solve_p4: 하한 기반 볼록 QCQP 한 번 풀이 (cvxpy)
- sca_optimize: 확장점을 갱신하며 P4 반복
"""

import math
import time
import logging
from pathlib import Path
from typing import Dict, Any, List, Optional, Tuple

import cvxpy as cp
import numpy as np

from app.config import LOG_LEVEL, P4_SOLVER_OPTIONS, P4_SOLVERS, TOLERANCES
from app.nodes.colored_log_handler import ColoredLogHandler
from app.types.scenario import ChannelParams, Scenario
from app.types.solution import BoundCoeffs, P4Result, P4Status, ScaTrace, Schedule, Trajectory
from app.utils.channel import LN2, outage_quantile, rate_matrix

logging.basicConfig(level=LOG_LEVEL, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)

# 속도 제약을 약간 조여 솔버 오차로 D_max 를 넘지 않게 함
_SPEED_MARGIN = 1e-6


def bound_coeffs(q_l, w, P_k, p: ChannelParams, H: float) -> BoundCoeffs:
    """확장점 q_l 에서의 테일러 하한 계수 A, I, J (브로드캐스팅 지원)"""
    diff = np.asarray(q_l, dtype=float) - np.asarray(w, dtype=float)
    J = H * H + np.sum(diff * diff, axis=-1)
    signal = outage_quantile(p) * np.asarray(P_k, dtype=float) * p.beta0
    noise = p.noise_power * p.snr_gap
    path = J ** (p.path_loss_exp / 2.0)
    A = np.log1p(signal / (noise * path)) / LN2
    I = signal * (p.path_loss_exp / 2.0) / LN2 / (J * (noise * path + signal))
    return BoundCoeffs(A=np.asarray(A, dtype=float), I=np.asarray(I, dtype=float), J=np.asarray(J, dtype=float))


def eval_rate_lb(q, q_l, w, coeffs: BoundCoeffs):
    """R^lb = A - I·||q - w||^2 + I·||q_l - w||^2"""
    w = np.asarray(w, dtype=float)
    d_new = np.asarray(q, dtype=float) - w
    d_old = np.asarray(q_l, dtype=float) - w
    value = coeffs.A - coeffs.I * np.sum(d_new * d_new, axis=-1) + coeffs.I * np.sum(d_old * d_old, axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def _coeff_matrix(s: Scenario, Q_l: Trajectory) -> BoundCoeffs:
    # K x M
    return bound_coeffs(
        Q_l.points[None, :, :], s.positions[:, None, :], s.powers[:, None], s.channel, s.mission.altitude
    )


def eval_eta(s: Scenario, X: Schedule, Q: Trajectory) -> float:
    """η = min_k (1/r_k) Σ_m x_k[m] R_k[m] (정확한 전송률)"""
    rates = rate_matrix(s, Q.points)
    return float(np.min(np.sum(X.x * rates, axis=1) / s.demands))


def eval_eta_lb(s: Scenario, X: Schedule, Q: Trajectory, Q_l: Trajectory, coeffs: Optional[BoundCoeffs] = None) -> float:
    """확장점 Q_l 기준 하한으로 계산한 η^lb"""
    if coeffs is None:
        coeffs = _coeff_matrix(s, Q_l)
    lower = eval_rate_lb(Q.points[None, :, :], Q_l.points[None, :, :], s.positions[:, None, :], coeffs)
    return float(np.min(np.sum(X.x * lower, axis=1) / s.demands))


class _P4Problem:
    """고정 X 에 대한 (P4) - 확장점이 바뀌면 파라미터만 갱신 (DPP)

    위치는 고도 H 로 나눈 무차원 좌표로 푼다.
    """

    def __init__(self, s: Scenario, X: Schedule):
        self.s = s
        self.X = X
        K, M = X.shape
        H = s.mission.altitude
        self.scale = H
        self.anchors = s.positions / H
        self.Q = cp.Variable((M, 2), name="q")
        self.eta = cp.Variable(name="eta")
        self.C = [cp.Parameter(M, nonneg=True, name=f"C_{k}") for k in range(K)]
        self.b = [cp.Parameter(name=f"b_{k}") for k in range(K)]

        self.rate_cons = []
        for k in range(K):
            dist_sq = cp.sum(cp.square(self.Q - self.anchors[k][None, :]), axis=1)
            self.rate_cons.append(cp.sum(cp.multiply(self.C[k], dist_sq)) <= self.b[k] - self.eta)
        d_lim = s.d_max * (1.0 - _SPEED_MARGIN) / H
        self.speed_con = cp.norm(self.Q[1:] - self.Q[:-1], 2, axis=1) <= d_lim
        q0 = np.asarray(s.mission.q_start) / H
        qF = np.asarray(s.mission.q_end) / H
        constraints = self.rate_cons + [self.speed_con, self.Q[0] == q0, self.Q[M - 1] == qF]
        self.problem = cp.Problem(cp.Maximize(self.eta), constraints)

    def update(self, coeffs: BoundCoeffs, Q_l: Trajectory) -> None:
        x = self.X.x
        r = self.s.demands
        diff = Q_l.points[None, :, :] - self.s.positions[:, None, :]
        old_sq = np.sum(diff * diff, axis=-1)
        for k in range(len(self.C)):
            self.C[k].value = x[k] * coeffs.I[k] * self.scale ** 2 / r[k]
            self.b[k].value = float(np.sum(x[k] * (coeffs.A[k] + coeffs.I[k] * old_sq[k])) / r[k])

    def solve(self) -> Tuple[Optional[np.ndarray], Optional[str], str, Optional[float]]:
        """설치된 솔버를 순서대로 시도 - KKT 잔차가 허용오차 이내인 첫 해를 반환

        어떤 솔버도 허용오차를 맞추지 못하면 잔차가 가장 작은 해를 돌려준다.
        """
        installed = set(cp.installed_solvers())
        detail = "no preferred solver installed"
        best: Optional[Tuple[np.ndarray, str, float]] = None
        for name in P4_SOLVERS:
            if name not in installed:
                continue
            try:
                self.problem.solve(solver=name, **P4_SOLVER_OPTIONS.get(name, {}))
            except cp.error.SolverError as exc:
                detail = f"{name}: {exc}"
                logger.debug(f"P4 솔버 {name} 실패: {exc}")
                continue
            if self.problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or self.Q.value is None:
                detail = f"{name}: status {self.problem.status}"
                continue
            kkt = self.kkt_residual()
            if best is None or kkt < best[2]:
                best = (self.Q.value * self.scale, name, kkt)
            if kkt <= TOLERANCES["kkt"]:
                break
            detail = f"{name}: KKT residual {kkt:.2e}"
            logger.debug(f"P4 솔버 {name}: KKT 잔차 {kkt:.2e} > {TOLERANCES['kkt']:.0e} - 다음 솔버 시도")
        if best is None:
            return None, None, detail, None
        points, name, kkt = best
        return points, name, detail, kkt

    def kkt_residual(self) -> float:
        """스케일된 좌표에서 정상성 + 상보성 잔차"""
        lam = np.array([float(con.dual_value) for con in self.rate_cons])
        mu = np.atleast_1d(np.asarray(self.speed_con.dual_value, dtype=float))
        Q = self.Q.value
        eta = float(self.eta.value)

        residual = abs(1.0 - lam.sum())
        # 상보성: λ_k·(b_k - η - f_k(Q))
        slack = np.array(
            [
                float(self.b[k].value - eta - np.sum(self.C[k].value * np.sum((Q - self.anchors[k]) ** 2, axis=1)))
                for k in range(len(self.C))
            ]
        )
        residual = max(residual, float(np.max(np.abs(lam * slack))))

        steps = Q[1:] - Q[:-1]
        lengths = np.linalg.norm(steps, axis=1)
        units = np.zeros_like(steps)
        active = lengths > 1e-12
        units[active] = steps[active] / lengths[active, None]
        grad = np.zeros_like(Q)
        for k in range(len(self.C)):
            grad -= 2.0 * lam[k] * self.C[k].value[:, None] * (Q - self.anchors[k])
        grad[1:] -= mu[:, None] * units
        grad[:-1] += mu[:, None] * units
        interior = grad[1:-1]
        if interior.size:
            magnitude = 1.0 + float(np.max(np.abs(lam))) + float(np.max(np.abs(mu), initial=0.0))
            residual = max(residual, float(np.max(np.linalg.norm(interior, axis=1))) / magnitude)
        return residual


def _speed_excess(s: Scenario, points: np.ndarray) -> float:
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return float(np.max(steps - s.d_max, initial=0.0))


def _fallback(Q_l: Trajectory, eta_old: float, status: P4Status, detail: str, solver=None, kkt=None) -> P4Result:
    return P4Result(
        trajectory=Q_l,
        eta_lb=eta_old,
        eta_at_expansion=eta_old,
        status=status,
        solver=solver,
        kkt_residual=kkt,
        detail=detail,
    )


def solve_p4(s: Scenario, X: Schedule, Q_l: Trajectory, problem: Optional[_P4Problem] = None) -> P4Result:
    """확장점 Q_l 에서 (P4) 를 풀어 η^lb 를 최대화하는 궤적 반환

    솔버가 실패하면 FALLBACK, 해가 Q_l 보다 나쁘거나 속도 제약을 넘으면 STALLED 로
    Q_l 을 그대로 돌려준다. KKT 잔차가 허용오차를 넘는 개선 해는 INEXACT.
    """
    coeffs = _coeff_matrix(s, Q_l)
    eta_old = eval_eta_lb(s, X, Q_l, Q_l, coeffs)
    if not np.any(X.x) or np.any(X.x.sum(axis=1) <= 0.0):
        # 어떤 센서의 행이 0 이면 η^lb ≡ 0 - 모든 궤적이 최적
        return _fallback(Q_l, eta_old, P4Status.TRIVIAL, "schedule leaves a sensor without wake slots")

    if problem is None:
        problem = _P4Problem(s, X)
    problem.update(coeffs, Q_l)
    points, solver, detail, kkt = problem.solve()
    if points is None:
        logger.warning(f"P4 풀이 실패 ({detail}) - 이전 궤적 유지")
        return _fallback(Q_l, eta_old, P4Status.FALLBACK, detail)

    points = np.array(points, dtype=float)
    points[0] = s.mission.q_start
    points[-1] = s.mission.q_end

    excess = _speed_excess(s, points)
    if excess > TOLERANCES["speed"]:
        logger.warning(f"P4 해가 속도 제약을 {excess:.2e} m 초과 - 이전 궤적 유지")
        return _fallback(Q_l, eta_old, P4Status.STALLED, f"speed violation {excess!r} m", solver, kkt)

    candidate = Trajectory(points=points)
    eta_new = eval_eta_lb(s, X, candidate, Q_l, coeffs)
    if eta_new < eta_old - TOLERANCES["monotone"] * max(1.0, abs(eta_old)):
        logger.debug(f"P4 목적값이 확장점보다 낮음 ({eta_old!r} -> {eta_new!r}) - 이전 궤적 유지")
        return _fallback(Q_l, eta_old, P4Status.STALLED, "objective below expansion point", solver, kkt)

    status = P4Status.OPTIMAL
    if kkt > TOLERANCES["kkt"]:
        logger.warning(f"P4 KKT 잔차 {kkt:.2e} > {TOLERANCES['kkt']:.0e} ({solver}) - 개선 해는 유지")
        status = P4Status.INEXACT
    return P4Result(
        trajectory=candidate,
        eta_lb=eta_new,
        eta_at_expansion=eta_old,
        status=status,
        solver=solver,
        kkt_residual=kkt,
        detail="" if status == P4Status.OPTIMAL else detail,
    )


def _dump_iterate(dump_dir: Optional[str], tag: str, l: int, Q: Trajectory) -> None:
    if not dump_dir:
        return
    from app.utils.bundle import write_trajectory_csv

    write_trajectory_csv(Q, Path(dump_dir) / f"sca_{tag}_l{l:03d}.csv")


def sca_optimize(
    s: Scenario,
    X: Schedule,
    Q0: Trajectory,
    kappa: float,
    max_iter: Optional[int] = None,
    dump_dir: Optional[str] = None,
    tag: str = "run",
) -> Tuple[Trajectory, ScaTrace]:
    """(P4) 를 반복해 궤적을 개선 - η^lb 의 증가율이 κ 미만이면 종료"""
    max_iter = max_iter or s.solver.max_sca
    trace = ScaTrace()
    Q_l = Q0
    previous = eval_eta(s, X, Q0)
    problem: Optional[_P4Problem] = None
    _dump_iterate(dump_dir, tag, 0, Q0)

    for l in range(1, max_iter + 1):
        if problem is None and np.all(X.x.sum(axis=1) > 0.0):
            problem = _P4Problem(s, X)
        result = solve_p4(s, X, Q_l, problem)
        exact = eval_eta(s, X, result.trajectory)
        trace.eta.append(result.eta_lb)
        trace.eta_exact.append(exact)
        trace.statuses.append(result.status)
        trace.kkt_residuals.append(result.kkt_residual)
        trace.iterations = l
        logger.debug(f"SCA l={l}: η^lb = {result.eta_lb:.12g}, η = {exact:.12g} ({result.status.value})")
        Q_l = result.trajectory
        _dump_iterate(dump_dir, tag, l, Q_l)

        if result.status == P4Status.FALLBACK:
            trace.failed = True
            logger.warning(f"SCA l={l}: P4 솔버 실패로 중단 ({result.detail})")
            break
        if result.status in (P4Status.STALLED, P4Status.TRIVIAL):
            # 확장점 유지 - 증가율 0 으로 보고 κ 규칙에 맡김
            gain = 0.0
        else:
            gain = (result.eta_lb - previous) / abs(previous) if previous != 0 else math.inf
            previous = result.eta_lb
        if gain < kappa:
            trace.converged = True
            break
    else:
        trace.hit_cap = True
        logger.warning(f"SCA 반복 상한 {max_iter}회 도달 - 수렴 전 종료")
    return Q_l, trace


def optimize_trajectory(state: Dict[str, Any]) -> Dict[str, Any]:
    """BCD 단계: X^r 를 고정하고 SCA 로 Q^{r+1} 계산"""
    s: Scenario = state["scenario"]
    X: Schedule = state["schedule"]
    trace = state["trace"]
    r = state["iteration"]
    started = time.perf_counter()

    Q_new, sca_trace = sca_optimize(
        s,
        X,
        state["trajectory"],
        state["kappa"],
        max_iter=state.get("max_sca"),
        dump_dir=state.get("sca_dump_dir"),
        tag=f"r{r:03d}",
    )
    eta = eval_eta(s, X, Q_new)
    trace.sca.append(sca_trace)
    trace.eta.append(eta)
    trace.add_time("trajectory_sca", time.perf_counter() - started)
    if eta < 1.0 - TOLERANCES["eta_feasible"]:
        logger.warning(f"r={r}: η(X^r, Q^(r+1)) = {eta!r} < 1 - 데이터 요구량 미충족 위험")

    kept = sum(1 for status in sca_trace.statuses if status in (P4Status.STALLED, P4Status.FALLBACK))
    logger.info(f"r={r}: SCA {sca_trace.iterations}회, η = {eta:.9g}" + (f", 확장점 유지 {kept}회" if kept else ""))
    state["trajectory"] = Q_new
    state["iteration"] = r + 1
    return state
