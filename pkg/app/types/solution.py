# Solution / trace types
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


class Trajectory(BaseModel):
    """UAV 수평 위치 시퀀스 q[1..M] (미터)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: np.ndarray

    @field_validator("points", mode="before")
    @classmethod
    def _as_points(cls, value) -> np.ndarray:
        array = np.asarray(value, dtype=float)
        if array.ndim != 2 or array.shape[1] != 2 or array.shape[0] < 2:
            raise ValueError(f"trajectory must be an (M>=2, 2) array, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("trajectory contains non-finite coordinates")
        return _readonly(array)

    @property
    def num_slots(self) -> int:
        return self.points.shape[0]

    def step_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    def violations(self, q_start, q_end, d_max: float, tol: float = 1e-6, check_endpoints: bool = True) -> List[str]:
        """끝점/속도 제약 위반 목록 (빈 리스트면 실행 가능)"""
        problems = []
        if check_endpoints:
            if not np.array_equal(self.points[0], np.asarray(q_start, dtype=float)):
                problems.append(f"q[1] = {self.points[0].tolist()} != q_0 = {list(q_start)}")
            if not np.array_equal(self.points[-1], np.asarray(q_end, dtype=float)):
                problems.append(f"q[M] = {self.points[-1].tolist()} != q_F = {list(q_end)}")
        steps = self.step_lengths()
        worst = int(np.argmax(steps)) if steps.size else 0
        if steps.size and steps[worst] > d_max + tol:
            problems.append(f"step {worst + 2} moves {steps[worst]:.9g} m > D_max = {d_max:.9g} m")
        return problems


class Schedule(BaseModel):
    """완화된 웨이크업 스케줄 x_k[m] (K x M)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x: np.ndarray

    @field_validator("x", mode="before")
    @classmethod
    def _as_fractions(cls, value) -> np.ndarray:
        array = np.asarray(value, dtype=float)
        if array.ndim != 2:
            raise ValueError(f"schedule must be a K x M matrix, got shape {array.shape}")
        if np.any(array < -1e-9) or np.any(array > 1 + 1e-9):
            raise ValueError("wake fractions must lie in [0, 1]")
        array = np.clip(array, 0.0, 1.0)
        column = array.sum(axis=0)
        if np.any(column > 1 + 1e-9):
            slot = int(np.argmax(column))
            raise ValueError(f"slot {slot + 1} schedules {column[slot]!r} > 1 sensors")
        return _readonly(array)

    @classmethod
    def zeros(cls, num_sensors: int, num_slots: int) -> "Schedule":
        return cls(x=np.zeros((num_sensors, num_slots)))

    @property
    def shape(self):
        return self.x.shape


class BlockAllocation(BaseModel):
    """정수 페이딩 블록 배분 N_k[m]"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    counts: np.ndarray
    blocks_per_slot: int = Field(ge=1)
    fraction_loss: np.ndarray  # Σ_m (x_k[m] - N_k[m]/L)
    throughput_loss: Optional[np.ndarray] = None  # Σ_m (x - N/L)·R / r_k
    collisions: int = 0
    top_up_blocks: int = 0  # 요구량 보충으로 추가된 블록 수

    @model_validator(mode="after")
    def _check_counts(self) -> "BlockAllocation":
        counts = self.counts
        if counts.ndim != 2 or np.any(counts < 0) or np.any(counts > self.blocks_per_slot):
            raise ValueError("block counts must be a K x M matrix with 0 <= N <= L")
        if np.any(counts.sum(axis=0) > self.blocks_per_slot):
            raise ValueError("a slot allocates more than L blocks")
        return self

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / float(self.blocks_per_slot)


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


class LpSolution(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    status: LpStatus
    schedule: Optional[Schedule] = None
    theta: Optional[float] = None
    certificate: float = float("inf")  # 상대 쌍대 간극 + 쌍대 불가능도
    primal_residual: float = float("inf")
    duals: Optional[np.ndarray] = None
    iterations: int = 0
    infeasible_sensors: List[int] = Field(default_factory=list)

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


class BoundCoeffs(BaseModel):
    """테일러 하한 계수 A, I, J (스칼라 또는 K x M 배열)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    A: np.ndarray
    I: np.ndarray
    J: np.ndarray


class P4Status(str, Enum):
    OPTIMAL = "optimal"
    # 솔버 정확도 수준에서 개선 없음 - 확장점 유지
    STALLED = "stalled"
    # 개선된 해지만 KKT 잔차가 허용오차 초과
    INEXACT = "inexact"
    # 솔버가 해를 내지 못함
    FALLBACK = "fallback"
    TRIVIAL = "trivial"


class P4Result(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    trajectory: Trajectory
    eta_lb: float
    eta_at_expansion: float
    status: P4Status
    solver: Optional[str] = None
    kkt_residual: Optional[float] = None
    detail: str = ""


class ScaTrace(BaseModel):
    eta: List[float] = Field(default_factory=list)
    eta_exact: List[float] = Field(default_factory=list)
    statuses: List[P4Status] = Field(default_factory=list)
    kkt_residuals: List[Optional[float]] = Field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    hit_cap: bool = False
    failed: bool = False

    def to_dict(self) -> Dict:
        return {
            "eta": self.eta,
            "eta_exact": self.eta_exact,
            "statuses": [status.value for status in self.statuses],
            "kkt_residuals": self.kkt_residuals,
            "iterations": self.iterations,
            "converged": self.converged,
            "hit_cap": self.hit_cap,
            "failed": self.failed,
        }


class SolveTrace(BaseModel):
    theta: List[float] = Field(default_factory=list)
    eta: List[float] = Field(default_factory=list)  # η(X^r, Q^{r+1})
    lp_iterations: List[int] = Field(default_factory=list)
    sca: List[ScaTrace] = Field(default_factory=list)
    stage_times: Dict[str, List[float]] = Field(default_factory=dict)
    kept_previous_schedule: List[int] = Field(default_factory=list)
    outer_iterations: int = 0
    converged: bool = False
    hit_cap: bool = False

    def add_time(self, stage: str, seconds: float) -> None:
        self.stage_times.setdefault(stage, []).append(seconds)

    def to_dict(self, include_times: bool = True) -> Dict:
        data = {
            "theta": self.theta,
            "eta": self.eta,
            "lp_iterations": self.lp_iterations,
            "sca": [trace.to_dict() for trace in self.sca],
            "kept_previous_schedule": self.kept_previous_schedule,
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
            "hit_cap": self.hit_cap,
        }
        if include_times:
            data["stage_times"] = self.stage_times
        return data


class SensorEvaluation(BaseModel):
    sensor: int
    energy_j: float
    throughput: float  # bps/Hz·slot
    ratio: float


class Solution(BaseModel):
    """파이프라인 최종 결과"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    schedule: Schedule
    trajectory: Trajectory
    theta: float
    trace: SolveTrace
    blocks: BlockAllocation
    rates: np.ndarray  # 최종 궤적에서의 R_k[m]
    evaluation: List[SensorEvaluation]
    block_evaluation: List[SensorEvaluation]

    @property
    def eta(self) -> float:
        return min(item.ratio for item in self.evaluation)
