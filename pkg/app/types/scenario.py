# Scenario data model
import logging
import math
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_core import PydanticCustomError

from app.config import DEFAULT_BLOCKS_PER_SLOT, DEFAULT_KAPPA, MAX_OUTER_ITER, MAX_SCA_ITER, SPEED_ADVISORY_RATIO

logger = logging.getLogger(__name__)

Point = Tuple[float, float]


class FadingKind(str, Enum):
    RICIAN = "rician"
    RAYLEIGH = "rayleigh"
    DETERMINISTIC = "deterministic"


def _finite_point(value: Point) -> Point:
    if not all(math.isfinite(c) for c in value):
        raise PydanticCustomError("finite_position", "coordinates must be finite, got {value}", {"value": value})
    return (float(value[0]), float(value[1]))


class Sensor(BaseModel):
    """지상 센서 노드 u_k"""
    model_config = ConfigDict(frozen=True)

    position: Point
    data_bits: float = Field(gt=0)
    power_w: float = Field(gt=0)

    @field_validator("position")
    @classmethod
    def _check_position(cls, value: Point) -> Point:
        return _finite_point(value)


class Mission(BaseModel):
    """UAV 임무 파라미터 (고도, 속도, 시간축, 시작/종료점)"""
    model_config = ConfigDict(frozen=True)

    altitude: float = Field(gt=0)
    v_max: float = Field(gt=0)
    horizon: float = Field(gt=0)
    slot_len: float = Field(gt=0)
    q_start: Point
    q_end: Point
    blocks_per_slot: int = Field(default=DEFAULT_BLOCKS_PER_SLOT, ge=1)

    @field_validator("q_start", "q_end")
    @classmethod
    def _check_endpoint(cls, value: Point) -> Point:
        return _finite_point(value)

    @model_validator(mode="after")
    def _check_invariants(self) -> "Mission":
        num_slots = round(self.horizon / self.slot_len)
        if abs(self.horizon - num_slots * self.slot_len) > 1e-9 * self.horizon:
            raise PydanticCustomError(
                "slot_divisibility",
                "horizon T={T} is not an integer multiple of slot length {dt}",
                {"T": self.horizon, "dt": self.slot_len},
            )
        if num_slots < 2:
            raise PydanticCustomError("min_slots", "need at least 2 slots, got M={M}", {"M": num_slots})
        span = math.dist(self.q_start, self.q_end)
        reach = self.v_max * self.horizon
        if span > reach * (1.0 + 1e-12):
            raise PydanticCustomError(
                "endpoint_reachability",
                "||q_F - q_0|| = {span} m exceeds V_max*T = {reach} m",
                {"span": span, "reach": reach},
            )
        # M 개 점 사이의 이동은 M-1 번뿐
        discrete_reach = (num_slots - 1) * self.v_max * self.slot_len
        if span > discrete_reach * (1.0 + 1e-12):
            logger.warning(
                f"||q_F - q_0|| = {span:.6g} m > (M-1)·D_max = {discrete_reach:.6g} m - "
                f"슬롯 이산화에서는 실행 가능한 궤적이 없음"
            )
        if self.v_max * self.slot_len > SPEED_ADVISORY_RATIO * self.altitude:
            logger.warning(
                f"V_max*dt = {self.v_max * self.slot_len:.3g} m 가 고도 H = {self.altitude:.3g} m 에 비해 큼 "
                f"(슬롯 내 위치 고정 가정이 약해짐)"
            )
        return self

    @property
    def num_slots(self) -> int:
        return round(self.horizon / self.slot_len)

    @property
    def d_max(self) -> float:
        return self.slot_len * self.v_max


class ChannelParams(BaseModel):
    """링크 파라미터 - 모든 값은 선형 단위"""
    model_config = ConfigDict(frozen=True)

    beta0: float = Field(gt=0)
    noise_power: float = Field(gt=0)
    snr_gap: float = Field(ge=1)
    path_loss_exp: float = Field(default=2.0, ge=2)
    rician_k: float = Field(default=10.0, ge=0)
    outage_eps: float = Field(gt=0, lt=1)
    bandwidth: float = Field(gt=0)
    fading: FadingKind = FadingKind.RICIAN


class SolverSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_outer: int = Field(default=MAX_OUTER_ITER, ge=1)
    max_sca: int = Field(default=MAX_SCA_ITER, ge=1)
    seed: Optional[int] = None


class Scenario(BaseModel):
    """문제 인스턴스 전체 (센서, 임무, 채널, 허용오차)"""
    model_config = ConfigDict(frozen=True)

    sensors: List[Sensor] = Field(min_length=1)
    mission: Mission
    channel: ChannelParams
    tol_kappa: float = Field(default=DEFAULT_KAPPA, gt=0)
    solver: SolverSettings = SolverSettings()

    @property
    def num_sensors(self) -> int:
        return len(self.sensors)

    @property
    def num_slots(self) -> int:
        return self.mission.num_slots

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.sensors], dtype=float)

    @property
    def powers(self) -> np.ndarray:
        return np.array([s.power_w for s in self.sensors], dtype=float)

    @property
    def d_max(self) -> float:
        return self.mission.d_max

    @property
    def energies(self) -> np.ndarray:
        # E_k = δt·P_k
        return self.mission.slot_len * self.powers

    @property
    def demands(self) -> np.ndarray:
        # r_k = S_k / (B·δt)
        bits = np.array([s.data_bits for s in self.sensors], dtype=float)
        return bits / (self.channel.bandwidth * self.mission.slot_len)

    def with_overrides(
        self,
        data_bits: Optional[float] = None,
        outage_eps: Optional[float] = None,
        horizon: Optional[float] = None,
        kappa: Optional[float] = None,
        max_outer: Optional[int] = None,
        max_sca: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> "Scenario":
        """일부 파라미터를 바꾼 새 Scenario (검증 포함)"""
        raw = self.model_dump()
        if data_bits is not None:
            for sensor in raw["sensors"]:
                sensor["data_bits"] = data_bits
        if outage_eps is not None:
            raw["channel"]["outage_eps"] = outage_eps
        if horizon is not None:
            raw["mission"]["horizon"] = horizon
        if kappa is not None:
            raw["tol_kappa"] = kappa
        if max_outer is not None:
            raw["solver"]["max_outer"] = max_outer
        if max_sca is not None:
            raw["solver"]["max_sca"] = max_sca
        if seed is not None:
            raw["solver"]["seed"] = seed
        return Scenario.model_validate(raw)
