from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.config import SUMMARY_SCHEMA_VERSION


class ComparisonRow(BaseModel):
    """비교/스윕 표의 한 행 (스윕 지점 x 기법)"""
    sweep_variable: str
    value: Optional[float] = None
    scheme: str
    theta: Optional[float] = None
    feasible: bool
    iterations: int = 0
    wall_time: float = 0.0
    gain_ratio: Optional[float] = None  # θ_scheme / θ_optimized
    detail: str = ""


class SensorCollection(BaseModel):
    """센서 하나에 대한 몬테카를로 수집 결과"""
    sensor: int
    nominal_bits: float
    delivered_bits: float
    n_blocks: int
    failed_blocks: int
    empirical_outage: float
    slot_blocks: Dict[int, int] = Field(default_factory=dict)  # 슬롯 -> 시도 블록 수
    slot_failures: Dict[int, int] = Field(default_factory=dict)  # 슬롯 -> 실패 블록 수


class CollectionResult(BaseModel):
    seed: int
    n_reps: int
    outage_eps: float
    data_bits: List[float]
    demand_ratio: List[float]  # 라운딩된 스케줄의 요구량 충족 비율
    sensors: List[SensorCollection]


class SensorVerification(BaseModel):
    sensor: int
    nominal_bits: float
    delivered_bits: float
    expected_delivered_bits: float  # (1 - ε)·nominal
    empirical_outage: float
    n_blocks: int
    ci_low: float
    ci_high: float
    outage_limit: float
    delivered_floor: float
    demand_ratio: float
    passed: bool = Field(serialization_alias="pass")
    reasons: List[str] = Field(default_factory=list)
    worst_slots: List[Dict[str, Any]] = Field(default_factory=list)


class VerifyReport(BaseModel):
    schema_version: str = SUMMARY_SCHEMA_VERSION
    seed: int
    n_reps: int
    outage_eps: float
    passed: bool = Field(serialization_alias="pass")
    sensors: List[SensorVerification]

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=True)

    @property
    def failed_sensors(self) -> List[int]:
        return [item.sensor for item in self.sensors if not item.passed]
