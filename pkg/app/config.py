import os
import logging
from typing import Dict, Any, List
from dotenv import load_dotenv

load_dotenv()


def _env_float(name: str, default: float) -> float:
    value = os.getenv(name)
    return float(value) if value not in (None, "") else default


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


# 로그 레벨 (CLI --log-level 이 우선)
LOG_LEVEL = getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO)

# 알고리즘 종료 조건
DEFAULT_KAPPA = _env_float("SOLVER_KAPPA", 1e-4)
MAX_OUTER_ITER = _env_int("MAX_OUTER_ITER", 50)
MAX_SCA_ITER = _env_int("MAX_SCA_ITER", 100)

# 슬롯당 페이딩 블록 수 (라운딩 예시 L=100)
DEFAULT_BLOCKS_PER_SLOT = _env_int("DEFAULT_BLOCKS_PER_SLOT", 100)

# V_max·δt ≪ H 권고 비율 (넘으면 경고만)
SPEED_ADVISORY_RATIO = _env_float("SPEED_ADVISORY_RATIO", 0.5)

# 스윕 병렬 워커 수
SWEEP_WORKERS = _env_int("SWEEP_WORKERS", max(1, (os.cpu_count() or 2) - 1))

# P4 (QCQP) 솔버 우선순위 - 설치된 첫 번째 솔버 사용
P4_SOLVERS: List[str] = [
    name.strip() for name in os.getenv("P4_SOLVERS", "CLARABEL,ECOS,SCS").split(",") if name.strip()
]

# 솔버별 정확도 설정 - 목적값 오차가 TOLERANCES["monotone"] 보다 작아야 함
P4_SOLVER_OPTIONS: Dict[str, Dict[str, Any]] = {
    "CLARABEL": {
        "tol_gap_abs": 1e-10,
        "tol_gap_rel": 1e-10,
        "tol_feas": 1e-10,
        "tol_ktratio": 1e-8,
        "max_iter": 400,
    },
    "ECOS": {"abstol": 1e-10, "reltol": 1e-10, "feastol": 1e-10, "max_iters": 400},
    "SCS": {"eps_abs": 1e-10, "eps_rel": 1e-10, "max_iters": 200_000},
}

# 수치 허용오차
TOLERANCES: Dict[str, float] = {
    "lp_feasibility": 1e-9,
    "lp_pivot": 1e-11,
    "lp_optimality": 1e-10,
    "kkt": 1e-6,
    "monotone": 1e-9,
    "speed": 1e-6,
    "eta_feasible": 1e-6,
    "rounding_ratio": 1e-2,
}

# 단순형 피벗 설정
SIMPLEX_SETTINGS: Dict[str, Any] = {
    "max_iter": _env_int("SIMPLEX_MAX_ITER", 50000),
    "refactor_every": 50,
    "degenerate_switch": 30,  # 연속 퇴화 피벗 이후 Bland 규칙으로 전환
}

# Marcum-Q 급수 설정
MARCUM_SETTINGS: Dict[str, Any] = {
    "truncation": 1e-13,
    "max_terms": 400000,
    "chunk": 256,
}

# 시나리오 랜덤 배치 기본값 (1.6 x 1.6 km^2)
DEFAULT_PLACEMENT_BOX = (-800.0, 800.0, -800.0, 800.0)

# 요약 JSON 스키마 버전
SUMMARY_SCHEMA_VERSION = "1.0"


def validate_env():
    """환경변수 값 검증"""
    problems = []
    if DEFAULT_KAPPA <= 0:
        problems.append(f"SOLVER_KAPPA must be > 0 (got {DEFAULT_KAPPA})")
    if MAX_OUTER_ITER < 1 or MAX_SCA_ITER < 1:
        problems.append("MAX_OUTER_ITER and MAX_SCA_ITER must be >= 1")
    if DEFAULT_BLOCKS_PER_SLOT < 1:
        problems.append("DEFAULT_BLOCKS_PER_SLOT must be >= 1")
    if not P4_SOLVERS:
        problems.append("P4_SOLVERS is empty")
    if problems:
        raise ValueError(f"Invalid environment configuration: {problems}")
