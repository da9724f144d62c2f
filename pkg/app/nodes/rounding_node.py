"""
분수 스케줄 → 정수 페이딩 블록 배분
N_k[m] = ⌊L·x_k[m]⌉, 슬롯 합이 L 을 넘으면 충돌 복구
"""

import math
import time
import logging
from typing import Dict, Any, Optional

import numpy as np

from app.config import LOG_LEVEL, TOLERANCES
from app.nodes.colored_log_handler import ColoredLogHandler
from app.types.solution import BlockAllocation, Schedule
from app.utils.channel import rate_matrix

logging.basicConfig(level=LOG_LEVEL, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)


def _repair_slot(counts: np.ndarray, scaled: np.ndarray, L: int) -> int:
    """한 슬롯의 합이 L 이하가 될 때까지 올림된 항목 중 소수부가 가장 작은 것을 1 감소"""
    repairs = 0
    fractional = scaled - np.floor(scaled)
    while counts.sum() > L:
        rounded_up = np.flatnonzero(counts > scaled)
        # 동점이면 작은 센서 인덱스 (argmin 은 첫 번째를 고름)
        k = int(rounded_up[np.argmin(fractional[rounded_up])])
        counts[k] -= 1
        repairs += 1
    return repairs


def _top_up(counts: np.ndarray, rates: np.ndarray, demands: np.ndarray, L: int) -> int:
    """반올림으로 요구량 r_k 아래로 떨어진 센서에 빈 블록 추가

    남는 블록이 있는 슬롯 중 전송률이 가장 높은 슬롯부터 채운다.
    """
    added = 0
    for k in range(counts.shape[0]):
        deficit = demands[k] - float(np.dot(counts[k], rates[k])) / L
        while deficit > demands[k] * TOLERANCES["monotone"]:
            free = L - counts.sum(axis=0)
            usable = np.flatnonzero((free > 0) & (rates[k] > 0.0))
            if usable.size == 0:
                logger.warning(f"센서 {k + 1}: 빈 블록이 없어 요구량을 {deficit:.3e} 만큼 채우지 못함")
                break
            m = int(usable[np.argmax(rates[k, usable])])
            need = int(math.ceil(deficit * L / rates[k, m]))
            step = min(need, int(free[m]))
            counts[k, m] += step
            added += step
            deficit -= step * rates[k, m] / L
    return added


def round_schedule(
    X: Schedule,
    L: int,
    rates: Optional[np.ndarray] = None,
    demands: Optional[np.ndarray] = None,
    top_up: bool = False,
) -> BlockAllocation:
    """분수 스케줄을 슬롯당 L 블록으로 반올림

    rates (K x M) 와 demands (K) 가 주어지면 센서별 정규화 처리량 손실도 계산하고,
    top_up 이면 요구량에 못 미치는 센서에 빈 블록을 더 배정한다.
    """
    if L < 1:
        raise ValueError(f"blocks per slot must be >= 1 (got {L})")
    scaled = L * X.x
    counts = np.floor(scaled + 0.5).astype(np.int64)
    collisions = 0
    for m in np.flatnonzero(counts.sum(axis=0) > L):
        collisions += _repair_slot(counts[:, m], scaled[:, m], L)
    if collisions:
        logger.warning(f"라운딩 충돌 {collisions}건 복구 (L={L})")

    added = 0
    if top_up and rates is not None and demands is not None:
        added = _top_up(counts, rates, demands, L)
        if added:
            logger.info(f"요구량 보충 블록 {added}개 추가 (L={L})")

    diff = X.x - counts / float(L)
    throughput_loss = None
    if rates is not None and demands is not None:
        throughput_loss = np.sum(diff * rates, axis=1) / demands
    return BlockAllocation(
        counts=counts,
        blocks_per_slot=L,
        fraction_loss=diff.sum(axis=1),
        throughput_loss=throughput_loss,
        collisions=collisions,
        top_up_blocks=added,
    )


def allocate_blocks(state: Dict[str, Any]) -> Dict[str, Any]:
    """최종 스케줄을 페이딩 블록으로 반올림"""
    s = state["scenario"]
    started = time.perf_counter()
    rates = rate_matrix(s, state["trajectory"].points)
    blocks = round_schedule(state["schedule"], s.mission.blocks_per_slot, rates, s.demands, top_up=True)
    state["rates"] = rates
    state["blocks"] = blocks
    state["trace"].add_time("rounding", time.perf_counter() - started)
    logger.info(f"블록 배분 완료: 센서별 사용 블록 {blocks.counts.sum(axis=1).tolist()}")
    return state
