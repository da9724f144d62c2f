"""
몬테카를로 검증
해 번들의 궤적/블록 배분/전송률로 페이딩 블록 단위 전송을 모의하고
경험적 아웃티지와 전달 데이터량을 측정한다.
"""

import logging
import math
from typing import Dict, List, Optional

import numpy as np
from scipy.stats import binomtest

from app.config import LOG_LEVEL, TOLERANCES
from app.nodes.colored_log_handler import ColoredLogHandler
from app.types.reports import CollectionResult, SensorCollection, SensorVerification, VerifyReport
from app.types.scenario import Scenario
from app.types.solution import BlockAllocation, Trajectory
from app.utils.bundle import read_bundle
from app.utils.channel import block_rate, fading_for, large_scale_gain, rate_matrix, sample_fading

logging.basicConfig(level=LOG_LEVEL, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)


def simulate_collection(
    s: Scenario,
    N: BlockAllocation,
    Q: Trajectory,
    seed: int,
    rates: Optional[np.ndarray] = None,
    n_reps: int = 1,
) -> CollectionResult:
    """(k, m) 마다 N_k[m] 블록을 모의 - 블록은 C >= R_k[m] 일 때만 성공

    rates 를 주지 않으면 궤적에서 계산한 아웃티지 제약 전송률을 쓴다.
    (rep, k, m) 별 독립 난수 스트림이므로 실행 순서와 무관하게 재현된다.
    """
    if n_reps < 1:
        raise ValueError(f"n_reps must be >= 1 (got {n_reps})")
    K, M = N.counts.shape
    L = N.blocks_per_slot
    if rates is None:
        rates = rate_matrix(s, Q.points)
    rates = np.asarray(rates, dtype=float)
    gains = large_scale_gain(Q.points[None, :, :], s.positions[:, None, :], s.channel, s.mission.altitude)
    dist = fading_for(s.channel)
    bits_per_block = s.channel.bandwidth * s.mission.slot_len / L

    sensors: List[SensorCollection] = []
    for k in range(K):
        slot_blocks: Dict[int, int] = {}
        slot_failures: Dict[int, int] = {}
        delivered = 0.0
        for m in np.flatnonzero(N.counts[k]):
            count = int(N.counts[k, m])
            failures = 0
            for rep in range(n_reps):
                stream = np.random.SeedSequence(seed, spawn_key=(rep, k, int(m)))
                rho_sq = sample_fading(dist, np.random.default_rng(stream), count)
                capacity = block_rate(rho_sq, gains[k, m], s.powers[k], s.channel)
                success = int(np.count_nonzero(np.atleast_1d(capacity) >= rates[k, m]))
                failures += count - success
                delivered += success * rates[k, m] * bits_per_block
            slot_blocks[int(m)] = count * n_reps
            slot_failures[int(m)] = failures
        n_blocks = sum(slot_blocks.values())
        failed = sum(slot_failures.values())
        nominal = float(np.sum(N.counts[k] * rates[k]) * bits_per_block)
        sensors.append(
            SensorCollection(
                sensor=k,
                nominal_bits=nominal,
                delivered_bits=delivered / n_reps,
                n_blocks=n_blocks,
                failed_blocks=failed,
                empirical_outage=failed / n_blocks if n_blocks else 0.0,
                slot_blocks=slot_blocks,
                slot_failures=slot_failures,
            )
        )
        logger.debug(f"u_{k + 1}: 블록 {n_blocks}개 중 실패 {failed}개")

    demand_ratio = np.sum(N.fractions * rates, axis=1) / s.demands
    return CollectionResult(
        seed=seed,
        n_reps=n_reps,
        outage_eps=s.channel.outage_eps,
        data_bits=[sensor.data_bits for sensor in s.sensors],
        demand_ratio=demand_ratio.tolist(),
        sensors=sensors,
    )


def _worst_slots(item: SensorCollection, limit: int = 5) -> List[Dict[str, float]]:
    ranked = sorted(
        item.slot_blocks,
        key=lambda m: (-item.slot_failures.get(m, 0) / item.slot_blocks[m], m),
    )
    return [
        {
            "slot": m + 1,
            "blocks": item.slot_blocks[m],
            "failures": item.slot_failures.get(m, 0),
            "outage": item.slot_failures.get(m, 0) / item.slot_blocks[m],
        }
        for m in ranked[:limit]
    ]


def verify_report(results: CollectionResult) -> VerifyReport:
    """센서별 보정 검사를 합격/불합격 보고서로 집계

    합격 조건: 경험적 아웃티지 <= ε + 4σ, 전달량 >= (1 - ε - 3σ)·S_k,
    라운딩 후 요구량 충족 비율 >= 0.99 (σ = √(ε(1-ε)/n)).
    """
    eps = results.outage_eps
    sensors: List[SensorVerification] = []
    for item, bits, ratio in zip(results.sensors, results.data_bits, results.demand_ratio):
        reasons: List[str] = []
        n = item.n_blocks
        if n == 0:
            sigma = 0.0
            ci_low, ci_high = 0.0, 1.0
            reasons.append("demand unmet: no fading blocks allocated")
        else:
            sigma = math.sqrt(eps * (1.0 - eps) / n)
            interval = binomtest(item.failed_blocks, n).proportion_ci(confidence_level=0.95)
            ci_low, ci_high = float(interval.low), float(interval.high)
        limit = eps + 4.0 * sigma
        floor = (1.0 - eps - 3.0 * sigma) * bits
        worst: List[Dict[str, float]] = []
        if n and item.empirical_outage > limit:
            z = (item.empirical_outage - eps) / sigma if sigma > 0 else math.inf
            reasons.append(f"empirical outage {item.empirical_outage!r} is {z:.1f} sigma above eps={eps!r}")
            worst = _worst_slots(item)
        if n and item.delivered_bits < floor:
            reasons.append(f"delivered {item.delivered_bits!r} bits < floor {floor!r}")
        if ratio < 1.0 - TOLERANCES["rounding_ratio"]:
            reasons.append(f"rounded schedule meets only {ratio:.6f} of the demand")
        sensors.append(
            SensorVerification(
                sensor=item.sensor,
                nominal_bits=item.nominal_bits,
                delivered_bits=item.delivered_bits,
                expected_delivered_bits=(1.0 - eps) * item.nominal_bits,
                empirical_outage=item.empirical_outage,
                n_blocks=n,
                ci_low=ci_low,
                ci_high=ci_high,
                outage_limit=limit,
                delivered_floor=floor,
                demand_ratio=ratio,
                passed=not reasons,
                reasons=reasons,
                worst_slots=worst,
            )
        )
    report = VerifyReport(
        seed=results.seed,
        n_reps=results.n_reps,
        outage_eps=eps,
        passed=all(item.passed for item in sensors),
        sensors=sensors,
    )
    if report.passed:
        logger.info("몬테카를로 검증 통과")
    else:
        logger.warning(f"몬테카를로 검증 실패: 센서 {[k + 1 for k in report.failed_sensors]}")
    return report


def verify_bundle(run_dir, seed: int, n_reps: int = 1) -> VerifyReport:
    """저장된 해 번들 검증 - 전송률은 번들 값, 채널은 시나리오 값을 쓴다"""
    bundle = read_bundle(run_dir)
    results = simulate_collection(bundle.scenario, bundle.blocks, bundle.trajectory, seed, bundle.rates, n_reps)
    return verify_report(results)
