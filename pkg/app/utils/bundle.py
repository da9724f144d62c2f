"""
해 번들 입출력

디렉터리 구성:
  trajectory.csv  slot, x, y
  schedule.csv    slot, sensor, fraction, blocks, rate_bps_hz
  blocks.csv      sensor, blocks_used, fraction_loss, throughput_loss, ratio_relaxed, ratio_rounded
  summary.json    θ, 센서별 에너지/처리량, 반복 횟수 (실행 시간은 "timings" 키에만)
  trace.json      반복별 θ, η, SCA 기록
  scenario.toml   시나리오 원본 (선형 키, 재로딩 시 정확히 복원)
"""

import json
import math
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError

from app.config import LOG_LEVEL, SUMMARY_SCHEMA_VERSION
from app.nodes.colored_log_handler import ColoredLogHandler
from app.types.errors import BundleError, CollectorError
from app.types.scenario import Scenario
from app.types.solution import BlockAllocation, Schedule, Solution, Trajectory
from app.utils.scenario_io import dump_scenario, load_scenario

logging.basicConfig(level=LOG_LEVEL, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)

BUNDLE_FILES = ("trajectory.csv", "schedule.csv", "blocks.csv", "summary.json", "trace.json", "scenario.toml")


class SolutionBundle(BaseModel):
    """디스크에서 읽은 해 번들"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scenario: Scenario
    trajectory: Trajectory
    schedule: Schedule
    blocks: BlockAllocation
    rates: np.ndarray
    summary: Dict[str, Any]


def _json_number(value: Optional[float]):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else str(value)


def write_json(data: Dict[str, Any], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def write_trajectory_csv(Q: Trajectory, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        {"slot": np.arange(1, Q.num_slots + 1), "x": Q.points[:, 0], "y": Q.points[:, 1]}
    )
    frame.to_csv(path, index=False)
    return path


def _schedule_frame(schedule: Schedule, blocks: BlockAllocation, rates: np.ndarray) -> pd.DataFrame:
    K, M = schedule.shape
    slots, sensors = np.meshgrid(np.arange(1, M + 1), np.arange(1, K + 1))
    # 슬롯 우선 정렬
    return pd.DataFrame(
        {
            "slot": slots.T.ravel(),
            "sensor": sensors.T.ravel(),
            "fraction": schedule.x.T.ravel(),
            "blocks": blocks.counts.T.ravel(),
            "rate_bps_hz": np.asarray(rates, dtype=float).T.ravel(),
        }
    )


def build_summary(solution: Solution, s: Scenario, settings: Dict[str, Any]) -> Dict[str, Any]:
    trace = solution.trace
    sensors = []
    for relaxed, rounded in zip(solution.evaluation, solution.block_evaluation):
        k = relaxed.sensor
        sensors.append(
            {
                "sensor": k + 1,
                "energy_j": relaxed.energy_j,
                "throughput_bps_hz": relaxed.throughput,
                "ratio": relaxed.ratio,
                "energy_rounded_j": rounded.energy_j,
                "ratio_rounded": rounded.ratio,
                "blocks": int(solution.blocks.counts[k].sum()),
                "data_bits": s.sensors[k].data_bits,
            }
        )
    return {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "theta_j": solution.theta,
        "eta": solution.eta,
        "num_sensors": s.num_sensors,
        "num_slots": s.num_slots,
        "blocks_per_slot": s.mission.blocks_per_slot,
        "settings": {key: _json_number(value) if isinstance(value, float) else value for key, value in settings.items()},
        "iterations": {
            "outer": trace.outer_iterations,
            "sca_total": sum(item.iterations for item in trace.sca),
            "lp_pivots": sum(trace.lp_iterations),
        },
        "converged": trace.converged,
        "hit_cap": trace.hit_cap,
        "rounding_collisions": solution.blocks.collisions,
        "rounding_top_up_blocks": solution.blocks.top_up_blocks,
        "sensors": sensors,
        "timings": {
            "generated_at": datetime.now().isoformat(timespec="seconds"),
            "stage_seconds": {stage: float(sum(times)) for stage, times in sorted(trace.stage_times.items())},
        },
    }


def write_bundle(solution: Solution, s: Scenario, out_dir, settings: Optional[Dict[str, Any]] = None) -> Path:
    """해 번들을 out_dir 에 기록"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(solution.trajectory, out / "trajectory.csv")
    _schedule_frame(solution.schedule, solution.blocks, solution.rates).to_csv(out / "schedule.csv", index=False)

    blocks = solution.blocks
    throughput_loss = blocks.throughput_loss if blocks.throughput_loss is not None else np.full(s.num_sensors, np.nan)
    pd.DataFrame(
        {
            "sensor": np.arange(1, s.num_sensors + 1),
            "blocks_used": blocks.counts.sum(axis=1),
            "fraction_loss": blocks.fraction_loss,
            "throughput_loss": throughput_loss,
            "ratio_relaxed": [item.ratio for item in solution.evaluation],
            "ratio_rounded": [item.ratio for item in solution.block_evaluation],
        }
    ).to_csv(out / "blocks.csv", index=False)

    write_json(build_summary(solution, s, settings or {}), out / "summary.json")
    write_json(solution.trace.to_dict(include_times=False), out / "trace.json")
    dump_scenario(s, out / "scenario.toml")
    logger.info(f"해 번들 저장: {out}")
    return out


def _read_csv(path: Path, columns) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise BundleError(str(path.parent), f"cannot read {path.name}: {exc}") from exc
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise BundleError(str(path.parent), f"{path.name} lacks columns {missing}")
    return frame


def read_bundle(run_dir) -> SolutionBundle:
    """번들 디렉터리를 읽고 형태/값 일관성을 검사"""
    run = Path(run_dir)
    if not run.is_dir():
        raise BundleError(str(run), "directory not found")
    for name in BUNDLE_FILES:
        if not (run / name).is_file():
            raise BundleError(str(run), f"missing {name}")

    try:
        s = load_scenario(run / "scenario.toml")
    except CollectorError as exc:
        raise BundleError(str(run), f"scenario.toml: {exc}") from exc
    K, M = s.num_sensors, s.num_slots
    L = s.mission.blocks_per_slot

    traj = _read_csv(run / "trajectory.csv", ["slot", "x", "y"]).sort_values("slot")
    sched = _read_csv(run / "schedule.csv", ["slot", "sensor", "fraction", "blocks", "rate_bps_hz"])
    if len(traj) != M or len(sched) != K * M:
        raise BundleError(str(run), f"expected {M} trajectory rows and {K * M} schedule rows")
    sched = sched.sort_values(["sensor", "slot"])
    try:
        slot_index = sched["slot"].to_numpy(dtype=np.int64) - 1
        sensor_index = sched["sensor"].to_numpy(dtype=np.int64) - 1
        if slot_index.min() < 0 or slot_index.max() >= M or sensor_index.min() < 0 or sensor_index.max() >= K:
            raise ValueError("slot/sensor index out of range")
        x = np.zeros((K, M))
        counts = np.zeros((K, M), dtype=np.int64)
        rates = np.zeros((K, M))
        x[sensor_index, slot_index] = sched["fraction"].to_numpy(dtype=float)
        counts[sensor_index, slot_index] = sched["blocks"].to_numpy(dtype=np.int64)
        rates[sensor_index, slot_index] = sched["rate_bps_hz"].to_numpy(dtype=float)
        if np.any(~np.isfinite(rates)) or np.any(rates < 0):
            raise ValueError("rates must be finite and >= 0")
        trajectory = Trajectory(points=traj[["x", "y"]].to_numpy(dtype=float))
        schedule = Schedule(x=x)
        blocks = BlockAllocation(counts=counts, blocks_per_slot=L, fraction_loss=(x - counts / L).sum(axis=1))
        summary = json.loads((run / "summary.json").read_text(encoding="utf-8"))
    except (ValueError, ValidationError, json.JSONDecodeError) as exc:
        raise BundleError(str(run), str(exc)) from exc
    return SolutionBundle(
        scenario=s, trajectory=trajectory, schedule=schedule, blocks=blocks, rates=rates, summary=summary
    )
