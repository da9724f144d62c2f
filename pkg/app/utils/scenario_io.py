"""
시나리오 파일 입출력 (TOML)

채널 값은 dB/dBm 키 (beta0_db, noise_dbm, gamma_db) 또는 선형 키
(beta0, noise_w, gamma) 로 줄 수 있다. 변환은 로드 시점에 한 번만 한다.
센서는 [[sensors]] 로 직접 주거나 [placement] 로 시드 기반 무작위 배치를 지정한다.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import toml
from pydantic import ValidationError

from app.config import DEFAULT_BLOCKS_PER_SLOT, DEFAULT_PLACEMENT_BOX, LOG_LEVEL
from app.nodes.colored_log_handler import ColoredLogHandler
from app.types.errors import ScenarioParseError, ScenarioValidationError
from app.types.scenario import ChannelParams, Mission, Scenario, Sensor
from app.utils.units import db_to_linear, dbm_to_watts

logging.basicConfig(level=LOG_LEVEL, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)

# 1.6 x 1.6 km^2 영역, 직선 비행 기준 임무
REFERENCE_MISSION = {
    "altitude": 100.0,
    "v_max": 50.0,
    "horizon": 50.0,
    "slot_len": 0.5,
    "q_start": (-800.0, 0.0),
    "q_end": (800.0, 0.0),
    "blocks_per_slot": DEFAULT_BLOCKS_PER_SLOT,
}

REFERENCE_CHANNEL = {
    "beta0": db_to_linear(-60.0),
    "noise_power": dbm_to_watts(-110.0),
    "snr_gap": db_to_linear(7.0),
    "path_loss_exp": 2.0,
    "rician_k": 10.0,
    "outage_eps": 1e-2,
    "bandwidth": 1e6,
}


def _first_error(exc: ValidationError) -> Tuple[str, str]:
    error = exc.errors()[0]
    location = ".".join(str(part) for part in error.get("loc", ()))
    detail = error.get("msg", str(exc))
    return error.get("type", "validation"), f"{location}: {detail}" if location else detail


def _require(section: Dict[str, Any], key: str, path: str, where: str):
    if key not in section:
        raise ScenarioParseError(path, f"missing key '{key}' in [{where}]")
    return section[key]


def _channel_value(section: Dict[str, Any], linear_key: str, db_key: str, convert, path: str) -> float:
    if linear_key in section and db_key in section:
        raise ScenarioParseError(path, f"give either '{linear_key}' or '{db_key}' in [channel], not both")
    if linear_key in section:
        return float(section[linear_key])
    return convert(float(_require(section, db_key, path, "channel")))


def place_sensors(count: int, seed: int, box: Sequence[float] = DEFAULT_PLACEMENT_BOX) -> np.ndarray:
    """box = (x_min, x_max, y_min, y_max) 안에 균일 분포로 센서 위치 생성"""
    if count < 1:
        raise ValueError(f"sensor count must be >= 1 (got {count})")
    x_min, x_max, y_min, y_max = (float(v) for v in box)
    if not (x_min < x_max and y_min < y_max):
        raise ValueError(f"placement box must satisfy x_min < x_max, y_min < y_max (got {tuple(box)})")
    rng = np.random.default_rng(seed)
    return rng.uniform(low=(x_min, y_min), high=(x_max, y_max), size=(count, 2))


def _sensor_list(raw: Dict[str, Any], path: str) -> List[Dict[str, Any]]:
    explicit = raw.get("sensors")
    placement = raw.get("placement")
    if explicit and placement:
        raise ScenarioParseError(path, "use either [[sensors]] or [placement], not both")
    if explicit:
        sensors = []
        for index, item in enumerate(explicit):
            where = f"sensors #{index + 1}"
            sensors.append(
                {
                    "position": (float(_require(item, "x", path, where)), float(_require(item, "y", path, where))),
                    "data_bits": float(_require(item, "data_bits", path, where)),
                    "power_w": float(_require(item, "power_w", path, where)),
                }
            )
        return sensors
    if placement:
        count = int(_require(placement, "count", path, "placement"))
        seed = int(_require(placement, "seed", path, "placement"))
        box = placement.get("box", list(DEFAULT_PLACEMENT_BOX))
        try:
            positions = place_sensors(count, seed, box)
        except ValueError as exc:
            raise ScenarioValidationError("placement", str(exc)) from exc
        data_bits = float(_require(placement, "data_bits", path, "placement"))
        power_w = float(_require(placement, "power_w", path, "placement"))
        logger.debug(f"[placement] seed={seed} 로 센서 {count}개 배치")
        return [
            {"position": (float(x), float(y)), "data_bits": data_bits, "power_w": power_w} for x, y in positions
        ]
    raise ScenarioParseError(path, "no sensors: add [[sensors]] entries or a [placement] section")


def scenario_from_dict(raw: Dict[str, Any], path: str = "<memory>") -> Scenario:
    """파싱된 TOML 문서를 검증된 Scenario 로 변환"""
    try:
        mission = _require(raw, "mission", path, "top level")
        channel = _require(raw, "channel", path, "top level")
        solver = raw.get("solver", {})
        data = {
            "sensors": _sensor_list(raw, path),
            "mission": {
                "altitude": float(_require(mission, "H", path, "mission")),
                "v_max": float(_require(mission, "v_max", path, "mission")),
                "horizon": float(_require(mission, "T", path, "mission")),
                "slot_len": float(_require(mission, "dt", path, "mission")),
                "q_start": tuple(float(v) for v in _require(mission, "q0", path, "mission")),
                "q_end": tuple(float(v) for v in _require(mission, "qF", path, "mission")),
                "blocks_per_slot": int(mission.get("L", DEFAULT_BLOCKS_PER_SLOT)),
            },
            "channel": {
                "beta0": _channel_value(channel, "beta0", "beta0_db", db_to_linear, path),
                "noise_power": _channel_value(channel, "noise_w", "noise_dbm", dbm_to_watts, path),
                "snr_gap": _channel_value(channel, "gamma", "gamma_db", db_to_linear, path),
                "path_loss_exp": float(channel.get("alpha", 2.0)),
                "rician_k": float(channel.get("rician_k", 10.0)),
                "outage_eps": float(_require(channel, "epsilon", path, "channel")),
                "bandwidth": float(_require(channel, "bandwidth_hz", path, "channel")),
                "fading": channel.get("fading", "rician"),
            },
            "solver": {key: solver[key] for key in ("max_outer", "max_sca", "seed") if key in solver},
        }
        if "kappa" in solver:
            data["tol_kappa"] = float(solver["kappa"])
    except (TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, ScenarioValidationError):
            raise
        raise ScenarioParseError(path, f"malformed value: {exc}") from exc

    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        invariant, detail = _first_error(exc)
        raise ScenarioValidationError(invariant, detail) from exc


def load_scenario(path) -> Scenario:
    """TOML 시나리오 파일 로드 및 검증"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(str(path), exc.strerror or str(exc)) from exc
    try:
        raw = toml.loads(text)
    except toml.TomlDecodeError as exc:
        raise ScenarioParseError(str(path), str(exc)) from exc
    s = scenario_from_dict(raw, str(path))
    logger.info(f"시나리오 로드: {path} (K={s.num_sensors}, M={s.num_slots})")
    return s


def scenario_to_dict(s: Scenario) -> Dict[str, Any]:
    """선형 키로 직렬화 - 다시 읽으면 모든 값이 그대로 복원됨"""
    m = s.mission
    c = s.channel
    solver: Dict[str, Any] = {"kappa": s.tol_kappa, "max_outer": s.solver.max_outer, "max_sca": s.solver.max_sca}
    if s.solver.seed is not None:
        solver["seed"] = s.solver.seed
    return {
        "mission": {
            "H": m.altitude,
            "v_max": m.v_max,
            "T": m.horizon,
            "dt": m.slot_len,
            "q0": list(m.q_start),
            "qF": list(m.q_end),
            "L": m.blocks_per_slot,
        },
        "channel": {
            "beta0": c.beta0,
            "noise_w": c.noise_power,
            "gamma": c.snr_gap,
            "alpha": c.path_loss_exp,
            "rician_k": c.rician_k,
            "epsilon": c.outage_eps,
            "bandwidth_hz": c.bandwidth,
            "fading": c.fading.value,
        },
        "solver": solver,
        "sensors": [
            {"x": sensor.position[0], "y": sensor.position[1], "data_bits": sensor.data_bits, "power_w": sensor.power_w}
            for sensor in s.sensors
        ],
    }


def dump_scenario(s: Scenario, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(toml.dumps(scenario_to_dict(s)), encoding="utf-8")
    return path


def random_scenario(
    num_sensors: int,
    seed: int,
    box: Sequence[float] = DEFAULT_PLACEMENT_BOX,
    data_bits: float = 1e7,
    power_w: float = 0.1,
    mission: Optional[Dict[str, Any]] = None,
    channel: Optional[Dict[str, Any]] = None,
    kappa: Optional[float] = None,
) -> Scenario:
    """기준 임무/채널 값에 시드 기반 균일 배치 센서를 얹은 시나리오"""
    positions = place_sensors(num_sensors, seed, box)
    data = {
        "sensors": [Sensor(position=(float(x), float(y)), data_bits=data_bits, power_w=power_w) for x, y in positions],
        "mission": Mission(**{**REFERENCE_MISSION, **(mission or {})}),
        "channel": ChannelParams(**{**REFERENCE_CHANNEL, **(channel or {})}),
    }
    if kappa is not None:
        data["tol_kappa"] = kappa
    return Scenario(**data)


def derived_constants(s: Scenario) -> Tuple[float, np.ndarray, np.ndarray]:
    """(D_max [m], E_k [J], r_k [bps/Hz])"""
    return s.d_max, s.energies, s.demands
