import math


def db_to_linear(value_db: float) -> float:
    """dB 값을 선형 비율로 변환 (10^(x/10))"""
    return math.pow(10.0, value_db / 10.0)


def linear_to_db(value: float) -> float:
    """선형 비율을 dB 로 변환"""
    if value <= 0:
        raise ValueError(f"linear value must be > 0 to convert to dB (got {value})")
    return 10.0 * math.log10(value)


def dbm_to_watts(value_dbm: float) -> float:
    """dBm 을 와트로 변환"""
    return math.pow(10.0, (value_dbm - 30.0) / 10.0)


def watts_to_dbm(value_w: float) -> float:
    if value_w <= 0:
        raise ValueError(f"power must be > 0 to convert to dBm (got {value_w})")
    return 10.0 * math.log10(value_w) + 30.0
