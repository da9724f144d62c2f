import numpy as np

from app.types.scenario import Scenario
from app.types.solution import Trajectory


def straight_line(q_start, q_end, num_slots: int) -> np.ndarray:
    """q[m] = q_0 + (m-1)/(M-1)·(q_F - q_0), m = 1..M"""
    if num_slots < 2:
        raise ValueError(f"need at least 2 slots (got {num_slots})")
    start = np.asarray(q_start, dtype=float)
    end = np.asarray(q_end, dtype=float)
    weights = np.linspace(0.0, 1.0, num_slots)[:, None]
    points = start + weights * (end - start)
    # 끝점은 정확히 일치해야 함
    points[0] = start
    points[-1] = end
    return points


def centroid(points) -> np.ndarray:
    """점들의 산술 평균 (기하학적 중심)"""
    points = np.asarray(points, dtype=float)
    return points.mean(axis=0)


def horizontal_distances(Q: Trajectory, positions) -> np.ndarray:
    """UAV-센서 수평 거리 (K x M, 미터)"""
    diff = Q.points[None, :, :] - np.asarray(positions, dtype=float)[:, None, :]
    return np.linalg.norm(diff, axis=-1)


def closest_approach(s: Scenario, Q: Trajectory) -> np.ndarray:
    """센서별 최소 수평 거리"""
    return horizontal_distances(Q, s.positions).min(axis=1)


def closest_slots(s: Scenario, Q: Trajectory) -> np.ndarray:
    """센서별 최소 거리 슬롯 인덱스 (0부터)"""
    return horizontal_distances(Q, s.positions).argmin(axis=1)
