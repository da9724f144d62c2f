"""
링크 수치 계산 모듈
대규모 경로 이득, Marcum-Q 기반 Rician 분포 CDF 와 역함수,
아웃티지 제약 전송률, 페이딩 계수 샘플링
"""

import math
import logging
from abc import ABC, abstractmethod
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import ive

from app.config import LOG_LEVEL, MARCUM_SETTINGS
from app.nodes.colored_log_handler import ColoredLogHandler
from app.types.errors import MarcumConvergenceError, SolverFailureError
from app.types.scenario import ChannelParams, FadingKind, Scenario

logging.basicConfig(level=LOG_LEVEL, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def _series_tail(ratio: float, x: float, scale: float, start: int, a: float, b: float) -> float:
    """Σ_{k>=start} ratio^k · scale · ive(k, x)

    항의 비 t_{k+1}/t_k = ratio·I_{k+1}(x)/I_k(x) 는 k 에 대해 감소하므로
    q < 1 이 되면 나머지 항은 t_n·q/(1-q) 로 위에서 잘린다.
    """
    tol = MARCUM_SETTINGS["truncation"]
    chunk = MARCUM_SETTINGS["chunk"]
    max_terms = MARCUM_SETTINGS["max_terms"]
    log_ratio = math.log(ratio)
    total = 0.0
    k0 = start
    while k0 < max_terms:
        ks = np.arange(k0, k0 + chunk, dtype=float)
        terms = np.exp(ks * log_ratio) * ive(ks, x) * scale
        # 작은 항부터 더해 반올림 오차 축소
        total += float(np.sum(terms[::-1]))
        last, prev = terms[-1], terms[-2]
        if last == 0.0:
            return total
        q = last / prev
        if q < 1.0 and last * q / (1.0 - q) <= tol:
            return total
        k0 += chunk
    raise MarcumConvergenceError(a, b, max_terms)


def marcum_q1_pair(a: float, b: float) -> Tuple[float, float]:
    """(Q1(a,b), 1 - Q1(a,b)) 를 각각 상쇄 없이 계산"""
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
        raise ValueError(f"Marcum Q1 requires finite a >= 0 and b >= 0 (got a={a}, b={b})")
    if b == 0.0:
        return 1.0, 0.0
    if a == 0.0:
        half = -0.5 * b * b
        return math.exp(half), -math.expm1(half)
    if a == b:
        # Q1(a,a) = (1 + e^{-a^2} I0(a^2)) / 2
        diag = float(ive(0, a * a))
        return 0.5 * (1.0 + diag), 0.5 * (1.0 - diag)
    scale = math.exp(-0.5 * (a - b) ** 2)
    x = a * b
    if a < b:
        q = _series_tail(a / b, x, scale, 0, a, b)
        q = min(max(q, 0.0), 1.0)
        return q, 1.0 - q
    comp = _series_tail(b / a, x, scale, 1, a, b)
    comp = min(max(comp, 0.0), 1.0)
    return 1.0 - comp, comp


def marcum_q1(a: float, b: float) -> float:
    """1차 Marcum-Q 함수 Q1(a, b)"""
    return marcum_q1_pair(a, b)[0]


class FadingDist(ABC):
    """|ρ|^2 의 분포 (E[|ρ|^2] = 1) - CDF, 역CDF, 샘플러"""

    kind: FadingKind

    @abstractmethod
    def cdf(self, z: float) -> float:
        ...

    @abstractmethod
    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        ...

    def inv_cdf(self, eps: float) -> float:
        """브래킷 [0, 1] 에서 상한을 두 배씩 늘린 뒤 Brent 법으로 F(z) = eps 풀이"""
        _check_probability(eps)
        lo, hi = 0.0, 1.0
        doublings = 0
        while self.cdf(hi) <= eps:
            lo, hi = hi, 2.0 * hi
            doublings += 1
            if doublings > 200:
                raise SolverFailureError("inverse CDF", f"cannot bracket eps={eps!r}")
        z = brentq(lambda t: self.cdf(t) - eps, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        residual = abs(self.cdf(z) - eps)
        if residual > 1e-10:
            raise SolverFailureError("inverse CDF", f"|F(z*) - eps| too large at eps={eps!r}", residual)
        return z

    def key(self) -> tuple:
        return (self.kind.value,)


class RicianFading(FadingDist):
    """Rician |ρ|^2 : F(z) = 1 - Q1(√(2K), √(2(K+1)z))"""

    kind = FadingKind.RICIAN

    def __init__(self, k_factor: float):
        if not k_factor >= 0:
            raise ValueError(f"Rician factor must be >= 0 (got {k_factor})")
        self.k_factor = float(k_factor)

    def cdf(self, z: float) -> float:
        z = float(z)
        if z < 0:
            raise ValueError(f"CDF argument must be >= 0 (got {z})")
        if math.isinf(z):
            return 1.0
        a = math.sqrt(2.0 * self.k_factor)
        b = math.sqrt(2.0 * (self.k_factor + 1.0) * z)
        return marcum_q1_pair(a, b)[1]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # 가시선 성분 √(K/(K+1)), 산란 성분 분산 1/(K+1) (실수/허수 각각 절반)
        los = math.sqrt(self.k_factor / (self.k_factor + 1.0))
        sigma = math.sqrt(0.5 / (self.k_factor + 1.0))
        real = los + sigma * rng.standard_normal(n)
        imag = sigma * rng.standard_normal(n)
        return real * real + imag * imag

    def variance(self) -> float:
        return (1.0 + 2.0 * self.k_factor) / (self.k_factor + 1.0) ** 2

    def key(self) -> tuple:
        return (self.kind.value, self.k_factor)


class RayleighFading(FadingDist):
    """Rayleigh |ρ|^2 ~ Exp(1) (K = 0 인 Rician 과 동일)"""

    kind = FadingKind.RAYLEIGH

    def cdf(self, z: float) -> float:
        if z < 0:
            raise ValueError(f"CDF argument must be >= 0 (got {z})")
        return -math.expm1(-float(z))

    def inv_cdf(self, eps: float) -> float:
        _check_probability(eps)
        return -math.log1p(-eps)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_exponential(n)


class DeterministicFading(FadingDist):
    """|ρ|^2 ≡ 1 (페이딩 없음, K → ∞ 극한)"""

    kind = FadingKind.DETERMINISTIC

    def cdf(self, z: float) -> float:
        if z < 0:
            raise ValueError(f"CDF argument must be >= 0 (got {z})")
        return 1.0 if z >= 1.0 else 0.0

    def inv_cdf(self, eps: float) -> float:
        _check_probability(eps)
        return 1.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.ones(n)


def _check_probability(eps: float) -> None:
    if not 0.0 < eps < 1.0:
        raise ValueError(f"outage target must lie in (0, 1) (got {eps})")


def fading_for(p: ChannelParams) -> FadingDist:
    """채널 파라미터에 맞는 페이딩 분포"""
    if p.fading == FadingKind.RAYLEIGH:
        return RayleighFading()
    if p.fading == FadingKind.DETERMINISTIC:
        return DeterministicFading()
    return RicianFading(p.rician_k)


@lru_cache(maxsize=256)
def _cached_quantile(kind: str, k_factor: float, eps: float) -> float:
    if kind == FadingKind.RAYLEIGH.value:
        dist: FadingDist = RayleighFading()
    elif kind == FadingKind.DETERMINISTIC.value:
        dist = DeterministicFading()
    else:
        dist = RicianFading(k_factor)
    z = dist.inv_cdf(eps)
    logger.debug(f"F^-1({eps!r}) = {z!r} ({kind}, K={k_factor!r})")
    return z


def outage_quantile(p: ChannelParams) -> float:
    """F^-1(ε) - 채널 파라미터별 캐시"""
    return _cached_quantile(p.fading.value, p.rician_k, p.outage_eps)


def rician_cdf(z: float, d: FadingDist) -> float:
    return d.cdf(z)


def rician_cdf_inv(eps: float, d: FadingDist) -> float:
    if isinstance(d, RicianFading):
        _check_probability(eps)
        return _cached_quantile(d.kind.value, d.k_factor, eps)
    return d.inv_cdf(eps)


def large_scale_gain(q, w, p: ChannelParams, H: float):
    """β = β0 / (H^2 + ||q - w||^2)^(α/2)"""
    diff = np.asarray(q, dtype=float) - np.asarray(w, dtype=float)
    dist_sq = H * H + np.sum(diff * diff, axis=-1)
    return p.beta0 / dist_sq ** (p.path_loss_exp / 2.0)


def block_rate(rho_sq, beta, P_k, p: ChannelParams):
    """C = log2(1 + |ρ|^2·β·P / (σ^2·Γ))"""
    snr = np.asarray(rho_sq, dtype=float) * beta * P_k / (p.noise_power * p.snr_gap)
    rate = np.log1p(snr) / LN2
    return float(rate) if np.ndim(rate) == 0 else rate


def outage_rate(q, w, P_k, p: ChannelParams, H: float):
    """아웃티지 확률이 정확히 ε 이 되는 전송률 R"""
    return block_rate(outage_quantile(p), large_scale_gain(q, w, p, H), P_k, p)


def outage_prob(R: float, q, w, P_k, p: ChannelParams, H: float) -> float:
    """p_out = F(σ^2Γ(2^R - 1) / (β·P))"""
    if R < 0:
        raise ValueError(f"rate must be >= 0 (got {R})")
    beta = float(large_scale_gain(q, w, p, H))
    threshold = p.noise_power * p.snr_gap * math.expm1(R * LN2) / (beta * P_k)
    return fading_for(p).cdf(threshold)


def _as_generator(rng_seed: SeedLike) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


def sample_fading(d: FadingDist, rng_seed: SeedLike, n: int) -> np.ndarray:
    """|ρ|^2 i.i.d. 샘플 n 개 (시드 고정 시 재현 가능)"""
    if n < 1:
        raise ValueError(f"sample count must be >= 1 (got {n})")
    return d.sample(_as_generator(rng_seed), int(n))


def rate_matrix(s: Scenario, points: np.ndarray) -> np.ndarray:
    """모든 (k, m) 의 R_k[m] (K x M)"""
    points = np.asarray(points, dtype=float)
    gains = large_scale_gain(points[None, :, :], s.positions[:, None, :], s.channel, s.mission.altitude)
    return block_rate(outage_quantile(s.channel), gains, s.powers[:, None], s.channel)
