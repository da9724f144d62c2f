import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.special import ive
from scipy.stats import ncx2

from app.types.scenario import ChannelParams, FadingKind
from app.utils.channel import (
    DeterministicFading,
    RayleighFading,
    RicianFading,
    block_rate,
    large_scale_gain,
    marcum_q1,
    outage_prob,
    outage_quantile,
    outage_rate,
    rate_matrix,
    rician_cdf,
    rician_cdf_inv,
    sample_fading,
)
from app.utils.scenario_io import REFERENCE_CHANNEL

CHANNEL = ChannelParams(**REFERENCE_CHANNEL)
H = 100.0
P = 0.1


def _marcum_by_quadrature(a: float, b: float) -> float:
    """Q1(a,b) = ∫_b^∞ x·exp(-(x²+a²)/2)·I0(ax) dx"""
    integrand = lambda x: x * math.exp(-0.5 * (x - a) ** 2) * ive(0, a * x)
    upper = max(a, b) + 40.0
    points = [a] if b < a < upper else None
    value, _ = integrate.quad(integrand, b, upper, epsabs=1e-14, epsrel=1e-12, limit=400, points=points)
    return value


def test_marcum_special_cases():
    for a in (0.0, 0.3, 4.0, 25.0):
        assert marcum_q1(a, 0.0) == 1.0
    for b in (0.1, 1.0, 3.0, 7.5):
        assert marcum_q1(0.0, b) == pytest.approx(math.exp(-0.5 * b * b), abs=1e-12)


def test_marcum_reference_point():
    assert marcum_q1(math.sqrt(20.0), 3.0) == pytest.approx(_marcum_by_quadrature(math.sqrt(20.0), 3.0), abs=1e-8)


@pytest.mark.parametrize("a", [0.0, 0.5, 1.0, 2.5, 4.47, 6.0, 10.0])
@pytest.mark.parametrize("b", [0.25, 1.0, 2.5, 4.47, 5.0, 8.0, 10.0])
def test_marcum_matches_quadrature(a, b):
    assert marcum_q1(a, b) == pytest.approx(_marcum_by_quadrature(a, b), abs=1e-8)


def test_marcum_large_arguments_converge():
    for a, b in ((50.0, 49.0), (50.0, 50.0), (30.0, 50.0), (50.0, 10.0)):
        value = marcum_q1(a, b)
        assert 0.0 <= value <= 1.0


def test_marcum_rejects_negative():
    with pytest.raises(ValueError):
        marcum_q1(-1.0, 1.0)
    with pytest.raises(ValueError):
        marcum_q1(1.0, -0.1)


def test_rician_cdf_limits_and_domain():
    d = RicianFading(10.0)
    assert rician_cdf(0.0, d) == 0.0
    assert rician_cdf(100.0, d) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        rician_cdf(-0.1, d)


@pytest.mark.parametrize("k_factor", [0.0, 1.0, 10.0, 30.0])
def test_rician_cdf_matches_noncentral_chi2(k_factor):
    """2(K+1)|ρ|² 는 자유도 2, 비중심도 2K 인 비중심 카이제곱"""
    d = RicianFading(k_factor)
    for z in (0.05, 0.3, 0.8, 1.0, 1.7, 3.0):
        expected = ncx2.cdf(2.0 * (k_factor + 1.0) * z, df=2, nc=2.0 * k_factor)
        assert rician_cdf(z, d) == pytest.approx(expected, abs=1e-9)


def test_rician_cdf_against_sampling():
    d = RicianFading(10.0)
    samples = sample_fading(d, 2024, 2_000_000)
    p = rician_cdf(1.0, d)
    sigma = math.sqrt(p * (1.0 - p) / samples.size)
    assert abs(np.mean(samples <= 1.0) - p) <= 4.0 * sigma


def test_inverse_round_trip():
    d = RicianFading(10.0)
    assert rician_cdf_inv(rician_cdf(0.5, d), d) == pytest.approx(0.5, abs=1e-8)
    z = rician_cdf_inv(1e-2, d)
    assert abs(rician_cdf(z, d) - 1e-2) <= 1e-10


@pytest.mark.parametrize("eps", [1e-6, 1e-4, 1e-3, 1e-2, 0.1, 0.5, 0.9, 0.999, 1 - 1e-6])
def test_cdf_of_inverse_is_identity(eps):
    d = RicianFading(10.0)
    assert rician_cdf(rician_cdf_inv(eps, d), d) == pytest.approx(eps, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(min_value=1e-5, max_value=0.99),
    st.floats(min_value=1.001, max_value=50.0),
    st.floats(min_value=0.0, max_value=40.0),
)
def test_inverse_is_strictly_increasing(eps, factor, k_factor):
    d = RicianFading(k_factor)
    higher = min(eps * factor, 0.999)
    assert rician_cdf_inv(eps, d) < rician_cdf_inv(higher, d)


def test_inverse_rejects_bad_probability():
    d = RicianFading(10.0)
    for eps in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            rician_cdf_inv(eps, d)


def test_other_fading_families():
    rayleigh = RayleighFading()
    assert rayleigh.cdf(1.0) == pytest.approx(RicianFading(0.0).cdf(1.0), abs=1e-12)
    assert rayleigh.inv_cdf(0.01) == pytest.approx(-math.log1p(-0.01), rel=1e-15)
    fixed = DeterministicFading()
    assert fixed.inv_cdf(0.01) == 1.0
    assert np.all(sample_fading(fixed, 1, 5) == 1.0)


def test_large_scale_gain_examples():
    p4 = CHANNEL.model_copy(update={"path_loss_exp": 4.0})
    assert large_scale_gain((3.0, 4.0), (3.0, 4.0), CHANNEL, H) == pytest.approx(1e-10, rel=1e-12)
    assert large_scale_gain((0.0, 0.0), (0.0, 0.0), p4, H) == pytest.approx(1e-14, rel=1e-12)
    distances = np.array([[0.0, 0.0], [10.0, 0.0], [100.0, 0.0], [1e4, 0.0]])
    gains = large_scale_gain(distances, (0.0, 0.0), CHANNEL, H)
    assert np.all(np.diff(gains) < 0)


def test_outage_rate_overhead_value():
    z = outage_quantile(CHANNEL)
    snr = P * CHANNEL.beta0 / (CHANNEL.noise_power * CHANNEL.snr_gap * H * H)
    assert snr == pytest.approx(199.526, rel=1e-5)
    assert outage_rate((0.0, 0.0), (0.0, 0.0), P, CHANNEL, H) == pytest.approx(math.log2(1.0 + z * snr), rel=1e-12)
    assert outage_rate((0.0, 0.0), (0.0, 0.0), P, CHANNEL, H) > outage_rate((1000.0, 0.0), (0.0, 0.0), P, CHANNEL, H)


def test_outage_rate_vanishes_for_tiny_target():
    tiny = CHANNEL.model_copy(update={"outage_eps": 1e-300, "fading": FadingKind.RAYLEIGH})
    assert outage_rate((0.0, 0.0), (0.0, 0.0), P, tiny, H) < 1e-290


def test_outage_prob_inverts_outage_rate(rng):
    for _ in range(10):
        q = rng.uniform(-800, 800, 2)
        w = rng.uniform(-800, 800, 2)
        R = outage_rate(q, w, P, CHANNEL, H)
        assert outage_prob(R, q, w, P, CHANNEL, H) == pytest.approx(CHANNEL.outage_eps, abs=1e-9)
    assert outage_prob(0.0, (0.0, 0.0), (5.0, 5.0), P, CHANNEL, H) == 0.0
    rates = np.linspace(0.0, 8.0, 30)
    probs = [outage_prob(R, (0.0, 0.0), (50.0, 0.0), P, CHANNEL, H) for R in rates]
    assert np.all(np.diff(probs) >= 0.0)


def test_outage_rate_invariant_under_joint_scaling():
    scaled = CHANNEL.model_copy(update={"noise_power": CHANNEL.noise_power * 7.0})
    original = outage_rate((10.0, 20.0), (300.0, -50.0), P, CHANNEL, H)
    assert outage_rate((10.0, 20.0), (300.0, -50.0), 7.0 * P, scaled, H) == pytest.approx(original, rel=1e-12)


def test_block_rate_examples():
    assert block_rate(0.0, 1e-10, P, CHANNEL) == 0.0
    beta = CHANNEL.noise_power * CHANNEL.snr_gap / P
    assert block_rate(1.0, beta, P, CHANNEL) == pytest.approx(1.0, rel=1e-14)
    z = outage_quantile(CHANNEL)
    beta = float(large_scale_gain((0.0, 0.0), (120.0, 40.0), CHANNEL, H))
    assert block_rate(z, beta, P, CHANNEL) == pytest.approx(outage_rate((0.0, 0.0), (120.0, 40.0), P, CHANNEL, H), rel=1e-15)


def test_sampler_moments_and_determinism():
    d = RicianFading(10.0)
    samples = sample_fading(d, 99, 1_000_000)
    assert abs(samples.mean() - 1.0) <= 0.005
    # 평균의 표준오차 대비 5σ 이내
    assert abs(samples.mean() - 1.0) <= 5.0 * math.sqrt(d.variance() / samples.size)
    median = rician_cdf_inv(0.5, d)
    sigma = math.sqrt(0.25 / samples.size)
    assert abs(np.mean(samples <= median) - 0.5) <= 3.0 * sigma
    assert np.array_equal(sample_fading(d, 5, 1000), sample_fading(d, 5, 1000))
    with pytest.raises(ValueError):
        sample_fading(d, 5, 0)


@pytest.mark.parametrize("eps", [1e-3, 1e-2, 1e-1])
def test_outage_is_calibrated(eps, rng):
    """C < R 인 블록 비율이 ε ± 4σ 안에 있어야 함"""
    channel = CHANNEL.model_copy(update={"outage_eps": eps})
    d = RicianFading(channel.rician_k)
    n = 100_000
    sigma = math.sqrt(eps * (1.0 - eps) / n)
    for trial in range(10):
        q = rng.uniform(-800, 800, 2)
        w = rng.uniform(-800, 800, 2)
        R = outage_rate(q, w, P, channel, H)
        beta = float(large_scale_gain(q, w, channel, H))
        capacity = block_rate(sample_fading(d, trial, n), beta, P, channel)
        assert abs(np.mean(capacity < R) - eps) <= 4.0 * sigma


def test_rate_matrix_matches_pointwise(small_scenario):
    points = np.array([[-400.0, 0.0], [0.0, 50.0], [400.0, 0.0]])
    rates = rate_matrix(small_scenario, points)
    assert rates.shape == (2, 3)
    for k, w in enumerate(small_scenario.positions):
        for m, q in enumerate(points):
            assert rates[k, m] == pytest.approx(outage_rate(q, w, 0.1, small_scenario.channel, 100.0), rel=1e-12)
