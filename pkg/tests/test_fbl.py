import math
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urllc.errors import DomainError
from urllc.fbl import (
    LOG2E_SQ, FadingSpec, Q, Qinv, avg_error_fading, awgn_capacity_dispersion, error_prob,
    max_rate, required_snr, snr_penalty, success_with_metadata,
)

import oracles


def error_prob_oracle(N, k, g):
    C = math.log2(1 + g)
    V = (1 - 1 / (1 + g) ** 2) * math.log2(math.e) ** 2
    return 1 - NormalDist().cdf((C - k / N) / math.sqrt(V / N))


def test_capacity_dispersion_values():
    assert awgn_capacity_dispersion(0.0) == (0.0, 0.0)
    C, V = awgn_capacity_dispersion(1.0)
    assert C == pytest.approx(1.0)
    assert V == pytest.approx(0.75 * LOG2E_SQ) and V == pytest.approx(1.5611, abs=1e-4)
    assert awgn_capacity_dispersion(1e9)[1] == pytest.approx(2.0814, abs=1e-4)
    with pytest.raises(DomainError):
        awgn_capacity_dispersion(-1.0)


@pytest.mark.parametrize("x", [-3.0, 0.0, 1.0, 4.0, 6.0])
def test_q_function(x):
    assert float(Q(x)) == pytest.approx(1 - NormalDist().cdf(x), rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("eps", [1e-9, 1e-6, 1e-3, 0.1, 0.5, 0.9])
def test_q_inverse(eps):
    assert float(Qinv(eps)) == pytest.approx(oracles.qinv(eps), abs=1e-9)
    assert float(Q(Qinv(eps))) == pytest.approx(eps, rel=1e-10)


def test_max_rate_limits():
    C, _ = awgn_capacity_dispersion(10.0)
    assert max_rate(10**12, 1e-5, 10.0).rate == pytest.approx(C, rel=1e-5)
    assert max_rate(100, 0.5, 10.0).rate == pytest.approx(C + math.log2(100) / 200)
    assert max_rate(100, 0.5, 10.0, correction=False).rate == pytest.approx(C)


def test_max_rate_clipping():
    r = max_rate(2, 1e-9, 0.01, correction=False)
    assert r.rate == 0.0 and r.clipped
    with pytest.raises(DomainError):
        max_rate(0, 0.1, 1.0)
    with pytest.raises(DomainError):
        max_rate(10, 1.0, 1.0)


def test_max_rate_penalty_ordering():
    def norm(N, g_db, eps):
        g = 10 ** (g_db / 10)
        return max_rate(N, eps, g).rate / awgn_capacity_dispersion(g)[0]

    base = norm(100, 10, 1e-6)
    assert norm(50, 10, 1e-6) < base < norm(1000, 10, 1e-6)
    assert norm(100, 0, 1e-6) < base < norm(100, 20, 1e-6)
    assert norm(100, 10, 1e-9) < base < norm(100, 10, 1e-3)


@settings(max_examples=200, deadline=None)
@given(st.integers(10, 10_000), st.floats(-10, 30), st.floats(-9, -1), st.floats(1.0, 3.0))
def test_max_rate_monotone(N, g_db, log_eps, f):
    g = 10 ** (g_db / 10)
    eps = 10**log_eps
    r = max_rate(N, eps, g, correction=False).rate
    assert max_rate(int(N * f) + 1, eps, g, correction=False).rate >= r
    assert max_rate(N, eps, g * f, correction=False).rate >= r
    assert max_rate(N, min(eps * f, 0.4), g, correction=False).rate >= r


def test_error_prob_at_capacity():
    C, _ = awgn_capacity_dispersion(3.0)
    assert error_prob(100, 100 * C, 3.0) == pytest.approx(0.5)


def test_error_prob_zero_snr():
    assert error_prob(100, 10, 0.0) == 1.0
    with pytest.raises(DomainError):
        error_prob(100, 0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(10, 2000), st.floats(0.05, 4.0), st.floats(-10, 30), st.floats(0.01, 5))
def test_error_prob_decreasing_in_snr(N, r, g_db, step_db):
    g = 10 ** (g_db / 10)
    assert error_prob(N, r * N, g * 10 ** (step_db / 10)) <= error_prob(N, r * N, g)


def test_error_prob_short_code_qpsk_grid():
    # 64 bits over the 64 QPSK symbols of a length-128 code
    snr_db = np.arange(-4, 4.5, 0.5)
    got = error_prob(64, 64, 10 ** (snr_db / 10))
    ref = [error_prob_oracle(64, 64, 10 ** (s / 10)) for s in snr_db]
    assert np.allclose(got, ref, rtol=1e-9, atol=1e-15)
    assert np.all(np.diff(got) < 0)


def test_required_snr_degenerate_regime():
    with pytest.raises(DomainError):
        required_snr(100, 100, 0.5)


def test_required_snr_large_blocklength_limit():
    # the gap to 2^r - 1 shrinks like N^(-1/2)
    gaps = [required_snr(N, N, 1e-3).gamma / 1.0 - 1 for N in (10**3, 10**5, 10**7, 10**9)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3
    assert gaps[1] / gaps[2] == pytest.approx(10, rel=0.05)


@pytest.mark.parametrize("rate", [0.1, 0.5, 1.0, 2.0, 4.0])
@pytest.mark.parametrize("N", [100, 300, 1000])
@pytest.mark.parametrize("eps", [1e-9, 1e-6, 1e-3, 1e-2])
def test_required_snr_fixed_point_accuracy(rate, N, eps):
    res = required_snr(rate * N, N, eps)
    ref = oracles.required_snr_bisect(rate * N, N, eps)
    assert res.gamma == pytest.approx(ref, rel=1e-4)
    fifth = res.history[min(5, len(res.history) - 1)]
    assert abs(fifth / ref - 1) < 1e-3
    assert error_prob(N, rate * N, res.gamma) == pytest.approx(eps, rel=1e-4)


def test_snr_penalty_delta0():
    _, d0 = snr_penalty(1.0, 100, 1e-3)
    assert d0 == pytest.approx(1.3621, abs=1e-4)
    d, d0 = snr_penalty(1.0, 100, 0.5)
    assert d == 1.0 and d0 == 1.0


def test_snr_penalty_converges_to_high_rate_limit():
    rates = np.arange(0.25, 6.01, 0.25)
    ratios = []
    for r in rates:
        d, d0 = snr_penalty(float(r), 100, 1e-3)
        assert d >= d0
        ratios.append(d / d0)
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert ratios[list(rates).index(4.0)] < 1.02


def test_fading_spec_validation():
    with pytest.raises(DomainError):
        FadingSpec("nakagami", 1.0)
    with pytest.raises(DomainError):
        FadingSpec("rayleigh", 0.0)


def test_rician_snr_law_mean_and_limits():
    d = FadingSpec("rician", 10.0, 10.0).distribution()
    assert d.mean() == pytest.approx(10.0)
    rng = np.random.default_rng(0)
    K, n = 10.0, 200_000
    h = math.sqrt(K / (K + 1)) + math.sqrt(1 / (2 * (K + 1))) * (
        rng.standard_normal(n) + 1j * rng.standard_normal(n))
    g = 10.0 * np.abs(h) ** 2
    for x in (3.0, 8.0, 14.0):
        p = d.cdf(x)
        assert np.mean(g < x) == pytest.approx(p, abs=4 * math.sqrt(p * (1 - p) / n))


def test_fading_asymptotic_outage():
    s = FadingSpec("rayleigh", 10.0)
    assert avg_error_fading(s, 100, 100, "asymptotic_outage") == pytest.approx(-math.expm1(-0.1))
    with pytest.raises(DomainError):
        avg_error_fading(s, 100, 100, "saddlepoint")


@pytest.mark.parametrize("log2k", [6, 7, 8, 9])
def test_rayleigh_methods_merge_for_moderate_k(log2k):
    s = FadingSpec("rayleigh", 10.0)
    k = 2**log2k
    ex = avg_error_fading(s, k, 100)
    asy = avg_error_fading(s, k, 100, "asymptotic_outage")
    assert abs(ex - asy) / ex < 0.10


@pytest.mark.parametrize("k", [1, 2, 4])
def test_strong_los_methods_diverge_for_small_k(k):
    s = FadingSpec("rician", 10.0, 10.0)
    ex = avg_error_fading(s, k, 100)
    asy = avg_error_fading(s, k, 100, "asymptotic_outage")
    assert abs(ex - asy) / ex > 0.25


def test_fading_expectation_matches_monte_carlo():
    s = FadingSpec("rician", 10.0, 1.0)
    g = s.distribution().rvs(size=400_000, random_state=np.random.default_rng(3))
    mc = np.asarray(error_prob(100, 200, g))
    assert avg_error_fading(s, 200, 100) == pytest.approx(mc.mean(), abs=4 * mc.std() / math.sqrt(len(g)))


@pytest.mark.parametrize("k", [300, 330, 346])
def test_deterministic_limit(k):
    s = FadingSpec("rician", 10.0, 1e6)
    assert avg_error_fading(s, k, 100) == pytest.approx(error_prob(100, k, 10.0), rel=0.01)


def test_metadata_success_examples():
    assert success_with_metadata(0.0, 0.1, 0.0) == pytest.approx(0.9)
    assert success_with_metadata(1e-3, 1e-3, 0.0) == pytest.approx(0.998001, abs=1e-9)
    assert success_with_metadata(1e-3, 0.1, 1e-3, 1) == pytest.approx(0.98884, abs=1e-5)
    assert round(success_with_metadata(1e-3, 0.1, 1e-3, 1), 3) == 0.989


def test_metadata_success_validation():
    with pytest.raises(DomainError):
        success_with_metadata(1.5, 0.0, 0.0)
    with pytest.raises(DomainError):
        success_with_metadata(0.0, 0.0, 0.0, -1)


probs = st.floats(0.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(probs, probs, probs, st.integers(0, 6), st.floats(0, 1))
def test_metadata_success_monotone(pem, ped, pef, n, shrink):
    base = success_with_metadata(pem, ped, pef, n)
    assert success_with_metadata(pem, ped, pef, n + 1) >= base - 1e-15
    assert success_with_metadata(pem * shrink, ped, pef, n) >= base - 1e-15
    assert success_with_metadata(pem, ped * shrink, pef, n) >= base - 1e-15
    assert success_with_metadata(pem, ped, pef * shrink, n) >= base - 1e-15
