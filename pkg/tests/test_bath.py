import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from oracles import J_tl_mp
from tlfqubit.bath import (QuadratureError, SpectralDensityOhmic, SpectralDensityTL, bath_response,
                           discretize_bath, eval_J_TL, resolvent_integral, thermal_weight)

SD_V = SpectralDensityTL(0.01, 0.05)


def test_J_zero_at_origin():
    assert eval_J_TL(0.0, SpectralDensityTL(0.3, 0.05)) == 0.0


def test_J_negative_frequency_rejected():
    with pytest.raises(ValueError):
        eval_J_TL(-0.1, SD_V)


def test_J_matches_high_precision_oracle():
    sd = SpectralDensityTL(0.3, 0.05)
    ref_50 = float(J_tl_mp(0.1, 0.3, 0.05, dps=50))
    ref_30 = float(J_tl_mp(0.1, 0.3, 0.05, dps=30))
    assert abs(ref_50 - ref_30) < 1e-25
    assert eval_J_TL(0.1, sd) == pytest.approx(ref_50, rel=1e-13)


def test_J_small_argument_series_matches_oracle():
    sd = SpectralDensityTL(0.3, 0.05)
    for w in (1e-7, 1e-5, 4e-5, 1e-3):
        assert eval_J_TL(w, sd) == pytest.approx(float(J_tl_mp(w, 0.3, 0.05)), rel=1e-9)


@given(st.floats(1e-4, 5.0), st.floats(0.0, 1.0), st.floats(1e-3, 1.0))
@settings(max_examples=200, deadline=None)
def test_J_nonnegative(w, alpha, wd):
    assert eval_J_TL(w, SpectralDensityTL(alpha, wd)) >= 0.0


@given(st.floats(1e-12, 1e-6))
def test_J_continuous_at_zero(eps):
    sd = SpectralDensityTL(0.3, 0.05)
    assert abs(eval_J_TL(eps, sd)) <= 2 * 0.3 * eps


@pytest.mark.parametrize("w", [0.05, 0.5, 1.0, 2.0])
def test_J_ohmic_limit(w):
    sd = SpectralDensityTL(0.2, 1e-12)
    assert eval_J_TL(w, sd) == pytest.approx(0.2 * w * math.exp(-w * w / 2), rel=1e-8)
    assert eval_J_TL(w, sd) == pytest.approx(SpectralDensityOhmic(0.2)(w), rel=1e-8)


def _moment(sd, m):
    return integrate.quad(lambda w: float(sd(w)) * w**m, 0, sd.omega_max, limit=500,
                          epsabs=1e-15, epsrel=1e-13)[0]


def test_discretize_zero_density():
    d = discretize_bath(SpectralDensityTL(0.0, 0.05), "linear-grid", 100)
    assert np.all(d.weights == 0)


def test_discretize_needs_modes():
    with pytest.raises(ValueError):
        discretize_bath(SD_V, "gauss-quadrature", 4)


def test_discretize_rejects_unknown_scheme():
    with pytest.raises(ValueError):
        discretize_bath(SD_V, "random", 100)


def test_discretize_rejects_nonfinite_density():
    class Bad:
        alpha = 1.0
        omega_l = 1.0
        omega_max = 5.0

        def __call__(self, w):
            return np.full(np.shape(w), np.nan)

    with pytest.raises(ValueError):
        discretize_bath(Bad(), "linear-grid", 100)


def test_ohmic_first_moment_at_2000_modes():
    sd = SpectralDensityOhmic(0.3)
    # int_0^inf a w e^{-w^2/2} dw = a; the Omega_max = 5 tail is ~e^{-12.5}
    exact = 0.3 * (1 - math.exp(-12.5))
    assert _moment(sd, 0) == pytest.approx(exact, rel=1e-12)
    d = discretize_bath(sd, "gauss-quadrature", 2000)
    assert abs(d.moment(0) - exact) / exact < 1e-6


@pytest.mark.parametrize("scheme", ["linear-grid", "gauss-quadrature"])
@pytest.mark.parametrize("m", [0, 1, 2])
def test_moments_at_2000_modes(scheme, m):
    sd = SpectralDensityTL(0.3, 0.05)
    d = discretize_bath(sd, scheme, 2000)
    ref = _moment(sd, m)
    assert abs(d.moment(m) - ref) / ref < 1e-4
    assert np.all(d.omegas > 0) and np.all(d.weights >= 0)


def test_moment_error_decreases_with_modes():
    sd = SpectralDensityTL(0.01, 0.05)
    ref = _moment(sd, 1)
    errs = [abs(discretize_bath(sd, "linear-grid", n).moment(1) - ref) for n in (250, 500, 1000, 2000)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_coarse_grid_flagged():
    assert discretize_bath(SD_V, "linear-grid", 8).under_resolved
    assert not discretize_bath(SD_V, "gauss-quadrature", 2000).under_resolved


def test_discretize_deterministic():
    a = discretize_bath(SD_V, "log-grid", 300)
    b = discretize_bath(SD_V, "log-grid", 300)
    assert np.array_equal(a.omegas, b.omegas) and np.array_equal(a.weights, b.weights)


def test_response_zero_density():
    assert bath_response(SpectralDensityTL(0.0, 0.05), 10.0, 3.0) == 0


def test_response_conjugate_symmetry():
    for t in np.linspace(-30, 30, 50):
        a, b = bath_response(SD_V, 10.0, t), bath_response(SD_V, 10.0, -t)
        assert abs(a - np.conj(b)) < 1e-12


def test_response_imaginary_part_independent_of_beta():
    for t in (0.5, 3.0, 20.0):
        assert bath_response(SD_V, 1.0, t).imag == pytest.approx(
            bath_response(SD_V, 100.0, t).imag, abs=1e-13)


def test_response_zero_temperature_real_part():
    for t in (0.0, 2.0, 10.0):
        ref = integrate.quad(lambda w: float(SD_V(w)) * math.cos(w * t), 0, 5, limit=500,
                             epsabs=1e-14)[0] / math.pi
        assert bath_response(SD_V, math.inf, t).real == pytest.approx(ref, abs=1e-11)


def test_response_at_zero_two_tolerances():
    a = bath_response(SD_V, 10.0, 0.0, epsabs=1e-12, epsrel=1e-10)
    b = bath_response(SD_V, 10.0, 0.0, epsabs=1e-14, epsrel=1e-12)
    assert abs(a - b) < 1e-8
    coth = lambda w: 1 / math.tanh(5.0 * w)
    ref = integrate.quad(lambda w: float(SD_V(w)) * coth(w), 1e-12, 5, limit=500,
                         epsabs=1e-15, epsrel=1e-13)[0] / math.pi
    assert a.real == pytest.approx(ref, rel=1e-8)
    assert a.real == pytest.approx(0.0032358302461, rel=1e-9)  # frozen


def test_response_rejects_bad_input():
    with pytest.raises(ValueError):
        bath_response(SD_V, 10.0, math.inf)
    with pytest.raises(ValueError):
        bath_response(SD_V, -1.0, 1.0)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_response_quadrature_failure_carries_residual():
    with pytest.raises(QuadratureError) as exc:
        bath_response(SD_V, 10.0, 1e6, epsabs=1e-30, epsrel=1e-30, limit=3)
    assert exc.value.residual > 0


@pytest.mark.parametrize("Q", [0.01 + 0.3j, 1e-4 - 0.05j, 0.2 - 1.3j, 2.0 + 0j, 1e-3 - 4.9j])
def test_resolvent_matches_adaptive_quadrature(Q):
    h = thermal_weight(SD_V, 100.0)
    got = resolvent_integral(h, np.array([Q]), 5.0)[0]
    f = lambda w: float(h(w)) / (Q + 1j * w)
    pts = [min(max(-Q.imag, 1e-9), 5.0)]
    re = integrate.quad(lambda w: f(w).real, 0, 5, points=pts, limit=2000, epsabs=1e-13)[0]
    im = integrate.quad(lambda w: f(w).imag, 0, 5, points=pts, limit=2000, epsabs=1e-13)[0]
    assert abs(got - (re + 1j * im)) < 1e-7
