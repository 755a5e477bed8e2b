import math
import warnings

import numpy as np
import pytest

from tlfqubit.laplace import AccuracyWarning, ContourSpec, invert_laplace


def test_contour_validation():
    with pytest.raises(ValueError):
        ContourSpec(0.0, 1.0, 100)
    with pytest.raises(ValueError):
        ContourSpec(0.1, 1.0, 2)


def test_contour_for_horizon_alias_beyond_horizon():
    c = ContourSpec.for_horizon(50.0, 10.0)
    assert c.alias_period >= 20 * 50.0 * 0.99
    assert c.sigma == pytest.approx(1 / 50.0)


def test_rejects_bad_grid():
    F = lambda P: 1 / (P + 1)
    with pytest.raises(ValueError):
        invert_laplace(F, [0.0, 1.0, 3.0])
    with pytest.raises(ValueError):
        invert_laplace(F, [-1.0, 0.0])


@pytest.mark.parametrize("a", [0.1, 1.0, 3.0])
def test_exponential_pair(a):
    t = np.linspace(0, 10 / a, 401)
    inv = invert_laplace(lambda P: 1 / (P + a), t, omega_max=40 * a)
    assert np.max(np.abs(inv.values - np.exp(-a * t))) < 1e-6


def test_step_pair():
    t = np.linspace(0, 50, 501)
    inv = invert_laplace(lambda P: 1 / P, t, omega_max=10.0)
    assert np.max(np.abs(inv.values[1:] - 1)) < 1e-4


@pytest.mark.parametrize("a,w", [(0.05, 1.0), (0.3, 2.0)])
def test_damped_cosine_pair(a, w):
    t = np.linspace(0, 60, 601)
    F = lambda P: (P + a) / ((P + a) ** 2 + w * w)
    inv = invert_laplace(F, t, omega_max=40 * w)
    assert np.max(np.abs(inv.values - np.exp(-a * t) * np.cos(w * t))) < 1e-6


def test_non_decaying_integrand_warns_with_tail():
    t = np.linspace(0, 10, 101)
    with pytest.warns(AccuracyWarning, match="remainder"):
        inv = invert_laplace(lambda P: np.exp(-P * 0.0) * np.sin(P.imag * 3), t,
                             omega_max=5.0, asymptotics=[0.0, 0.0, 0.0, 0.0])
    assert inv.truncation_error > 1e-4


def test_decaying_integrand_is_quiet():
    t = np.linspace(0, 20, 201)
    with warnings.catch_warnings():
        warnings.simplefilter("error", AccuracyWarning)
        inv = invert_laplace(lambda P: 1 / (P + 0.5), t)
    assert inv.truncation_error < 1e-4


def test_offset_grid_matches_full_grid():
    F = lambda P: 1 / (P + 0.2)
    full = invert_laplace(F, np.linspace(0, 20, 201)).values
    part = invert_laplace(F, np.linspace(10, 20, 101),
                          contour=ContourSpec.for_horizon(20, 10.0)).values
    assert np.max(np.abs(full[100:] - part)) < 1e-6
