import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import exact_population
from tlfqubit import harness as hn
from tlfqubit import operators as ops


@pytest.mark.parametrize("name,alpha,T,g0", [
    ("fig1", 0.3, 1.0, 0.2), ("fig1_textparams", 0.3, 1.0, 0.1), ("fig2", 0.01, 0.1, 0.2),
    ("fig3", 0.3, 0.1, 0.2), ("fig4", 0.01, 0.1, 0.2), ("fig5", 0.01, 0.1, 1.0)])
def test_presets_carry_scenario_parameters(name, alpha, T, g0):
    s = hn.make_scenario(name)
    p = s.params
    assert p.delta_A == p.delta_B == 0.1
    assert p.sd.alpha == alpha and p.sd.omega_d == 0.05 and p.sd.omega_l == 1.0
    assert p.g0 == pytest.approx(g0 * 0.1, rel=1e-15)
    assert p.beta == pytest.approx(1 / (T * 0.1), rel=1e-15)
    assert s.delta_t == pytest.approx(4.0) and s.delta_ks == (1, 2, 3)
    assert s.t_max == pytest.approx(400.0)
    assert np.allclose(np.diff(s.grid), s.delta_t)


def test_sweep_values():
    assert hn.PRESETS["fig1"].sweep_values == (1.0, 5.0, 10.0)
    assert hn.PRESETS["fig2"].sweep_values == (0.1, 1.0, 5.0)
    assert hn.PRESETS["fig3"].sweep_values == (0.3, 0.4, 0.5)
    assert hn.PRESETS["fig4"].sweep_values == (0.01, 0.02, 0.03)
    temps = [s.params.beta for s in hn.sweep_scenarios("fig2")]
    assert temps == pytest.approx([100.0, 10.0, 2.0])


def test_sweep_errors():
    with pytest.raises(ValueError):
        hn.sweep_scenarios("fig5")
    with pytest.raises(ValueError):
        hn.sweep_scenarios("fig2", "omega_d", [0.1])


def test_unknown_scenario():
    with pytest.raises(KeyError):
        hn.make_scenario("fig9")


def test_overrides_and_beta():
    s = hn.make_scenario("fig2", alpha=0.02, beta=7.0, t_max=8.0)
    assert s.params.sd.alpha == 0.02 and s.params.beta == 7.0 and s.n_steps == 20
    with pytest.raises(ValueError):
        hn.make_scenario("fig2", T=0.0)


@pytest.mark.parametrize("name", list(hn.PRESETS))
def test_config_round_trip_bit_exact(name):
    s = hn.make_scenario(name)
    back = hn.scenario_from_config(hn.scenario_to_config(s))
    assert back == s
    assert np.array_equal(back.grid, s.grid)


@given(st.floats(0.0, 0.5), st.floats(0.01, 20.0), st.floats(0.0, 1.5))
@settings(max_examples=40, deadline=None)
def test_config_round_trip_random(alpha, T, g0):
    s = hn.make_scenario("fig2", alpha=alpha, T=T, g0=g0)
    assert hn.scenario_from_config(hn.scenario_to_config(s)) == s


def test_report_invariant():
    with pytest.raises(ValueError):
        hn.ComparisonReport({1: 0.1}, {1: 0.2}, {}, True)
    hn.ComparisonReport({1: 0.2}, {1: 0.1}, {}, True)


def test_engine_argument():
    with pytest.raises(ValueError):
        hn.run_scenario(hn.make_scenario("null"), engine="exact")


def test_engine_error_carries_scenario():
    s = hn.make_scenario("fig2", delta_ks=(4,), t_max=8.0)
    with pytest.raises(hn.EngineError, match="fig2"):
        hn.run_scenario(s, engine="quapi", mem_budget=1000)


def test_null_scenario_is_free_cosine():
    r = hn.run_scenario(hn.make_scenario("null"))
    ref = np.cos(0.1 * r.t)
    assert np.max(np.abs(r.analytic - ref)) < 1e-4
    for P in r.quapi.values():
        assert np.max(np.abs(P - ref)) < 1e-4
    assert r.report.converged


def test_closed_scenario_both_engines():
    r = hn.run_scenario(hn.make_scenario("closed"))
    ref = exact_population(ops.bare_hamiltonian(0.1, 0.1, 0.02), r.t)
    assert np.max(np.abs(r.analytic - ref)) < 1e-4
    assert all(np.max(np.abs(P - ref)) < 1e-8 for P in r.quapi.values())


@pytest.fixture(scope="module")
def fig2_result():
    return hn.run_scenario(hn.make_scenario("fig2"))


def test_fig2_converged(fig2_result):
    rep = fig2_result.report
    assert rep.converged
    assert rep.max_abs_dev[3] < 0.05
    assert rep.max_abs_dev[1] > rep.max_abs_dev[2] > rep.max_abs_dev[3]
    for dk in (1, 2, 3):
        assert rep.max_abs_dev[dk] >= rep.rmse[dk] >= 0


def test_fig1_flagged_not_converged():
    assert not hn.run_scenario(hn.make_scenario("fig1")).report.converged


def test_quapi_only_falls_back_to_self_consistency():
    s = hn.make_scenario("fig2", delta_ks=(2, 3))
    r = hn.run_scenario(s, engine="quapi")
    assert r.analytic is None and r.report.max_abs_dev == {}
    d = np.max(np.abs(r.quapi[3] - r.quapi[2]))
    assert r.report.converged == (d <= 0.02)


def test_run_deterministic():
    s = hn.make_scenario("fig2", t_max=40.0)
    a, b = hn.run_scenario(s), hn.run_scenario(s)
    assert np.array_equal(a.analytic, b.analytic)
    assert all(np.array_equal(a.quapi[k], b.quapi[k]) for k in a.quapi)
    assert a.report.max_abs_dev == b.report.max_abs_dev and a.report.rmse == b.report.rmse


def test_threads_do_not_change_results():
    s = hn.make_scenario("fig2", t_max=40.0)
    a, b = hn.run_scenario(s, threads=1), hn.run_scenario(s, threads=3)
    assert np.array_equal(a.analytic, b.analytic)
    assert all(np.array_equal(a.quapi[k], b.quapi[k]) for k in a.quapi)


# --- decoherence rate --------------------------------------------------------------

def test_rate_of_pure_cosine():
    t = np.linspace(0, 200, 20001)
    assert abs(hn.decoherence_rate(t, np.cos(t), 2 * math.pi).rate) < 1e-3


def test_rate_of_damped_cosine():
    t = np.linspace(0, 100, 20001)
    fit = hn.decoherence_rate(t, np.exp(-0.1 * t) * np.cos(t), 2 * math.pi)
    assert fit.rate == pytest.approx(0.1, rel=0.05)
    assert fit.residual >= 0


@given(st.floats(0.001, 0.05), st.floats(0.5, 3.0))
@settings(max_examples=20, deadline=None)
def test_rate_synthetic_property(gamma, w):
    t = np.linspace(0, 40 * 2 * math.pi / w, 8001)
    fit = hn.decoherence_rate(t, np.exp(-gamma * t) * np.cos(w * t), 2 * math.pi / w)
    assert fit.rate == pytest.approx(gamma, rel=0.05)


def test_rate_of_beating_signal_uses_crests():
    t = np.linspace(0, 3000, 60001)
    P = np.exp(-0.002 * t) * (0.6 * np.cos(t) + 0.4 * np.cos(1.1 * t))
    fit = hn.decoherence_rate(t, P, 2 * math.pi)
    assert fit.crests
    assert fit.rate == pytest.approx(0.002, rel=0.05)


def test_rate_needs_enough_periods():
    t = np.linspace(0, 20, 2001)
    with pytest.raises(ValueError):
        hn.decoherence_rate(t, np.cos(t), 2 * math.pi)


def test_fig1_rate_drops_with_temperature():
    r = hn.temperature_sweep("fig1")
    assert r.rates[-1] < r.rates[0]
    assert r.trend == "decreasing"


def test_sweep_rejects_unknown_engine():
    with pytest.raises(ValueError):
        hn.parameter_sweep("fig2", values=[0.1, 1.0], engine="exact")


@pytest.mark.parametrize("alpha", [0.01, 0.03])
def test_weak_coupling_rates_agree_between_engines(alpha):
    # certifies the convention bridge: the influence functional uses pi * alpha(t);
    # dropping the pi changes the QUAPI rate by about pi
    s = hn.make_scenario("fig4", alpha=alpha)
    ra = hn._rate_of(s, "analytic", 3, hn.RATE_HORIZON)
    rq = hn._rate_of(s, "quapi", 3, hn.RATE_HORIZON)
    assert 1 / 1.5 < rq / ra < 1.5
    wrong = hn._rate_of(hn.make_scenario("fig4", alpha=alpha / math.pi), "quapi", 3,
                        hn.RATE_HORIZON)
    assert not 1 / 1.5 < wrong / ra < 1.5
