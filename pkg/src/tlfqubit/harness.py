"""Scenario presets, engine comparison and decoherence metrics."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import find_peaks

from . import mastereq, quapi
from .bath import SpectralDensityTL
from .polaron import ModelParams

AGREEMENT_TOL = 0.05
RATE_HORIZON = 200.0  # in units of 1/delta_A


@dataclass(frozen=True)
class Preset:
    """Figure parameter set; temperatures and couplings in units of delta_A."""
    name: str
    alpha: float
    T: float
    g0: float
    sweep_param: Optional[str] = None
    sweep_values: Tuple[float, ...] = ()
    delta_A: float = 0.1
    delta_B: float = 0.1
    omega_d: float = 0.05
    omega_l: float = 1.0
    dt: float = 0.4
    delta_ks: Tuple[int, ...] = (1, 2, 3)
    t_max: float = 40.0
    description: str = ""


PRESETS: Dict[str, Preset] = {p.name: p for p in [
    Preset("fig1", 0.3, 1.0, 0.2, "T", (1.0, 5.0, 10.0),
           description="alpha = 0.3, temperature sweep"),
    Preset("fig1_textparams", 0.3, 1.0, 0.1, "T", (1.0, 5.0, 10.0),
           description="fig1 with g0 = 0.1 delta_A"),
    Preset("fig2", 0.01, 0.1, 0.2, "T", (0.1, 1.0, 5.0),
           description="alpha = 0.01, temperature sweep"),
    Preset("fig3", 0.3, 0.1, 0.2, "alpha", (0.3, 0.4, 0.5),
           description="T = 0.1 delta_A, strong bath coupling sweep"),
    Preset("fig4", 0.01, 0.1, 0.2, "alpha", (0.01, 0.02, 0.03),
           description="T = 0.1 delta_A, weak bath coupling sweep"),
    Preset("fig5", 0.01, 0.1, 1.0, description="g0 = delta_A, alpha = 0.01"),
    Preset("null", 0.0, 0.1, 0.0, description="bath and fluctuator off"),
    Preset("closed", 0.0, 0.1, 0.2, description="bath off"),
]}

DEFAULT_SCENARIO = "fig2"


@dataclass(frozen=True)
class Scenario:
    """One runnable parameter point; times in units of 1/omega_l."""
    name: str
    params: ModelParams
    delta_t: float
    delta_ks: Tuple[int, ...]
    n_steps: int
    t_max: float
    grid: np.ndarray = field(compare=False)
    preset: Optional[Preset] = field(default=None, compare=False)

    def __post_init__(self):
        g = self.grid
        if g.ndim != 1 or len(g) < 2 or not np.allclose(np.diff(g), g[1] - g[0]):
            raise ValueError("scenario grid must be uniform")

    @property
    def delta_A(self) -> float:
        return self.params.delta_A


def make_scenario(name: str, **overrides) -> Scenario:
    """Build a scenario from a preset; overrides use the Preset field names.

    Additional override ``beta`` (in 1/omega_l) replaces the preset temperature.
    """
    if name not in PRESETS:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(PRESETS)}")
    beta = overrides.pop("beta", None)
    p = replace(PRESETS[name], **overrides)
    dA = p.delta_A
    if beta is None:
        if not p.T > 0:
            raise ValueError("temperature must be positive")
        beta = 1.0 / (p.T * dA)
    params = ModelParams(dA, p.delta_B, p.g0 * dA, SpectralDensityTL(p.alpha, p.omega_d, p.omega_l),
                         beta)
    dt = p.dt / dA
    n = int(round(p.t_max / p.dt))
    if n < 1:
        raise ValueError("t_max must cover at least one time step")
    grid = dt * np.arange(n + 1)
    return Scenario(name, params, dt, tuple(sorted(p.delta_ks)), n, n * dt, grid, p)


def sweep_scenarios(name: str, param: Optional[str] = None,
                    values: Optional[Sequence[float]] = None, **overrides) -> List[Scenario]:
    p = PRESETS[name]
    param = param or p.sweep_param
    values = tuple(values) if values is not None else p.sweep_values
    if param is None or not values:
        raise ValueError(f"scenario {name!r} has no sweep; pass param and values")
    key = {"T": "T", "alpha": "alpha", "g0": "g0"}.get(param)
    if key is None:
        raise ValueError(f"cannot sweep {param!r}; use T, alpha or g0")
    return [make_scenario(name, **{**overrides, key: float(v)}) for v in values]


# --- serialization -----------------------------------------------------------

def scenario_to_config(s: Scenario) -> Dict[str, Dict[str, str]]:
    """Flat sectioned representation; floats via repr so they round-trip exactly."""
    prm = s.params
    sd = prm.sd
    return {
        "run": {"scenario": s.name},
        "model": {"delta_A": repr(prm.delta_A), "delta_B": repr(prm.delta_B),
                  "g0": repr(prm.g0), "alpha": repr(sd.alpha), "omega_d": repr(sd.omega_d),
                  "omega_l": repr(sd.omega_l), "beta": repr(prm.beta)},
        "quapi": {"dt": repr(s.delta_t), "dkmax": ",".join(str(d) for d in s.delta_ks),
                  "steps": str(s.n_steps)},
    }


def scenario_from_config(cfg: Dict[str, Dict[str, str]]) -> Scenario:
    m, q = cfg["model"], cfg["quapi"]
    sd = SpectralDensityTL(float(m["alpha"]), float(m["omega_d"]), float(m["omega_l"]))
    params = ModelParams(float(m["delta_A"]), float(m["delta_B"]), float(m["g0"]), sd,
                         float(m["beta"]))
    dt, n = float(q["dt"]), int(q["steps"])
    dks = tuple(int(x) for x in q["dkmax"].split(","))
    name = cfg["run"]["scenario"]
    return Scenario(name, params, dt, dks, n, n * dt, dt * np.arange(n + 1), PRESETS.get(name))


# --- comparison ----------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonReport:
    max_abs_dev: Dict[int, float]
    rmse: Dict[int, float]
    envelope_rate: Dict[str, float]
    converged: bool

    def __post_init__(self):
        for dk, m in self.max_abs_dev.items():
            if not m >= self.rmse[dk] >= 0:
                raise ValueError("need max_abs_dev >= rmse >= 0")


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    t: np.ndarray
    analytic: Optional[np.ndarray]
    quapi: Dict[int, np.ndarray]
    report: ComparisonReport


class EngineError(RuntimeError):
    """Engine failure with scenario context."""


def _envelope_or_nan(t, P, period) -> float:
    # scenario horizons are short, so accept fewer periods than a sweep would
    try:
        return decoherence_rate(t, P, period, min_periods=5).rate
    except ValueError:
        return float("nan")


def run_scenario(s: Scenario, engine: str = "both", mem_budget: int = quapi.DEFAULT_MEM_BUDGET,
                 progress: Optional[Callable[[int, int], None]] = None,
                 tol: float = AGREEMENT_TOL, threads: int = 1) -> ScenarioResult:
    """Run the requested engines on the scenario grid and compare them.

    ``converged`` holds when the deviation from the analytic curve shrinks
    with every increase of delta_k and ends below ``tol``.  Without both
    engines it falls back to the delta_k = 2 -> 3 self-consistency test.
    """
    if engine not in ("analytic", "quapi", "both"):
        raise ValueError(f"engine must be analytic, quapi or both, not {engine!r}")
    t = s.grid

    def do_analytic():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            return mastereq.population_difference(t, s.params).P

    def do_quapi(dk):
        res = quapi.run(s.params, s.delta_t, dk, s.n_steps, mem_budget, progress)
        return np.interp(t, res.t, res.P)

    jobs = []
    if engine in ("analytic", "both"):
        jobs.append(("analytic", do_analytic))
    if engine in ("quapi", "both"):
        jobs += [(dk, (lambda dk=dk: do_quapi(dk))) for dk in s.delta_ks]
    try:
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                outs = list(ex.map(lambda j: j[1](), jobs))
        else:
            outs = [j[1]() for j in jobs]
    except (quapi.MemoryBudgetError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise EngineError(f"scenario {s.name}: {exc}") from exc
    results = dict(zip([j[0] for j in jobs], outs))
    analytic = results.pop("analytic", None)
    qres = {int(k): v for k, v in results.items()}

    period = 2 * math.pi / s.delta_A
    rates = {}
    if analytic is not None:
        rates["analytic"] = _envelope_or_nan(t, analytic, period)
    for dk, P in qres.items():
        rates[f"quapi_dk{dk}"] = _envelope_or_nan(t, P, period)
    max_dev, rmse = {}, {}
    if analytic is not None:
        for dk, P in qres.items():
            d = P - analytic
            max_dev[dk] = float(np.max(np.abs(d)))
            rmse[dk] = float(np.sqrt(np.mean(d * d)))
    converged = True
    dks = sorted(qres)
    if max_dev:
        devs = [max_dev[d] for d in dks]
        converged = devs[-1] < tol and all(b <= a for a, b in zip(devs, devs[1:]))
    elif len(dks) > 1:
        converged = float(np.max(np.abs(qres[dks[-1]] - qres[dks[-2]]))) <= 0.02
    return ScenarioResult(s, t, analytic, qres, ComparisonReport(max_dev, rmse, rates, converged))


# --- decoherence rate -----------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    rate: float
    residual: float
    n_points: int
    crests: bool  # True when fitted on the crests of a beating envelope


def decoherence_rate(t, P, period: float, min_periods: int = 10) -> RateFit:
    """Gamma of A exp(-Gamma t) fitted to the envelope of |P(t)|.

    The envelope is the maximum of |P| in consecutive windows of one
    ``period``.  When the envelope beats (three or more crests), only the
    crests are fitted so the beat does not bias the slope.
    """
    t = np.asarray(t, dtype=float)
    P = np.asarray(P, dtype=float)
    dt = t[1] - t[0]
    n = int(round(period / dt))
    m = len(P) // n if n > 0 else 0
    if n < 2 or m < min_periods:
        raise ValueError(f"need at least {min_periods} periods sampled twice per period, "
                         f"got {m}")
    A = np.abs(P[:m * n]).reshape(m, n)
    idx = A.argmax(axis=1)
    env = A[np.arange(m), idx]
    te = t[:m * n].reshape(m, n)[np.arange(m), idx]
    if np.any(env <= 0):
        raise ValueError("envelope touches zero")
    crests, _ = find_peaks(env, prominence=1e-3 * env.max())
    use_crests = len(crests) >= 3
    sel = crests if use_crests else np.arange(m)
    if len(sel) < 3:
        raise ValueError("too few envelope peaks to fit a rate")
    coef, res, *_ = np.polyfit(te[sel], np.log(env[sel]), 1, full=True)
    residual = float(np.sqrt(res[0] / len(sel))) if len(res) else 0.0
    return RateFit(float(-coef[0]), residual, len(sel), use_crests)


@dataclass(frozen=True)
class SweepResult:
    name: str
    param: str
    values: Tuple[float, ...]
    rates: Tuple[float, ...]
    engine: str
    trend: str  # "increasing", "decreasing" or "none"


def _trend(rates: Sequence[float]) -> str:
    d = np.diff(rates)
    if np.all(d > 0):
        return "increasing"
    if np.all(d < 0):
        return "decreasing"
    return "none"


def _rate_of(s: Scenario, engine: str, delta_k: int, horizon: float) -> float:
    t_max = horizon / s.delta_A
    period = 2 * math.pi / s.delta_A
    if engine == "analytic":
        t = np.linspace(0.0, t_max, int(round(t_max / (0.025 / s.delta_A))) + 1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            P = mastereq.population_difference(t, s.params).P
        return decoherence_rate(t, P, period).rate
    if engine == "quapi":
        N = int(round(t_max / s.delta_t))
        res = quapi.run(s.params, s.delta_t, delta_k, N)
        t = np.linspace(0.0, res.t[-1], 4 * N + 1)
        return decoherence_rate(t, np.interp(t, res.t, res.P), period).rate
    raise ValueError(f"engine must be analytic or quapi, not {engine!r}")


def parameter_sweep(name: str, param: Optional[str] = None,
                    values: Optional[Sequence[float]] = None, engine: str = "analytic",
                    delta_k: int = 3, horizon: float = RATE_HORIZON,
                    threads: int = 1) -> SweepResult:
    """Decoherence rates along a sweep; ``horizon`` in units of 1/delta_A."""
    p = PRESETS[name]
    param = param or p.sweep_param
    values = tuple(float(v) for v in (values if values is not None else p.sweep_values))
    scen = sweep_scenarios(name, param, values)
    job = lambda s: _rate_of(s, engine, delta_k, horizon)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rates = tuple(ex.map(job, scen))
    else:
        rates = tuple(job(s) for s in scen)
    return SweepResult(name, param, values, rates, engine, _trend(rates))


def temperature_sweep(name: str, values: Optional[Sequence[float]] = None,
                      **kw) -> SweepResult:
    return parameter_sweep(name, "T", values, **kw)


def coupling_sweep(name: str, values: Optional[Sequence[float]] = None, **kw) -> SweepResult:
    return parameter_sweep(name, "alpha", values, **kw)
