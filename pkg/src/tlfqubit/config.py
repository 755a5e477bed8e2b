"""Run configuration: a flat sectioned key-value file (INI syntax).

Sections and keys (all optional)::

    [run]
    scenario = fig2            ; preset name
    engine = both              ; analytic | quapi | both
    out = fig2.csv
    threads = 1
    mem_budget = 8589934592    ; bytes for the QUAPI tensor
    require_converged = false

    [model]                    ; overrides of the preset, energies in delta_A units
    alpha = 0.01
    T = 0.1
    g0 = 0.2
    delta_A = 0.1              ; in omega_l units
    delta_B = 0.1              ; in omega_l units
    omega_d = 0.05             ; in omega_l units

    [quapi]
    dt = 0.4                   ; in 1/delta_A
    dkmax = 1,2,3
    tmax = 40                  ; in 1/delta_A

    [tolerances]
    agreement = 0.05
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .harness import AGREEMENT_TOL, DEFAULT_SCENARIO, PRESETS, Scenario, make_scenario
from .quapi import DEFAULT_MEM_BUDGET, required_bytes

ENGINES = ("analytic", "quapi", "both")

SCHEMA: Dict[str, Tuple[str, ...]] = {
    "run": ("scenario", "engine", "out", "threads", "mem_budget", "require_converged"),
    "model": ("alpha", "T", "g0", "delta_A", "delta_B", "omega_d"),
    "quapi": ("dt", "dkmax", "tmax"),
    "tolerances": ("agreement",),
}

# config key -> Preset field
_PRESET_FIELD = {"alpha": "alpha", "T": "T", "g0": "g0", "delta_A": "delta_A",
                 "delta_B": "delta_B", "omega_d": "omega_d", "dt": "dt", "tmax": "t_max"}


class ConfigError(ValueError):
    def __init__(self, violations: List[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class RunConfig:
    scenario: str = DEFAULT_SCENARIO
    engine: str = "both"
    out: Optional[str] = None
    threads: int = 1
    mem_budget: int = DEFAULT_MEM_BUDGET
    require_converged: bool = False
    overrides: Dict[str, object] = field(default_factory=dict)
    agreement: float = AGREEMENT_TOL

    def build_scenario(self) -> Scenario:
        return make_scenario(self.scenario, **self.overrides)


def _parse_bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def parse_dkmax(v: str) -> Tuple[int, ...]:
    out = tuple(int(x) for x in str(v).split(",") if x.strip())
    if not out:
        raise ValueError("empty list")
    return out


def validate_values(values: Dict[str, Dict[str, str]]) -> RunConfig:
    """Check every key and value, collecting all violations before failing."""
    errs: List[str] = []
    for sec, keys in values.items():
        if sec not in SCHEMA:
            errs.append(f"unknown section [{sec}]")
            continue
        for k in keys:
            if k not in SCHEMA[sec]:
                errs.append(f"unknown key {k!r} in [{sec}]")

    run = values.get("run", {})
    kw: Dict[str, object] = {}
    scen = run.get("scenario", DEFAULT_SCENARIO)
    if scen not in PRESETS:
        errs.append(f"unknown scenario {scen!r} (known: {', '.join(PRESETS)})")
    kw["scenario"] = scen
    if "engine" in run:
        if run["engine"] not in ENGINES:
            errs.append(f"engine must be one of {', '.join(ENGINES)}")
        kw["engine"] = run["engine"]
    if "out" in run:
        kw["out"] = run["out"]
    for key, conv, positive in (("threads", int, True), ("mem_budget", int, True)):
        if key in run:
            try:
                val = conv(run[key])
                if positive and val <= 0:
                    raise ValueError
                kw[key] = val
            except ValueError:
                errs.append(f"{key} must be a positive integer, got {run[key]!r}")
    if "require_converged" in run:
        try:
            kw["require_converged"] = _parse_bool(run["require_converged"])
        except ValueError as exc:
            errs.append(f"require_converged: {exc}")

    overrides: Dict[str, object] = {}
    model = values.get("model", {})
    for key in SCHEMA["model"]:
        if key not in model:
            continue
        try:
            val = float(model[key])
        except ValueError:
            errs.append(f"{key} must be a number, got {model[key]!r}")
            continue
        nonneg = key in ("alpha", "g0")
        if not (val >= 0 if nonneg else val > 0) or val != val or val == float("inf"):
            errs.append(f"{key} must be {'non-negative' if nonneg else 'positive'}, got {val}")
            continue
        overrides[_PRESET_FIELD[key]] = val
    qp = values.get("quapi", {})
    for key in ("dt", "tmax"):
        if key in qp:
            try:
                val = float(qp[key])
                if not val > 0:
                    raise ValueError
                overrides[_PRESET_FIELD[key]] = val
            except ValueError:
                errs.append(f"{key} must be a positive number, got {qp[key]!r}")
    if "dkmax" in qp:
        try:
            dks = parse_dkmax(qp["dkmax"])
            if min(dks) < 1:
                raise ValueError
            overrides["delta_ks"] = dks
        except ValueError:
            errs.append(f"dkmax must be a comma-separated list of integers >= 1, got {qp['dkmax']!r}")

    tol = values.get("tolerances", {})
    if "agreement" in tol:
        try:
            val = float(tol["agreement"])
            if not val > 0:
                raise ValueError
            kw["agreement"] = val
        except ValueError:
            errs.append(f"agreement must be a positive number, got {tol['agreement']!r}")

    if scen in PRESETS:
        dks = overrides.get("delta_ks", PRESETS[scen].delta_ks)
        budget = kw.get("mem_budget", DEFAULT_MEM_BUDGET)
        if kw.get("engine", "both") != "analytic" and dks:
            need = required_bytes(max(dks))
            if need > budget:
                errs.append(f"delta_k_max = {max(dks)} needs {need} bytes for the QUAPI "
                            f"tensor, over the {budget}-byte budget")
        if not errs:
            try:
                make_scenario(scen, **overrides)
            except ValueError as exc:
                errs.append(str(exc))
    if errs:
        raise ConfigError(errs)
    return RunConfig(overrides=overrides, **kw)


def validate_config(text: str) -> RunConfig:
    """Parse and validate config text; raises ConfigError listing every violation."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys are case-sensitive (T vs t)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"unreadable config: {exc}"]) from exc
    if cp.defaults():
        raise ConfigError([f"unknown key {k!r} in [DEFAULT]" for k in cp.defaults()])
    values = {sec: dict(cp.items(sec)) for sec in cp.sections()}
    return validate_values(values)
