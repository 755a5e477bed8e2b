"""Command-line front end.

    tlfqubit run --scenario fig2 --engine both --out fig2.csv
    tlfqubit sweep --scenario fig1 --param T --values 1,5,10

Exit codes: 0 success, 2 configuration error, 3 engine error,
4 convergence failure with ``--require-converged``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

import numpy as np

from . import harness
from .config import ConfigError, RunConfig, parse_dkmax, validate_config, validate_values

OUT_DIR_ENV = "TLFQUBIT_OUT_DIR"

EXIT_OK, EXIT_CONFIG, EXIT_ENGINE, EXIT_CONVERGENCE = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tlfqubit", description="Qubit coupled to a two-level fluctuator "
                "in a bosonic bath: analytic and QUAPI dynamics.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="INI file; flags override its values")
        sp.add_argument("--scenario", help="preset name")
        sp.add_argument("--engine", choices=("analytic", "quapi", "both"))
        sp.add_argument("--out", help=f"output path (relative paths go under ${OUT_DIR_ENV})")
        sp.add_argument("--dt", type=float, help="QUAPI step in units of 1/delta_A")
        sp.add_argument("--dkmax", help="memory lengths, e.g. 1,2,3")
        sp.add_argument("--tmax", type=float, help="horizon in units of 1/delta_A")
        sp.add_argument("--threads", type=int, help="worker threads")
        sp.add_argument("--mem-budget", type=int, help="bytes allowed for the QUAPI tensor")
        sp.add_argument("--require-converged", action="store_true", default=None)

    run = sub.add_parser("run", help="run one scenario and write a CSV")
    common(run)
    sw = sub.add_parser("sweep", help="decoherence rates along a parameter sweep")
    common(sw)
    sw.add_argument("--param", choices=("T", "alpha", "g0"))
    sw.add_argument("--values", help="comma-separated values (T and g0 in delta_A units)")
    sw.add_argument("--dk", type=int, default=3, help="memory length for --engine quapi")
    return p


def _config_from_args(args) -> RunConfig:
    values = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError([f"cannot read config: {exc}"]) from exc
        import configparser
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError([f"unreadable config: {exc}"]) from exc
        validate_config(text)  # reports file-level violations on their own
        values = {s: dict(cp.items(s)) for s in cp.sections()}
    run = values.setdefault("run", {})
    quapi = values.setdefault("quapi", {})
    for flag, key in (("scenario", "scenario"), ("engine", "engine"), ("out", "out"),
                      ("threads", "threads"), ("mem_budget", "mem_budget")):
        v = getattr(args, flag)
        if v is not None:
            run[key] = str(v)
    if args.require_converged:
        run["require_converged"] = "true"
    for flag in ("dt", "dkmax", "tmax"):
        v = getattr(args, flag)
        if v is not None:
            quapi[flag] = repr(v) if isinstance(v, float) else str(v)
    return validate_values({k: v for k, v in values.items() if v or k == "run"})


def output_path(path: Optional[str], default_name: str) -> Optional[str]:
    base = os.environ.get(OUT_DIR_ENV)
    if path is None:
        if base is None:
            return None
        path = default_name
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    return path


def format_csv(result: harness.ScenarioResult) -> str:
    """t in units of 1/delta_A, 12 significant digits, '\\n' line endings."""
    cols = ["t"]
    data = [result.t * result.scenario.delta_A]
    if result.analytic is not None:
        cols.append("P_analytic")
        data.append(result.analytic)
    for dk in sorted(result.quapi):
        cols.append(f"P_quapi_dk{dk}")
        data.append(result.quapi[dk])
    lines = [",".join(cols)]
    for row in np.column_stack(data):
        lines.append(",".join(format(float(x), ".12g") for x in row))
    return "\n".join(lines) + "\n"


def _write(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_run(cfg: RunConfig) -> int:
    s = cfg.build_scenario()
    try:
        res = harness.run_scenario(s, cfg.engine, cfg.mem_budget, tol=cfg.agreement,
                                   threads=cfg.threads)
    except harness.EngineError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    _write(output_path(cfg.out, f"{s.name}.csv"), format_csv(res))
    rep = res.report
    summary = {"scenario": s.name, "converged": rep.converged,
               "max_abs_dev": {str(k): v for k, v in rep.max_abs_dev.items()},
               "rmse": {str(k): v for k, v in rep.rmse.items()},
               "envelope_rate": {k: (v if np.isfinite(v) else None)
                                 for k, v in rep.envelope_rate.items()}}
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    if cfg.require_converged and not rep.converged:
        print(f"scenario {s.name}: QUAPI not converged", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    values = None
    if args.values:
        try:
            values = [float(v) for v in args.values.split(",")]
        except ValueError:
            print(f"config error: bad --values {args.values!r}", file=sys.stderr)
            return EXIT_CONFIG
    engine = cfg.engine if cfg.engine != "both" else "analytic"
    try:
        res = harness.parameter_sweep(cfg.scenario, args.param, values, engine=engine,
                                      delta_k=args.dk, threads=cfg.threads)
    except ValueError as exc:
        if "sweep" in str(exc) or "cannot sweep" in str(exc):
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"engine error: scenario {cfg.scenario}: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except (ArithmeticError, MemoryError) as exc:
        print(f"engine error: scenario {cfg.scenario}: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    report = {"scenario": res.name, "param": res.param, "engine": res.engine,
              "values": list(res.values), "rates": list(res.rates), "trend": res.trend}
    _write(output_path(cfg.out, f"{res.name}_sweep.json"),
           json.dumps(report, indent=2) + "\n")
    if cfg.require_converged and res.trend == "none":
        return EXIT_CONVERGENCE
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run":
        return cmd_run(cfg)
    return cmd_sweep(cfg, args)


if __name__ == "__main__":
    sys.exit(main())
