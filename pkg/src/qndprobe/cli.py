"""Configuration-driven command line front end.

Six subcommands (algebra-check, oracle-compare, sweep, suppression, impact,
montecarlo) share a --config JSON file whose keys are validated fail-closed;
explicit flags override file values.  Every run writes a CSV with a header
row and a '#'-prefixed metadata footer, plus a key-value run manifest
alongside.  Exit codes: 0 success, 1 numerical failure (NaN/Inf or PSD
violation), 2 validation failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .experiment import (
    G1_REFERENCE,
    NL_REFERENCE,
    dropped_terms_impact,
    fit_linear_quadratic,
    g2_from_impact,
    monte_carlo_sample,
    projection_noise_line,
    sweep_atom_number,
    quadratic_suppression_curve,
)
from .gaussian import CouplingParams, PulseSchedule, run_schedule
from .operators import build_spin_operators, commutator
from .oracle import oracle_vs_gaussian

DEFAULT_SEED = 20100401

MODES = ("algebra-check", "oracle-compare", "sweep", "suppression", "impact", "montecarlo")


@dataclass
class RunConfig:
    mode: str
    out: str = "qndprobe_out.csv"
    seed: int = DEFAULT_SEED
    g1: float = G1_REFERENCE
    g2: float | None = None
    nl_total: float = NL_REFERENCE
    na: float = 1.0e6
    f: float = 1.0
    schedule: str = "decoupled"
    p: int = 5
    num_pulses: int | None = None
    na_min: float = 1.0e4
    na_max: float = 2.0e6
    na_points: int = 20
    p_values: tuple = (1, 2, 5)
    n_ph: int = 4
    oracle_na: int = 2
    tilt: float = 0.4
    tilt_phase: float = 0.3
    trials: int = 100_000
    scattering_eps: float = 0.0
    include_dropped_terms: bool = False
    f_values: tuple = (0.5, 1.0, 1.5, 2.0)

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.schedule not in ("naive", "decoupled"):
            raise ValueError(f"schedule must be 'naive' or 'decoupled', got {self.schedule!r}")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.na_points < 1 or self.na_min <= 0 or self.na_max < self.na_min:
            raise ValueError("invalid atom-number range")
        if self.trials < 2:
            raise ValueError("trials must be >= 2")
        if int(self.seed) != self.seed:
            raise ValueError("seed must be an integer")


_CONFIG_KEYS = {f.name for f in fields(RunConfig)} - {"mode"}


def _load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return data


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qndprobe",
        description="Pulsed QND probing of large-spin ensembles: checks, sweeps and fits.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        s = sub.add_parser(mode)
        s.add_argument("--config", type=str, default=None, help="JSON config file")
        s.add_argument("--out", type=str, default=None, help="output CSV path")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--p", type=int, default=None, help="decoupling order")
        s.add_argument("--mode", dest="schedule", choices=["naive", "decoupled"], default=None)
        s.add_argument("--g1", type=float, default=None)
        s.add_argument("--g2", type=float, default=None)
        s.add_argument("--nl", dest="nl_total", type=float, default=None, help="total photon budget")
        s.add_argument("--na", type=float, default=None, help="atom number")
        s.add_argument("--f", type=float, default=None, help="atomic spin")
        s.add_argument("--pulses", dest="num_pulses", type=int, default=None,
                       help="pulse count for naive trains")
        s.add_argument("--na-min", dest="na_min", type=float, default=None)
        s.add_argument("--na-max", dest="na_max", type=float, default=None)
        s.add_argument("--na-points", dest="na_points", type=int, default=None)
        s.add_argument("--p-values", dest="p_values", type=str, default=None,
                       help="comma-separated decoupling orders")
        s.add_argument("--n-ph", dest="n_ph", type=int, default=None, help="photons per oracle pulse")
        s.add_argument("--oracle-na", dest="oracle_na", type=int, default=None)
        s.add_argument("--trials", type=int, default=None)
        s.add_argument("--eps", dest="scattering_eps", type=float, default=None)
        s.add_argument("--dropped", dest="include_dropped_terms", action="store_const",
                       const=True, default=None, help="enable the dropped tensor terms")
    return parser


def parse_config(argv=None) -> RunConfig:
    """Merge defaults, config-file values and flags (flags win) into a RunConfig."""
    args = _build_parser().parse_args(argv)
    values: dict = {}
    if args.config:
        values.update(_load_config_file(args.config))
    for key in _CONFIG_KEYS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = flag_value
    if isinstance(values.get("p_values"), str):
        values["p_values"] = tuple(int(x) for x in values["p_values"].split(","))
    if "p_values" in values:
        values["p_values"] = tuple(int(x) for x in values["p_values"])
    if "f_values" in values:
        values["f_values"] = tuple(float(x) for x in values["f_values"])
    config = RunConfig(mode=args.mode, **values)
    config.validate()
    return config


def _schedule_from_config(config: RunConfig) -> PulseSchedule:
    if config.schedule == "decoupled":
        return PulseSchedule.decoupled(config.p)
    n = config.num_pulses if config.num_pulses is not None else 2 * config.p
    return PulseSchedule.naive(n)


def _params_from_config(config: RunConfig, schedule: PulseSchedule, na: float) -> CouplingParams:
    g2 = g2_from_impact(g1=config.g1) if config.g2 is None else config.g2
    return CouplingParams(
        g1=config.g1,
        g2=g2,
        photons_per_pulse=config.nl_total / len(schedule),
        num_pulses=len(schedule),
        atom_number=na,
        f=config.f,
        scattering_eps=config.scattering_eps,
        include_dropped_terms=config.include_dropped_terms,
    )


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_output(config: RunConfig, header: list, rows: list, footer: list):
    for row in rows:
        for cell in row:
            if isinstance(cell, float) and not math.isfinite(cell):
                raise ArithmeticError("non-finite value in output")
    out_path = Path(config.out)
    lines = [",".join(header)]
    lines += [",".join(_fmt(c) for c in row) for row in rows]
    lines += [f"# {line}" for line in footer]
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    manifest = [f"{f.name} = {getattr(config, f.name)}" for f in fields(RunConfig)]
    manifest.append(f"version = {__version__}")
    manifest.append(f"timestamp = {datetime.datetime.now(datetime.timezone.utc).isoformat()}")
    Path(str(out_path) + ".manifest").write_text("\n".join(manifest) + "\n", encoding="utf-8")


def _run_algebra_check(config: RunConfig) -> tuple[list, list, list]:
    header = ["f", "max_commutator_residual", "max_identity_residual", "max_hermiticity_residual"]
    rows = []
    worst = 0.0
    for f in config.f_values:
        ops = build_spin_operators(f)
        comm = max(
            np.max(np.abs(commutator(ops.jz, ops.jx) - 1j * ops.jy)),
            np.max(np.abs(commutator(ops.jy, ops.jz) - 1j * ops.jx)),
            np.max(np.abs(commutator(ops.jx, ops.jy) - 1j * ops.jxy)),
        )
        f2 = f * (f + 1)
        ident = np.max(np.abs(
            ops.jxy - ops.fz @ (f2 * np.eye(ops.dim) - ops.fz @ ops.fz - 0.5 * np.eye(ops.dim))
        ))
        herm = max(
            np.max(np.abs(op - op.conj().T))
            for op in (ops.fx, ops.fy, ops.fz, ops.jx, ops.jy, ops.jz, ops.jxy)
        )
        worst = max(worst, comm, ident, herm)
        rows.append([f, float(comm), float(ident), float(herm)])
    footer = [f"max_residual = {_fmt(float(worst))}", "tolerance = 1e-12"]
    if worst >= 1e-12:
        raise ArithmeticError(f"operator algebra residual {worst:.3e} exceeds 1e-12")
    return header, rows, footer


def _run_oracle_compare(config: RunConfig) -> tuple[list, list, list]:
    schedule = _schedule_from_config(config)
    report = oracle_vs_gaussian(
        na=config.oracle_na, f=config.f, n_ph=config.n_ph,
        g1=config.g1, g2=0.0 if config.g2 is None else config.g2,
        schedule=schedule, tilt=config.tilt, phase=config.tilt_phase,
    )
    header = ["pulse", "d_jz_mean", "d_jy_mean", "d_meter_mean", "d_meter_var"]
    rows = [
        [i + 1, report.d_jz[i], report.d_jy[i], report.d_meter_mean[i], report.d_meter_var[i]]
        for i in range(len(report.d_jz))
    ]
    footer = [f"max_first_moment_deviation = {_fmt(report.max_first_moment_deviation)}"]
    return header, rows, footer


def _run_sweep(config: RunConfig) -> tuple[list, list, list]:
    schedule = _schedule_from_config(config)
    na_values = list(np.geomspace(config.na_min, config.na_max, config.na_points))
    params = _params_from_config(config, schedule, na_values[0])
    rows_data = sweep_atom_number(params, na_values, schedule)
    header = ["na", "mode", "p", "normalized_meter_var", "projection_line"]
    rows = [
        [r.na, r.mode, r.p if r.p is not None else 0, r.normalized_meter_var,
         projection_noise_line(params.g1, config.nl_total, r.na, config.f)]
        for r in rows_data
    ]
    fit = fit_linear_quadratic(rows_data)
    footer = [
        f"c0 = {_fmt(fit.c0)}",
        f"c1 = {_fmt(fit.c1)}",
        f"c2 = {_fmt(fit.c2)}",
        f"residual_rms = {_fmt(fit.residual_rms)}",
    ]
    return header, rows, footer


def _run_suppression(config: RunConfig) -> tuple[list, list, list]:
    schedule = PulseSchedule.decoupled(config.p_values[0])
    params = _params_from_config(config, schedule, config.na)
    na_values = list(np.geomspace(config.na_min, config.na_max, config.na_points))
    points = quadratic_suppression_curve(params, list(config.p_values), na_values)
    header = ["p", "c2"]
    rows = [[pt.p, pt.c2] for pt in points]
    footer = ["quadratic coefficient of the decoupled sweep vs decoupling order"]
    return header, rows, footer


def _run_impact(config: RunConfig) -> tuple[list, list, list]:
    schedule = _schedule_from_config(config)
    params = _params_from_config(config, schedule, config.na)
    rel = dropped_terms_impact(params, schedule)
    header = ["na", "mode", "p", "relative_var_jz_increase"]
    rows = [[config.na, schedule.mode, schedule.p if schedule.p else 0, rel]]
    footer = ["relative increase of final var(Jz) with the dropped terms enabled"]
    return header, rows, footer


def _run_montecarlo(config: RunConfig) -> tuple[list, list, list]:
    schedule = _schedule_from_config(config)
    params = _params_from_config(config, schedule, config.na)
    mc = monte_carlo_sample(params, schedule, trials=config.trials, seed=config.seed)
    analytic = run_schedule(params, schedule).meter_var
    header = ["trials", "sampled_meter_var", "stderr", "analytic_meter_var"]
    rows = [[mc.trials, mc.meter_variance, mc.stderr, analytic]]
    footer = [f"seed = {config.seed}"]
    return header, rows, footer


_RUNNERS = {
    "algebra-check": _run_algebra_check,
    "oracle-compare": _run_oracle_compare,
    "sweep": _run_sweep,
    "suppression": _run_suppression,
    "impact": _run_impact,
    "montecarlo": _run_montecarlo,
}


def run(config: RunConfig) -> int:
    """Execute one validated configuration; returns the process exit code."""
    try:
        header, rows, footer = _RUNNERS[config.mode](config)
        _write_output(config, header, rows, footer)
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    try:
        config = parse_config(argv)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
