"""Command-line front end.

Commands: stationary, evolve, sweep, select, oracle1d, check, transform,
bounded.  Every command reads an experiment configuration file; a few
flags override the obvious knobs.  Exit status: 0 when all verdicts
pass, 2 on a verdict failure (the failing assertion is named), 1 on an
operational error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .config import parse_config
from .errors import NoisyflowError
from .evolution import evolve, fit_decay_rate, perturbed_initial
from .experiments import (
    STABILITY_HEADER,
    TRACE_HEADER,
    StationaryRow,
    SweepConfig,
    run_bounded_domain,
    run_selection,
    run_stability_sweep,
    run_transform_consistency,
)
from .fields import check_admissible
from .geometry import Circle, Interval
from .operator import assemble_for
from .reporting import atomic_write_text, fmt, write_csv
from .stationary import oracle_1d_circle, oracle_1d_interval, solve_stationary

COMMANDS = ("stationary", "evolve", "sweep", "select", "oracle1d", "check", "transform", "bounded")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisyflow",
        description="stationary densities and decay rates of randomly perturbed conservative flows",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="experiment configuration file")
    parser.add_argument("--out", default=None, help="output directory (overrides the config)")
    parser.add_argument("--eps", default=None, help="comma-separated descending epsilon override")
    parser.add_argument("--n", default=None, help="cells per axis override (int or 'nx,ny')")
    parser.add_argument("--dt", type=float, default=None, help="time step for evolve")
    parser.add_argument("--horizon", type=float, default=None, help="time horizon for evolve")
    parser.add_argument("--quiet", action="store_true", help="suppress non-error output")
    return parser


def _apply_overrides(cfg: SweepConfig, args) -> SweepConfig:
    changes = {}
    if args.out is not None:
        changes["out_dir"] = args.out
    if args.eps is not None:
        eps = tuple(float(p) for p in args.eps.split(",") if p.strip())
        changes["epsilons"] = eps
    if args.n is not None:
        changes["n"] = tuple(int(p) for p in args.n.split(",") if p.strip())
        if len(changes["n"]) == 1 and cfg.domain.dim == 2:
            changes["n"] = (changes["n"][0], changes["n"][0])
    return replace(cfg, **changes) if changes else cfg


def _say(quiet, *parts):
    if not quiet:
        print(*parts)


def _run_stationary(cfg: SweepConfig, args) -> int:
    grid = cfg.grid()
    system = cfg.system.build(grid)
    family = cfg.noise.build(grid, cfg.epsilons)
    rows = []
    for eps in cfg.epsilons:
        rep = solve_stationary(assemble_for(system, family, eps))
        l1 = float(np.sum(np.abs(rep.density.values - system.u0)) * grid.cell_volume)
        rows.append(StationaryRow(eps=eps, n=grid.n, report=rep, l1_to_u0=l1))
        _say(args.quiet, f"eps={eps:g}: min={rep.min_u:.6g} max={rep.max_u:.6g} "
                         f"residual={rep.residual:.3g} l1_to_u0={l1:.6g}")
    if cfg.out_dir:
        write_csv(
            os.path.join(cfg.out_dir, "stationary.csv"),
            STABILITY_HEADER,
            [(r.eps, "x".join(map(str, r.n)), r.report.min_u, r.report.max_u,
              r.report.w12_seminorm, r.report.residual, r.l1_to_u0) for r in rows],
        )
    return 0


def _run_evolve(cfg: SweepConfig, args) -> int:
    if args.dt is not None and args.dt <= 0:
        raise NoisyflowError("dt must be positive")
    if args.horizon is not None and args.horizon <= 0:
        raise NoisyflowError("horizon must be positive")
    grid = cfg.grid()
    system = cfg.system.build(grid)
    family = cfg.noise.build(grid, cfg.epsilons)
    eps = cfg.epsilons[0]
    scale = 1.0 / (eps * eps * cfg.rate_guess)
    dt = args.dt if args.dt is not None else cfg.dt_factor * scale
    horizon = args.horizon if args.horizon is not None else cfg.horizon_factor * scale
    op = assemble_for(system, family, eps)
    stationary = solve_stationary(op).density
    trace, _ = evolve(op, perturbed_initial(stationary), horizon, dt, stationary=stationary)
    fit = fit_decay_rate(trace)
    _say(args.quiet, f"eps={eps:g}: fitted rate {fit.rate:.6g} "
                     f"(rate/eps^2 = {fit.rate_over_eps2:.6g}, r^2 = {fit.r_squared:.4f})")
    if cfg.out_dir:
        write_csv(
            os.path.join(cfg.out_dir, "trace.csv"),
            TRACE_HEADER,
            list(zip(trace.times, trace.chi2, trace.mass_drift, trace.min_v)),
        )
    return 0


def _run_oracle1d(cfg: SweepConfig, args) -> int:
    grid = cfg.grid()
    system = cfg.system.build(grid)
    family = cfg.noise.build(grid, cfg.epsilons)
    eps = cfg.epsilons[0]
    if isinstance(grid.kind, Circle):
        u, c_eps = oracle_1d_circle(system.drift, family.a0(eps), family.ai(eps), eps, grid)
        summary = f"oracle1d circle: eps={eps:g} C_eps={fmt(float(c_eps))}\n"
    elif isinstance(grid.kind, Interval):
        u = oracle_1d_interval(system.drift, family.a0(eps), family.ai(eps), eps, grid)
        summary = f"oracle1d interval: eps={eps:g} (zero stationary flux)\n"
    else:
        raise NoisyflowError("oracle1d needs a circle or interval domain")
    xs = grid.cell_centers()[:, 0]
    if cfg.out_dir:
        write_csv(os.path.join(cfg.out_dir, "oracle.csv"), ["x", "u", "u0"],
                  list(zip(xs, u, system.u0)))
        atomic_write_text(os.path.join(cfg.out_dir, "oracle_summary.txt"), summary)
    _say(args.quiet, summary.strip())
    return 0


def _run_check(cfg: SweepConfig, args) -> int:
    grid = cfg.grid()
    family = cfg.noise.build(grid, cfg.epsilons)
    p = cfg.admissibility_p if cfg.admissibility_p is not None else float(grid.dim + 2)
    report = check_admissible(family, grid, p=p)
    _say(args.quiet, f"sup norm bound: {report.sup_norm_bound:.6g}")
    _say(args.quiet, f"ellipticity constant: {report.lam:.6g} "
                     f"(threshold {report.lambda_threshold:g})")
    _say(args.quiet, f"(A1) integrability: {'PASS' if report.passes_A1 else 'FAIL'}")
    _say(args.quiet, f"(A2) ellipticity:  {'PASS' if report.passes_A2 else 'FAIL'}")
    return 0 if (report.passes_A1 and report.passes_A2) else 2


def _run_experiment(runner, cfg: SweepConfig, args) -> int:
    report = runner(cfg)
    for name, passed in report.verdicts.items():
        _say(args.quiet, f"[{'PASS' if passed else 'FAIL'}] {name}")
    if not report.passed():
        failing = ", ".join(name for name, ok in report.verdicts.items() if not ok)
        print(f"verdict failure: {failing}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        cfg = _apply_overrides(cfg, args)
        if args.command == "stationary":
            return _run_stationary(cfg, args)
        if args.command == "evolve":
            return _run_evolve(cfg, args)
        if args.command == "oracle1d":
            return _run_oracle1d(cfg, args)
        if args.command == "check":
            return _run_check(cfg, args)
        if args.command == "sweep":
            return _run_experiment(run_stability_sweep, cfg, args)
        if args.command == "select":
            return _run_experiment(run_selection, cfg, args)
        if args.command == "transform":
            return _run_experiment(run_transform_consistency, cfg, args)
        return _run_experiment(run_bounded_domain, cfg, args)
    except (NoisyflowError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
