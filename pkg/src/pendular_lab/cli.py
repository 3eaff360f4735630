"""Command-line front end.

Subcommands: test-a test-b test-c test-e kink prefactor floor qp-solve
ocp-solve report.  Exit codes: 0 success, 2 configuration error, 3 solver
failure (diagnostics file written under --out), 64 unknown subcommand.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, forceqp, harness, ocp
from .config import ConfigError, RunConfig, load_config

USAGE = """usage: pendular-lab <subcommand> [options]

subcommands:
  test-a      point-mass trajectory sweep (moment-rate collapse)
  test-b      four-foot per-step QP sweep vs foot-span constant
  test-c      two-foot per-step QP sweep vs geometric floor
  test-e      ZMP identity deviation on the trajectory solution
  kink        fore-aft acceleration sweep around the critical acceleration
  prefactor   tracking-weight sweep on a full-rank stance
  floor       print the two-foot geometric floor for a fore-aft acceleration
  qp-solve    solve one per-step force QP and print the solution
  ocp-solve   solve one trajectory problem and export the knots
  report      rebuild the summary table from stored CSVs (no re-solving)

common options: --config PATH --out DIR --seed N --alpha-grid a,b,c --json
"""

_SWEEP_COMMANDS = {
    "test-a": "test_a",
    "test-b": "test_b",
    "test-c": "test_c",
    "test-e": "test_e",
    "kink": "kink",
    "prefactor": "prefactor",
}
_COMMANDS = tuple(_SWEEP_COMMANDS) + ("floor", "qp-solve", "ocp-solve", "report")


def _build_parser(cmd: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=f"pendular-lab {cmd}", add_help=True)
    if cmd != "report":
        p.add_argument("--config", required=True, help="TOML config path or packaged name")
    p.add_argument("--out", default=None, help="output directory (default from config)")
    p.add_argument("--seed", type=int, default=None, help="override output.seed")
    p.add_argument("--json", action="store_true", help="machine-readable summary on stdout")
    if cmd in _SWEEP_COMMANDS:
        p.add_argument("--alpha-grid", default=None,
                       help="comma-separated override of the sweep alpha grid")
    if cmd == "floor":
        p.add_argument("--ax", type=float, default=1.0, help="fore-aft acceleration m/s^2")
    if cmd == "qp-solve":
        p.add_argument("--alpha", type=float, default=100.0)
        p.add_argument("--ax", type=float, default=0.0)
        p.add_argument("--ay", type=float, default=0.0)
        p.add_argument("--stance", choices=("rect", "trot"), default="rect")
    if cmd == "ocp-solve":
        p.add_argument("--alpha", type=float, default=100.0)
    return p


def _apply_overrides(cfg: RunConfig, ns: argparse.Namespace, cmd: str) -> RunConfig:
    if getattr(ns, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, output=dataclasses.replace(cfg.output, seed=ns.seed))
    if ns.out is not None:
        cfg = dataclasses.replace(cfg, output=dataclasses.replace(cfg.output, dir=ns.out))
    grid_arg = getattr(ns, "alpha_grid", None)
    if grid_arg:
        try:
            grid = tuple(sorted(float(v) for v in grid_arg.split(",") if v.strip()))
        except ValueError as exc:
            raise ConfigError(f"--alpha-grid must be comma-separated numbers: {exc}") from exc
        if len(grid) < 2 or any(a <= 0 for a in grid):
            raise ConfigError("--alpha-grid needs >= 2 positive entries")
        field = "alpha_grid_extended" if cmd == "test-c" else "alpha_grid"
        if cmd == "test-e":
            field = "test_e_alpha_grid"
        cfg = dataclasses.replace(cfg, sweep=dataclasses.replace(cfg.sweep, **{field: grid}))
    cfg.validate()
    return cfg


def _write_diagnostics(out_dir: str, cmd: str, exc: Exception) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"diagnostics_{cmd.replace('-', '_')}.txt"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"command={cmd}\nerror={type(exc).__name__}\nmessage={exc}\n")
        for key, val in getattr(exc, "diagnostics", {}).items():
            fh.write(f"{key}={val}\n")
        cert = getattr(exc, "certificate", None)
        if cert is not None:
            fh.write(f"certificate={' '.join(format(v, '.6g') for v in cert)}\n")
            fh.write(f"gap={getattr(exc, 'gap', float('nan')):.6g}\n")
    return path


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, default=float))


def _run_sweep(cmd: str, cfg: RunConfig, as_json: bool) -> int:
    result = harness.RUNNERS[_SWEEP_COMMANDS[cmd]](cfg)
    paths = harness.write_sweep(result, cfg.output.dir)
    if as_json:
        _print_json({"test": result.name, "fitted": result.fitted,
                     "overlays": result.overlays, "paths": {k: str(v) for k, v in paths.items()}})
        return 0
    print(f"{result.name}: wrote {paths['csv']}")
    for key in sorted(result.fitted):
        print(f"  {key} = {harness._fmt(result.fitted[key])}")
    if cmd == "test-c":
        gap = result.fitted["final_rel_gap"]
        floor = result.overlays["floor_over_m"]
        print(f"  floor match: qp within {gap:.2e} relative of analytic floor "
              f"{floor:.6g} m^2/s^2 at alpha={result.rows[-1][0]:g}")
    if result.notes:
        for key in sorted(result.notes):
            print(f"  [row failed] {key}: {result.notes[key]}", file=sys.stderr)
    return 0


def _run_floor(cfg: RunConfig, ns: argparse.Namespace) -> int:
    stance = cfg.trot_stance()
    com = cfg.com()
    f_net = stance.mass * np.array([ns.ax, 0.0, cfg.robot.gravity])
    rep = analysis.geometric_floor(stance, com, f_net)
    kappa = analysis.kink_kappa(stance, com)
    a_star = analysis.critical_acceleration(cfg.robot.mu, kappa, cfg.robot.gravity)
    jac_sig = analysis.moment_jacobian(stance, com).singular_values
    report = analysis.AnalysisReport(
        singular_values=tuple(float(s) for s in jac_sig),
        geometric_floor=rep.geometric_floor,
        floor_fraction=rep.floor_fraction,
        canceller=tuple(rep.canceller),
        canceller_feasible=rep.canceller_feasible,
        kappa=kappa,
        a_star=a_star,
    )
    if ns.json:
        _print_json(dict(report.as_flat_items()))
        return 0
    print(f"geometric floor {rep.geometric_floor:.6g} m^2/s^2 per unit mass at ax={ns.ax:g}")
    for key, val in report.as_flat_items():
        print(f"  {key} = {val}")
    return 0


def _run_qp_solve(cfg: RunConfig, ns: argparse.Namespace) -> int:
    stance = cfg.rectangle_stance() if ns.stance == "rect" else cfg.trot_stance()
    com = cfg.com()
    f_net = stance.mass * np.array([ns.ax, ns.ay, cfg.robot.gravity])
    w = forceqp.QpWeights(alpha=ns.alpha, gamma=1.0)
    opts = forceqp.SolverOptions(tol=cfg.solver.tol, max_iter=cfg.solver.max_iter,
                                 cone_model=cfg.solver.cone_model)
    sol = forceqp.solve(stance, com, f_net, w, opts)
    payload = {
        "hdot": list(sol.hdot),
        "hdot_over_m": float(np.linalg.norm(sol.hdot) / stance.mass),
        "objective": sol.objective,
        "iterations": sol.iterations,
        "primal_residual": sol.primal_residual,
        "cone_active": list(sol.cone_active),
        "forces": [list(f) for f in sol.forces],
    }
    if ns.json:
        _print_json(payload)
        return 0
    print(f"|hdot|/m = {payload['hdot_over_m']:.6g} m^2/s^2, objective = {sol.objective:.6g}, "
          f"iterations = {sol.iterations}")
    for i, f in enumerate(sol.forces):
        tag = " (cone active)" if sol.cone_active[i] else ""
        print(f"  f[{i}] = [{f[0]:.4f} {f[1]:.4f} {f[2]:.4f}] N{tag}")
    return 0


def _run_ocp_solve(cfg: RunConfig, ns: argparse.Namespace) -> int:
    problem = harness.pointmass_problem(cfg, ns.alpha)
    opts = ocp.OcpOptions(tol=cfg.solver.ocp_tol, bc_tol=cfg.solver.bc_tol)
    sol = ocp.solve_ocp(problem, opts)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"ocp_solution_alpha{ns.alpha:g}.csv"
    n = problem.stance.n_contacts
    cols = ["t", "com_x", "com_y", "com_z", "vel_x", "vel_y", "vel_z",
            "acc_x", "acc_y", "acc_z"]
    for i in range(n):
        cols += [f"f{i}_x", f"f{i}_y", f"f{i}_z"]
    rows = []
    for k, t in enumerate(sol.times):
        row = [t, *sol.com[k], *sol.com_vel[k], *sol.com_acc[k]]
        for i in range(n):
            row.extend(sol.knot_forces[k, i])
        rows.append(tuple(row))
    harness.write_csv(path, tuple(cols), rows)
    payload = {
        "eps_h": sol.eps_h,
        "eps_pend": sol.eps_pend,
        "lipm_r2": sol.lipm_r2,
        "objective": sol.objective,
        "iterations": sol.iterations,
        "bc_residual": sol.bc_residual,
        "csv": str(path),
    }
    if ns.json:
        _print_json(payload)
        return 0
    print(f"wrote {path}")
    print(f"  eps_h = {sol.eps_h:.6g} N m, eps_pend = {sol.eps_pend:.6g} m/s^2, "
          f"lipm_r2 = {sol.lipm_r2 if sol.lipm_r2 is not None else 'undefined'}")
    return 0


def _run_report(ns: argparse.Namespace) -> int:
    out_dir = ns.out or "runs"
    try:
        text, data = harness.report(out_dir)
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if ns.json:
        _print_json(data)
        return 0
    print(text)
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help", "help"):
        print(USAGE)
        return 0
    cmd, rest = argv[0], argv[1:]
    if cmd not in _COMMANDS:
        print(USAGE, file=sys.stderr)
        print(f"unknown subcommand: {cmd!r}", file=sys.stderr)
        return 64

    parser = _build_parser(cmd)
    try:
        ns = parser.parse_args(rest)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2

    if cmd == "report":
        return _run_report(ns)

    try:
        cfg = load_config(ns.config)
        cfg = _apply_overrides(cfg, ns, cmd)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if cmd in _SWEEP_COMMANDS:
            return _run_sweep(cmd, cfg, ns.json)
        if cmd == "floor":
            return _run_floor(cfg, ns)
        if cmd == "qp-solve":
            return _run_qp_solve(cfg, ns)
        return _run_ocp_solve(cfg, ns)
    except (forceqp.InfeasibleNetForceError, forceqp.ConvergenceError,
            ocp.InfeasibleBoundaryError) as exc:
        path = _write_diagnostics(cfg.output.dir, cmd, exc)
        print(f"solver failure: {exc}\ndiagnostics written to {path}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())
