"""Sweep harness: scenario generators, the desk-scale test battery, CSV/SVG output.

Each runner returns a :class:`SweepResult` (rows sorted by the sweep
parameter, fitted constants, analytic overlays) and never aborts on a
per-row solver failure; failures are recorded in ``notes`` and the row is
filled with NaNs.  ``write_sweep`` emits ``<name>.csv`` (primary artifact,
byte-identical for identical config + seed), ``<name>_summary.txt``
(flat key=value text), and ``<name>_<timestamp>.svg``.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, forceqp, ocp, svg
from .config import RunConfig
from .model import (
    StanceConfig,
    center_of_pressure,
    excitation_baseline,
    pendulum_frequency,
    point_in_polygon,
)


@dataclass(frozen=True)
class Sinusoid:
    axis: int  # 0 = x, 1 = y
    amplitude: float  # meters
    frequency: float  # Hz


@dataclass(frozen=True)
class Scenario:
    """Prescribed body-sway motion over a fixed stance (kinematic, no physics)."""

    name: str
    stance: StanceConfig
    sinusoids: tuple[Sinusoid, ...]
    duration: float
    sample_rate: float
    com_height: float

    def __post_init__(self):
        if any(s.amplitude < 0 for s in self.sinusoids):
            raise ValueError("sway amplitudes must be non-negative")
        if any(s.frequency <= 0 for s in self.sinusoids) or self.duration <= 0 or self.sample_rate <= 0:
            raise ValueError("frequencies, duration, and sample rate must be positive")

    def times(self) -> np.ndarray:
        n = int(round(self.duration * self.sample_rate))
        return np.arange(n) / self.sample_rate

    def frames(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(times, com(t), acc(t)): sinusoidal sway about the stance center."""
        t = self.times()
        com = np.zeros((t.size, 3))
        com[:, 2] = self.com_height
        acc = np.zeros((t.size, 3))
        for s in self.sinusoids:
            w = 2.0 * math.pi * s.frequency
            com[:, s.axis] += s.amplitude * np.sin(w * t)
            acc[:, s.axis] += -s.amplitude * w * w * np.sin(w * t)
        return t, com, acc


def sway_scenario(cfg: RunConfig, stance: StanceConfig, name: str) -> Scenario:
    sc = cfg.scenario
    return Scenario(
        name=name,
        stance=stance,
        sinusoids=(
            Sinusoid(0, sc.sway_amp_x, sc.sway_freq_x),
            Sinusoid(1, sc.sway_amp_y, sc.sway_freq_y),
        ),
        duration=sc.duration,
        sample_rate=sc.sample_rate,
        com_height=cfg.robot.height,
    )


def orbit_boundary(cfg: RunConfig) -> tuple[ocp.BoundaryState, ocp.BoundaryState]:
    """Boundary pair riding an exact inverted-pendulum orbit along x.

    The orbit is c_x(t) = A*sinh(w*(t - T/2)) about a pivot at the stance
    center, scaled so the end offset is ocp.orbit_offset; a trajectory can
    meet both ends with zero moment rate, so the collapse is unobstructed.
    """
    h = cfg.robot.height
    omega = pendulum_frequency(h, cfg.robot.gravity)
    t_half = cfg.ocp.horizon / 2.0
    amp = cfg.ocp.orbit_offset / math.sinh(omega * t_half)
    v_end = amp * omega * math.cosh(omega * t_half)
    start = ocp.BoundaryState((-cfg.ocp.orbit_offset, 0.0, h), (v_end, 0.0, 0.0))
    goal = ocp.BoundaryState((cfg.ocp.orbit_offset, 0.0, h), (v_end, 0.0, 0.0))
    return start, goal


def pointmass_problem(cfg: RunConfig, alpha: float, beta: float | None = None) -> ocp.OcpProblem:
    start, goal = orbit_boundary(cfg)
    return ocp.OcpProblem(
        stance=cfg.rectangle_stance(),
        horizon=cfg.ocp.horizon,
        knots=cfg.ocp.knots,
        start=start,
        goal=goal,
        alpha=float(alpha),
        beta=cfg.ocp.beta if beta is None else float(beta),
        gamma=cfg.ocp.gamma,
    )


# -- results ------------------------------------------------------------------

@dataclass
class SweepResult:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]
    fitted: dict = field(default_factory=dict)
    overlays: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    extra_tables: dict = field(default_factory=dict)  # name -> (columns, rows)

    def column(self, name: str) -> np.ndarray:
        idx = self.columns.index(name)
        return np.array([row[idx] for row in self.rows])


def max_workers() -> int:
    env = os.environ.get("PENDULAR_LAB_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def parallel_map(fn, items):
    """Map preserving input order; honors the PENDULAR_LAB_THREADS cap."""
    items = list(items)
    workers = max_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- per-step QP sweeps (four-foot and two-foot stances) ------------------------

def _qp_frame_sweep(stance, com_frames, acc_frames, alphas, solver_opts):
    """Per-frame QP metric for each alpha: mean ||hdot|| raw, iteration and
    residual maxima.  A solver failure marks that alpha row NaN instead of
    aborting the sweep; failures come back in the notes dict."""
    m = stance.mass
    gvec = np.array([0.0, 0.0, -stance.gravity])
    means, iters, resids = [], [], []
    notes = {}
    for alpha in alphas:
        w = forceqp.QpWeights(alpha=float(alpha), gamma=1.0)
        hnorms = np.empty(com_frames.shape[0])
        it_max = 0
        res_max = 0.0
        try:
            for i, (c, a) in enumerate(zip(com_frames, acc_frames)):
                f_net = m * (a - gvec)
                sol = forceqp.solve(stance, c, f_net, w, solver_opts)
                hnorms[i] = np.linalg.norm(sol.hdot)
                it_max = max(it_max, sol.iterations)
                res_max = max(res_max, sol.primal_residual)
            means.append(float(hnorms.mean()))
        except (forceqp.InfeasibleNetForceError, forceqp.ConvergenceError) as exc:
            notes[f"alpha_{alpha:g}"] = str(exc)
            means.append(float("nan"))
        iters.append(it_max)
        resids.append(res_max)
    return np.array(means), np.array(iters), np.array(resids), notes


def _fit_tail(alphas, values, alpha_min):
    """Free-slope log-log fit plus the slope=-1 constant over the tail."""
    mask = alphas >= alpha_min
    pts = [(a, v) for a, v in zip(alphas[mask], values[mask]) if math.isfinite(v) and v > 0]
    slope, _ = ocp.collapse_rate_fit(pts)
    k_fit = float(np.exp(np.mean([np.log(a * v) for a, v in pts])))
    return slope, k_fit


def run_test_b(cfg: RunConfig) -> SweepResult:
    """Four-foot sway sweep: residual moment against the foot-span constant."""
    stance = cfg.rectangle_stance()
    scen = sway_scenario(cfg, stance, "go1-sway")
    _, com_frames, acc_frames = scen.frames()
    m = cfg.robot.mass
    opts = forceqp.SolverOptions(tol=cfg.solver.tol, max_iter=cfg.solver.max_iter,
                                 cone_model=cfg.solver.cone_model)

    jac = analysis.moment_jacobian(stance, cfg.com())
    samples = [excitation_baseline(stance, c, a) for c, a in zip(com_frames, acc_frames)]
    k_a = analysis.scaling_constant(jac, samples)

    alphas = np.array(cfg.sweep.alpha_grid)
    means, iters, resids, notes = _qp_frame_sweep(stance, com_frames, acc_frames, alphas, opts)

    slope, k_e = _fit_tail(alphas, means, cfg.sweep.fit_alpha_min)
    rows = tuple(
        (float(a), float(v / m), float(k_a / (a * m)), float(it), float(res))
        for a, v, it, res in zip(alphas, means, iters, resids)
    )
    result = SweepResult(
        name="test_b",
        columns=("alpha", "hdot_over_m", "analytic_K_over_alpha", "solver_iters", "residual"),
        rows=rows,
        fitted={
            "slope": slope,
            "k_e": k_e,
            "k_e_over_m": k_e / m,
            "cancellation_ratio": float(means[0] / means[-1]),
        },
        overlays={
            "k_a": k_a,
            "k_a_over_m": k_a / m,
            "sigma_1": float(jac.singular_values[0]),
            "sigma_2": float(jac.singular_values[1]),
            "sigma_3": float(jac.singular_values[2]),
            **{f"reference_{k}": v for k, v in cfg.reference.items() if k.startswith("k_")},
        },
        notes=notes,
    )
    return result


def run_test_c(cfg: RunConfig) -> SweepResult:
    """Two-foot (diagonal) sway sweep against the geometric floor, plus the
    floor-fraction sweep over uniformly spaced excitation headings."""
    stance = cfg.trot_stance()
    scen = sway_scenario(cfg, stance, "go1-trot-sway")
    _, com_frames, acc_frames = scen.frames()
    m = cfg.robot.mass
    opts = forceqp.SolverOptions(tol=cfg.solver.tol, max_iter=cfg.solver.max_iter,
                                 cone_model=cfg.solver.cone_model)
    gvec = np.array([0.0, 0.0, -stance.gravity])

    floors = np.array([
        analysis.geometric_floor(stance, c, m * (a - gvec)).geometric_floor
        for c, a in zip(com_frames, acc_frames)
    ])
    floor_mean = float(floors.mean())

    alphas = np.array(cfg.sweep.alpha_grid_extended)
    means, iters, resids, notes = _qp_frame_sweep(stance, com_frames, acc_frames, alphas, opts)
    rows = tuple(
        (float(a), float(v / m), floor_mean, float(it), float(res))
        for a, v, it, res in zip(alphas, means, iters, resids)
    )

    headings = np.arange(cfg.sweep.directions) * (180.0 / cfg.sweep.directions)
    dirs = [(math.cos(math.radians(t)), math.sin(math.radians(t))) for t in headings]
    fractions = analysis.floor_fraction_sweep(stance, cfg.com(), dirs, cfg.sweep.accel_mag)
    frac_vals = [f for f in fractions if f is not None]
    frac_rows = tuple(
        (float(t), float("nan") if f is None else float(f)) for t, f in zip(headings, fractions)
    )

    final_gap = abs(means[-1] / m - floor_mean) / floor_mean if floor_mean > 0 else float("nan")
    return SweepResult(
        name="test_c",
        columns=("alpha", "hdot_over_m", "floor_over_m", "solver_iters", "residual"),
        rows=rows,
        fitted={
            "final_rel_gap": float(final_gap),
            "cancellation_ratio": float(means[0] / means[-1]),
            "fraction_min": float(min(frac_vals)),
            "fraction_max": float(max(frac_vals)),
            "fraction_mean": float(np.mean(frac_vals)),
        },
        overlays={
            "floor_over_m": floor_mean,
            **{f"reference_{k}": v for k, v in cfg.reference.items()
               if k in ("floor_match", "fraction_low", "fraction_high")},
        },
        extra_tables={
            "test_c_fractions": (("heading_deg", "fraction"), frac_rows),
        },
        notes=notes,
    )


# -- trajectory sweeps -----------------------------------------------------------

def run_test_a(cfg: RunConfig) -> SweepResult:
    """Point-mass trajectory sweep: moment-rate collapse over the balance weight."""
    alphas = np.array(cfg.sweep.alpha_grid)
    opts = ocp.OcpOptions(tol=cfg.solver.ocp_tol, bc_tol=cfg.solver.bc_tol)
    rows = []
    notes = {}
    m = cfg.robot.mass
    x0 = None
    for a in alphas:
        problem = pointmass_problem(cfg, a)
        try:
            sol = ocp.solve_ocp(problem, opts, x0=x0)
            x0 = sol.knot_forces
            r2 = float("nan") if sol.lipm_r2 is None else sol.lipm_r2
            rows.append((float(a), sol.eps_h, sol.eps_h / m, sol.eps_pend, r2,
                         float(sol.iterations), sol.bc_residual))
        except (ocp.InfeasibleBoundaryError, forceqp.ConvergenceError) as exc:
            notes[f"alpha_{a:g}"] = str(exc)
            rows.append((float(a),) + (float("nan"),) * 6)

    good = [row for row in rows if math.isfinite(row[1])]
    alphas_ok = np.array([row[0] for row in good])
    eps_ok = np.array([row[1] for row in good])
    slope, _ = _fit_tail(alphas_ok, eps_ok, cfg.sweep.fit_alpha_min)
    reduction = float(eps_ok[0] / eps_ok[-1]) if len(eps_ok) >= 2 else float("nan")
    r2_at_100 = good[int(np.argmin(np.abs(alphas_ok - 100.0)))][4] if good else float("nan")
    return SweepResult(
        name="test_a",
        columns=("alpha", "eps_h", "eps_h_over_m", "eps_pend", "lipm_r2",
                 "solver_iters", "bc_residual"),
        rows=tuple(rows),
        fitted={"slope": slope, "reduction": reduction, "r2_at_100": float(r2_at_100)},
        overlays={f"reference_{k}": v for k, v in cfg.reference.items()
                  if k in ("reduction", "r2")},
        notes=notes,
    )


def _zmp_cop_deviation(stance: StanceConfig, sol: ocp.OcpSolution):
    """Per-knot gap between the kinematic ZMP and the force ZMP (m)."""
    g = stance.gravity
    zmp = sol.com[:, :2] - (sol.com[:, 2] / g)[:, None] * sol.com_acc[:, :2]
    cop = np.array([center_of_pressure(stance, f) for f in sol.knot_forces])
    dev = np.linalg.norm(zmp - cop, axis=1)
    poly = stance.support_region
    inside = np.array([point_in_polygon(poly, q, tol=1e-9) for q in zmp])
    return dev, float(inside.mean())


def run_test_e(cfg: RunConfig) -> SweepResult:
    """ZMP-pivot identity on the trajectory solution: the kinematic ZMP and the
    contact-force ZMP coincide on the pendular set and their gap shrinks with
    the balance weight."""
    stance = cfg.rectangle_stance()
    alphas = list(cfg.sweep.test_e_alpha_grid)
    opts = ocp.OcpOptions(tol=cfg.solver.ocp_tol, bc_tol=cfg.solver.bc_tol)

    def solve_one(alpha):
        problem = pointmass_problem(cfg, alpha, beta=cfg.ocp.test_e_beta)
        try:
            sol = ocp.solve_ocp(problem, opts)
            dev, inside = _zmp_cop_deviation(stance, sol)
            return (float(alpha), float(dev.mean() * 1e3), float(dev.max() * 1e3),
                    inside, float(sol.iterations)), None
        except (ocp.InfeasibleBoundaryError, forceqp.ConvergenceError) as exc:
            return (float(alpha),) + (float("nan"),) * 4, str(exc)

    results = parallel_map(solve_one, alphas)
    rows = tuple(r for r, _ in results)
    notes = {f"alpha_{row[0]:g}": err for row, err in results if err}

    early = [(a, row[1]) for a, row in zip(alphas, rows) if a <= 100.0 and math.isfinite(row[1])]
    if len(early) >= 2:
        la = np.log([a for a, _ in early])
        ld = np.log([d for _, d in early])
        trend = float(np.polyfit(la, ld, 1)[0])
    else:
        trend = float("nan")
    means = [row[1] for row in rows if math.isfinite(row[1])]
    monotone = all(b <= a * (1 + 1e-9) for a, b in zip(means, means[1:]))
    return SweepResult(
        name="test_e",
        columns=("alpha", "zmp_dev_mean_mm", "zmp_dev_max_mm", "zmp_inside_fraction",
                 "solver_iters"),
        rows=rows,
        fitted={
            "early_trend_slope": trend,
            "monotone": float(monotone),
            "plateau_mm": float(rows[-1][1]),
        },
        overlays={f"reference_{k}": v for k, v in cfg.reference.items()
                  if k.startswith("zmp_")},
        notes=notes,
    )


# -- closed-form feature sweeps -----------------------------------------------------

def kink_grid(cfg: RunConfig, a_star: float) -> list[float]:
    s = cfg.sweep
    coarse = np.arange(s.kink_min, s.kink_max + 1e-9, s.kink_step)
    fine = np.arange(a_star - s.kink_fine_halfwidth, a_star + s.kink_fine_halfwidth + 1e-9,
                     s.kink_fine_step)
    return sorted(set(np.round(coarse, 9)) | set(np.round(fine, 9)))


def run_kink(cfg: RunConfig) -> SweepResult:
    """Fore-aft acceleration sweep around the critical acceleration, plus the
    friction sweep showing no kink appears along mu."""
    stance = cfg.trot_stance()
    com = cfg.com()
    kappa = analysis.kink_kappa(stance, com)
    a_star = analysis.critical_acceleration(cfg.robot.mu, kappa, cfg.robot.gravity)
    grid = kink_grid(cfg, a_star)
    report = analysis.kink_analysis(stance, com, cfg.robot.mu, grid)

    rows = tuple(
        (a, floor, q, qf)
        for (a, floor, q), (_, qf) in zip(report.curve, report.full_curve)
    )
    full_transition = next(
        (a for a, floor, _, qf in rows if qf - floor > 1e-6), float("nan")
    )

    mu_grid = np.arange(cfg.sweep.mu_min, cfg.sweep.mu_max + 1e-9, cfg.sweep.mu_step)
    mu_curve = analysis.mu_sweep_no_kink(stance, com, cfg.sweep.mu_sweep_accel, mu_grid)
    mu_vals = np.array([v for _, v in mu_curve])
    mu_rows = tuple((float(mu), float(v)) for mu, v in mu_curve)
    second_diff = float(np.max(np.abs(np.diff(mu_vals, 2)))) if len(mu_vals) >= 3 else 0.0

    return SweepResult(
        name="kink",
        columns=("a_x", "floor_over_m", "qp_channel_over_m", "qp_full_over_m"),
        rows=rows,
        fitted={
            "kappa": report.kappa,
            "a_star": report.a_star,
            "left_slope": report.left_slope,
            "right_slope": report.right_slope,
            "full_channel_transition": float(full_transition),
            "mu_sweep_second_diff_max": second_diff,
        },
        overlays={f"reference_{k}": v for k, v in cfg.reference.items()
                  if k in ("kappa", "a_star")},
        extra_tables={"kink_mu_sweep": (("mu", "inf_over_m"), mu_rows)},
    )


def run_prefactor(cfg: RunConfig) -> SweepResult:
    """Tracking-weight sweep on a full-rank stance with a static net force:
    the achieved moment rate is the predicted fraction of the target."""
    stance = cfg.rectangle_stance()
    com = cfg.com()
    f_net = stance.weight_force()
    task = np.array(cfg.sweep.task_moment)
    alpha = cfg.sweep.prefactor_alpha
    ratios = np.logspace(-3.0, 3.0, cfg.sweep.prefactor_points)
    opts = forceqp.SolverOptions(tol=cfg.solver.tol, max_iter=cfg.solver.max_iter,
                                 cone_model=cfg.solver.cone_model)

    rows = []
    notes = {}
    worst = 0.0
    for ratio in ratios:
        lam = float(ratio * alpha)
        w = forceqp.QpWeights(alpha=alpha, gamma=1e-8 * (alpha + lam), lam=lam, hdot_task=task)
        predicted = analysis.task_prefactor(alpha, lam)
        try:
            sol = forceqp.solve(stance, com, f_net, w, opts)
        except (forceqp.InfeasibleNetForceError, forceqp.ConvergenceError) as exc:
            notes[f"ratio_{ratio:g}"] = str(exc)
            rows.append((float(ratio), predicted, float("nan"), float("nan"), float("nan")))
            continue
        measured = float(np.linalg.norm(sol.hdot) / np.linalg.norm(task))
        rel_err = float(np.linalg.norm(sol.hdot - predicted * task) / np.linalg.norm(task))
        worst = max(worst, rel_err)
        rows.append((float(ratio), predicted, measured, rel_err, float(sol.iterations)))

    return SweepResult(
        name="prefactor",
        columns=("lam_over_alpha", "prefactor_analytic", "ratio_measured", "rel_err",
                 "solver_iters"),
        rows=tuple(rows),
        fitted={"max_rel_err": worst},
        notes=notes,
    )


RUNNERS = {
    "test_a": run_test_a,
    "test_b": run_test_b,
    "test_c": run_test_c,
    "test_e": run_test_e,
    "kink": run_kink,
    "prefactor": run_prefactor,
}


# -- artifact emission ----------------------------------------------------------

def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return format(x, ".10g")


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path: Path) -> tuple[tuple[str, ...], list[tuple[float, ...]]]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    cols = tuple(lines[0].split(","))
    rows = [tuple(float(v) for v in ln.split(",")) for ln in lines[1:]]
    return cols, rows


def write_summary(path: Path, result: SweepResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(result.fitted):
            fh.write(f"fitted_{key}={_fmt(result.fitted[key])}\n")
        for key in sorted(result.overlays):
            fh.write(f"overlay_{key}={_fmt(result.overlays[key])}\n")
        for key in sorted(result.notes):
            fh.write(f"note_{key}={result.notes[key]}\n")


def read_summary(path: Path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, val = line.split("=", 1)
            try:
                out[key] = float(val)
            except ValueError:
                out[key] = val
    return out


_CHARTS = {
    "test_a": dict(x="alpha", ys=("eps_h",), xlog=True, ylog=True,
                   title="trajectory sweep: moment-rate collapse",
                   xlabel="alpha", ylabel="eps_H (N m)"),
    "test_b": dict(x="alpha", ys=("hdot_over_m", "analytic_K_over_alpha"), xlog=True,
                   ylog=True, title="four-foot sweep vs foot-span constant",
                   xlabel="alpha", ylabel="|hdot|/m (m^2/s^2)"),
    "test_c": dict(x="alpha", ys=("hdot_over_m", "floor_over_m"), xlog=True, ylog=True,
                   title="two-foot sweep vs geometric floor",
                   xlabel="alpha", ylabel="|hdot|/m (m^2/s^2)"),
    "test_e": dict(x="alpha", ys=("zmp_dev_mean_mm",), xlog=True, ylog=True,
                   title="ZMP vs force-ZMP deviation",
                   xlabel="alpha", ylabel="deviation (mm)"),
    "kink": dict(x="a_x", ys=("floor_over_m", "qp_channel_over_m", "qp_full_over_m"),
                 xlog=False, ylog=False, title="fore-aft infimum curve",
                 xlabel="a_x (m/s^2)", ylabel="inf |hdot|/m (m^2/s^2)"),
    "prefactor": dict(x="lam_over_alpha", ys=("prefactor_analytic", "ratio_measured"),
                      xlog=True, ylog=False, title="task prefactor",
                      xlabel="lam/alpha", ylabel="achieved fraction"),
}


def write_sweep(result: SweepResult, out_dir: str | Path, timestamp: str | None = None) -> dict:
    """Emit CSV + summary + SVG; returns the written paths by kind."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if timestamp is None:
        timestamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    paths = {}

    csv_path = out / f"{result.name}.csv"
    write_csv(csv_path, result.columns, result.rows)
    paths["csv"] = csv_path
    for name, (cols, rows) in result.extra_tables.items():
        extra = out / f"{name}.csv"
        write_csv(extra, cols, rows)
        paths[name] = extra

    summary_path = out / f"{result.name}_summary.txt"
    write_summary(summary_path, result)
    paths["summary"] = summary_path

    chart = _CHARTS.get(result.name)
    if chart is not None:
        svg_path = out / f"{result.name}_{timestamp}.svg"
        xs = list(result.column(chart["x"]))
        series = []
        for yname in chart["ys"]:
            ys = list(result.column(yname))
            series.append((yname, xs, ys))
        try:
            svg.line_chart(str(svg_path), series, title=chart["title"],
                           xlabel=chart["xlabel"], ylabel=chart["ylabel"],
                           xlog=chart["xlog"], ylog=chart["ylog"])
            paths["svg"] = svg_path
        except ValueError:
            pass  # nothing finite to plot; CSV is the artifact of record
    return paths


# -- summary table -----------------------------------------------------------------

_REPORT_SPEC = (
    ("A", "test_a", "point-mass trajectory sweep",
     (("slope", "fitted_slope"), ("reduction", "fitted_reduction"),
      ("r2_at_100", "fitted_r2_at_100"))),
    ("B", "test_b", "four-foot per-step sweep",
     (("K_e", "fitted_k_e_over_m"), ("K_a", "overlay_k_a_over_m"),
      ("slope", "fitted_slope"))),
    ("C", "test_c", "two-foot per-step sweep",
     (("final_rel_gap", "fitted_final_rel_gap"),
      ("cancellation_ratio", "fitted_cancellation_ratio"),
      ("fraction_mean", "fitted_fraction_mean"))),
    ("E", "test_e", "ZMP identity on trajectory",
     (("trend_slope", "fitted_early_trend_slope"), ("plateau_mm", "fitted_plateau_mm"),
      ("inside_fraction", None))),
)


def report(out_dir: str | Path) -> tuple[str, dict]:
    """Rebuild the theory/experiment summary from stored CSVs, without re-solving.

    Returns (text table, machine-readable dict); raises FileNotFoundError if
    no stored results exist under ``out_dir``.
    """
    out = Path(out_dir)
    data = {}
    lines = [f"{'test':<6}{'setting':<32}{'metric':<20}{'value':>14}"]
    found = False
    for label, name, setting, metrics_spec in _REPORT_SPEC:
        summary_path = out / f"{name}_summary.txt"
        csv_path = out / f"{name}.csv"
        if not summary_path.exists() or not csv_path.exists():
            continue
        found = True
        summary = read_summary(summary_path)
        cols, rows = read_csv(csv_path)
        entry = dict(summary)
        if name == "test_e" and rows:
            idx = cols.index("zmp_inside_fraction")
            entry["inside_fraction"] = min(row[idx] for row in rows)
        data[name] = entry
        for metric, key in metrics_spec:
            if key is None:
                val = entry.get(metric, float("nan"))
            else:
                val = summary.get(key, float("nan"))
            lines.append(f"{label:<6}{setting:<32}{metric:<20}{_fmt(float(val)):>14}")
    if not found:
        raise FileNotFoundError(f"no stored sweep results under {out}")
    return "\n".join(lines), data
