"""Direct transcription of the trajectory optimal-control problem.

Decision variables are the knot contact forces only; the CoM trajectory is
induced from the initial state by trapezoidal integration of Newton's law,
which keeps positions and velocities linear in the forces and pairs each
knot force's dynamic footprint with its trapezoidal cost weight (a one-sided
Euler rule would leave the terminal force dynamically inert and let the
regularizer collapse it).  Terminal boundary conditions are enforced by an
escalated quadratic penalty with multiplier estimates, and the friction
cones by an augmented Lagrangian over the (smoothed) cone violation; the
inner problem goes to a quasi-Newton method (L-BFGS-B) with an analytic
adjoint gradient.

The running cost per knot is

    alpha*||hdot||^2 + lam*||hdot - task||^2 + beta*(n . acc)^2
    + gamma * sum_i ||f_i||^2

integrated with trapezoidal weights over the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .forceqp import ConvergenceError
from .model import StanceConfig, as_vec3, clamp_to_polygon


class InfeasibleBoundaryError(RuntimeError):
    """Boundary pair unreachable under the friction-cone limits."""


@dataclass(frozen=True)
class BoundaryState:
    pos: np.ndarray
    vel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pos", as_vec3(self.pos, "boundary position"))
        object.__setattr__(self, "vel", as_vec3(self.vel, "boundary velocity"))


@dataclass(frozen=True)
class OcpProblem:
    stance: StanceConfig
    horizon: float
    knots: int
    start: BoundaryState
    goal: BoundaryState
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    lam: float = 0.0
    hdot_task: np.ndarray | None = None  # (K, 3) samples, None = zeros
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.knots < 2:
            raise ValueError("need at least 2 knots")
        if min(self.alpha, self.beta, self.lam) < 0.0 or self.gamma <= 0.0:
            raise ValueError("weights must be non-negative with gamma > 0")
        n = as_vec3(self.normal, "normal")
        object.__setattr__(self, "normal", n / np.linalg.norm(n))
        if self.hdot_task is not None:
            task = np.asarray(self.hdot_task, dtype=float)
            if task.shape != (self.knots, 3):
                raise ValueError(f"hdot_task must be ({self.knots}, 3), got {task.shape}")
            object.__setattr__(self, "hdot_task", task)

    @property
    def dt(self) -> float:
        return self.horizon / (self.knots - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.knots)


@dataclass(frozen=True)
class OcpOptions:
    tol: float = 1e-8  # stationarity target on the scaled inner gradient
    bc_tol: float = 1e-6
    cone_tol: float = 1e-7  # Newtons of cone violation allowed at a knot
    max_outer: int = 30
    max_inner: int = 6000
    penalty0: float = 1e4
    penalty_growth: float = 10.0
    penalty_max: float = 1e12


@dataclass(frozen=True)
class OcpSolution:
    times: np.ndarray
    knot_forces: np.ndarray  # (K, N, 3)
    com: np.ndarray  # (K, 3)
    com_vel: np.ndarray
    com_acc: np.ndarray
    objective: float  # trapezoidal quadrature of the running cost
    eps_h: float
    eps_pend: float
    lipm_r2: float | None
    iterations: int
    stationarity: float
    bc_residual: float
    cone_violation: float


def integrate_forces(problem: OcpProblem, forces) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Trapezoidal rollout of knot forces; returns (com, vel, acc)."""
    stance = problem.stance
    k, dt = problem.knots, problem.dt
    f = np.asarray(forces, dtype=float).reshape(k, stance.n_contacts, 3)
    gvec = np.array([0.0, 0.0, -stance.gravity])
    acc = f.sum(axis=1) / stance.mass + gvec
    vel = np.empty((k, 3))
    com = np.empty((k, 3))
    vel[0] = problem.start.vel
    com[0] = problem.start.pos
    for i in range(1, k):
        vel[i] = vel[i - 1] + 0.5 * dt * (acc[i - 1] + acc[i])
        com[i] = com[i - 1] + 0.5 * dt * (vel[i - 1] + vel[i])
    return com, vel, acc


def _trapezoid_weights(k: int, dt: float) -> np.ndarray:
    w = np.full(k, dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


class _Transcription:
    """Inner objective with analytic adjoint gradient, in scaled units."""

    CONE_SMOOTHING = 1e-8  # Newtons; keeps the tangential norm differentiable

    def __init__(self, problem: OcpProblem, opts: OcpOptions):
        self.p = problem
        self.opts = opts
        st = problem.stance
        self.k, self.n = problem.knots, st.n_contacts
        self.dt = problem.dt
        self.mass = st.mass
        self.r = st.positions  # (N, 3)
        self.normals = st.normals
        self.mus = st.mus
        self.task = problem.hdot_task if problem.hdot_task is not None else np.zeros((self.k, 3))
        self.weights = _trapezoid_weights(self.k, self.dt)
        self.scale = 1.0 / (1.0 + problem.alpha + problem.beta + problem.gamma + problem.lam)
        # augmented-lagrangian state, updated by the outer loop
        self.penalty = opts.penalty0
        self.mu_pos = np.zeros(3)
        self.mu_vel = np.zeros(3)
        self.cone_rho = opts.penalty0
        self.cone_mult = np.zeros((self.k, self.n))

    def cone_gaps(self, f: np.ndarray):
        """Smoothed violation g = ||f_t||_eps - mu*f_n per (knot, contact)."""
        fn = np.einsum("kni,ni->kn", f, self.normals)
        ft_vec = f - fn[..., None] * self.normals[None]
        ft_sq = np.einsum("knj,knj->kn", ft_vec, ft_vec)
        eps = self.CONE_SMOOTHING
        ft_den = np.sqrt(ft_sq + eps * eps)
        gaps = (ft_den - eps) - self.mus[None, :] * fn
        return gaps, ft_vec, ft_den, fn

    def running_cost(self, f: np.ndarray, com: np.ndarray, acc: np.ndarray) -> float:
        p = self.p
        fsum = f.sum(axis=1)
        h = np.cross(self.r[None, :, :], f).sum(axis=1) - np.cross(com, fsum)
        dtask = h - self.task
        nacc = acc @ p.normal
        run = (
            p.alpha * np.einsum("kj,kj->k", h, h)
            + p.lam * np.einsum("kj,kj->k", dtask, dtask)
            + p.beta * nacc**2
            + p.gamma * np.einsum("knj,knj->k", f, f)
        )
        return float(self.weights @ run)

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        p = self.p
        f = x.reshape(self.k, self.n, 3)
        com, vel, acc = integrate_forces(p, f)
        fsum = f.sum(axis=1)
        h = np.cross(self.r[None, :, :], f).sum(axis=1) - np.cross(com, fsum)

        w = self.weights
        dtask = h - self.task
        nacc = acc @ p.normal
        run = (
            p.alpha * np.einsum("kj,kj->k", h, h)
            + p.lam * np.einsum("kj,kj->k", dtask, dtask)
            + p.beta * nacc**2
            + p.gamma * np.einsum("knj,knj->k", f, f)
        )
        value = float(w @ run)

        pen = self.penalty
        r_pos = com[-1] - p.goal.pos
        r_vel = vel[-1] - p.goal.vel
        value += float(
            self.mu_pos @ r_pos + 0.5 * pen * r_pos @ r_pos
            + self.mu_vel @ r_vel + 0.5 * pen * r_vel @ r_vel
        )

        gaps, ft_vec, ft_den, _ = self.cone_gaps(f)
        act = np.maximum(0.0, self.cone_mult + self.cone_rho * gaps)
        value += float((act**2 - self.cone_mult**2).sum() / (2.0 * self.cone_rho))

        # gradient: direct force terms
        qt = 2.0 * ((p.alpha + p.lam) * h - p.lam * self.task)  # dS/dH per knot
        arms = self.r[None, :, :] - com[:, None, :]
        grad = w[:, None, None] * (np.cross(qt[:, None, :], arms) + 2.0 * p.gamma * f)

        # direct com and acceleration gradients of the running cost
        gc = w[:, None] * np.cross(qt, fsum)
        ga = (w * 2.0 * p.beta * nacc)[:, None] * p.normal[None, :]

        # adjoint sweep through the trapezoidal transition
        #   v(j) = v(j-1) + dt/2*(a(j-1) + a(j)),  c(j) = c(j-1) + dt/2*(v(j-1) + v(j))
        lam_c = gc[-1] + self.mu_pos + pen * r_pos
        lam_v = self.mu_vel + pen * r_vel
        ga_total = ga.copy()
        half = 0.5 * self.dt
        for j in range(self.k - 1, 0, -1):
            lam_v = lam_v + half * lam_c  # v(j) -> c(j) edge
            ga_total[j] += half * lam_v
            ga_total[j - 1] += half * lam_v
            lam_c, lam_v = gc[j - 1] + lam_c, lam_v + half * lam_c
        grad += ga_total[:, None, :] / self.mass

        # cone term: act * d(gap)/df
        dg = ft_vec / ft_den[..., None] - self.mus[None, :, None] * self.normals[None]
        grad += act[..., None] * dg

        return self.scale * value, (self.scale * grad).reshape(-1)

    def residuals(self, x: np.ndarray):
        f = x.reshape(self.k, self.n, 3)
        com, vel, _ = integrate_forces(self.p, f)
        r_pos = com[-1] - self.p.goal.pos
        r_vel = vel[-1] - self.p.goal.vel
        bc = max(float(np.max(np.abs(r_pos))), float(np.max(np.abs(r_vel))))
        gaps, _, _, fn = self.cone_gaps(f)
        viol = max(float(gaps.max(initial=0.0)), float((-fn).max(initial=0.0)), 0.0)
        return bc, viol, r_pos, r_vel, gaps

    def update_multipliers(self, r_pos, r_vel, gaps):
        self.mu_pos += self.penalty * r_pos
        self.mu_vel += self.penalty * r_vel
        self.cone_mult = np.maximum(0.0, self.cone_mult + self.cone_rho * gaps)


def solve_ocp(problem: OcpProblem, opts: OcpOptions | None = None,
              x0: np.ndarray | None = None) -> OcpSolution:
    """Solve the transcribed problem.

    ``x0`` optionally warm-starts the knot forces (same shape as
    ``knot_forces``); the default start is the static equal split.  Raises
    :class:`InfeasibleBoundaryError` when the boundary pair cannot be met
    and :class:`ConvergenceError` on a stalled solve.
    """
    opts = opts or OcpOptions()
    tr = _Transcription(problem, opts)
    st = problem.stance

    if x0 is None:
        static = np.array([0.0, 0.0, st.mass * st.gravity / st.n_contacts])
        x = np.tile(static, (problem.knots, st.n_contacts, 1)).reshape(-1)
    else:
        x = np.asarray(x0, dtype=float).reshape(-1).copy()

    total_iters = 0
    bc = viol = np.inf
    grad_inf = np.inf
    prev_bc = np.inf
    converged = False
    for _ in range(opts.max_outer):
        res = optimize.minimize(
            tr.value_and_grad,
            x,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": opts.max_inner, "ftol": 1e-16, "gtol": opts.tol, "maxcor": 30},
        )
        x = res.x
        total_iters += int(res.nit)
        grad_inf = float(np.max(np.abs(res.jac)))
        bc, viol, r_pos, r_vel, gaps = tr.residuals(x)
        if bc <= opts.bc_tol and viol <= opts.cone_tol:
            converged = True
            break
        tr.update_multipliers(r_pos, r_vel, gaps)
        if bc > 0.25 * prev_bc and tr.penalty < opts.penalty_max:
            tr.penalty *= opts.penalty_growth
        if viol > opts.cone_tol and tr.cone_rho < opts.penalty_max:
            tr.cone_rho *= opts.penalty_growth
        prev_bc = bc

    if not converged:
        if viol <= opts.cone_tol:
            raise InfeasibleBoundaryError(
                f"boundary conditions unmet after {opts.max_outer} outer rounds "
                f"(residual {bc:.3e} > {opts.bc_tol:.1e})"
            )
        raise ConvergenceError(
            "trajectory solve did not converge",
            {"bc_residual": bc, "cone_violation": viol, "iterations": total_iters},
        )

    forces = x.reshape(problem.knots, st.n_contacts, 3)
    com, vel, acc = integrate_forces(problem, forces)
    eps_pend, eps_h, r2 = _metrics_arrays(problem.times, st, forces, com, acc)
    return OcpSolution(
        times=problem.times,
        knot_forces=forces,
        com=com,
        com_vel=vel,
        com_acc=acc,
        objective=tr.running_cost(forces, com, acc),
        eps_h=eps_h,
        eps_pend=eps_pend,
        lipm_r2=r2,
        iterations=total_iters,
        stationarity=grad_inf,
        bc_residual=bc,
        cone_violation=viol,
    )


# -- metrics -----------------------------------------------------------------------

def pendular_pivots(stance: StanceConfig, com: np.ndarray, forces: np.ndarray) -> np.ndarray:
    """Per-knot pivot minimizing the instantaneous pendular deviation.

    The unconstrained minimizer is c_xy - (h/g) * F_xy / m (the force-based
    zero-moment point); it is clamped to the support region.
    """
    poly = stance.support_region
    fsum = forces.sum(axis=1)
    raw = com[:, :2] - (com[:, 2] / stance.gravity)[:, None] * fsum[:, :2] / stance.mass
    return np.array([clamp_to_polygon(poly, q) for q in raw])


def metrics(sol: OcpSolution, stance: StanceConfig) -> tuple[float, float, float | None]:
    """(eps_pend, eps_h, lipm_r2) of a solution, by trapezoidal quadrature.

    eps_pend averages ||F/m - (g/h)(c - p)|| with the pivot chosen per knot
    as the clamped force-based ZMP (m/s^2); eps_h averages ||hdot|| (N*m);
    lipm_r2 is the coefficient of determination of the horizontal
    acceleration against (g/h)(c_xy - p) for a single fitted pivot p, None
    for zero-motion trajectories.
    """
    return _metrics_arrays(sol.times, stance, sol.knot_forces, sol.com, sol.com_acc)


def _metrics_arrays(times: np.ndarray, stance: StanceConfig, forces, com, acc):
    k = com.shape[0]
    if k < 2:
        raise ValueError("need at least two knots")
    dt = float(times[1] - times[0])
    horizon = float(times[-1] - times[0])
    w = _trapezoid_weights(k, dt)

    fsum = forces.sum(axis=1)
    hdots = np.cross(stance.positions[None, :, :], forces).sum(axis=1) - np.cross(com, fsum)
    eps_h = float(w @ np.linalg.norm(hdots, axis=1)) / horizon

    pivots = pendular_pivots(stance, com, forces)
    leg = com - np.column_stack([pivots, np.zeros(k)])
    pend = (stance.gravity / com[:, 2])[:, None] * leg
    dev = fsum / stance.mass - pend
    eps_pend = float(w @ np.linalg.norm(dev, axis=1)) / horizon

    return eps_pend, eps_h, lipm_fit_r2(com, acc, stance.gravity)


def lipm_fit_r2(com: np.ndarray, acc: np.ndarray, gravity: float) -> float | None:
    """R^2 of acc_xy against (g/h)*(c_xy - p) for one fitted constant pivot p.

    Returns None (sentinel) when the acceleration has no variance to explain.
    """
    h_bar = float(com[:, 2].mean())
    slope = gravity / h_bar
    y = acc[:, :2]
    p_hat = (com[:, :2] - y / slope).mean(axis=0)
    pred = slope * (com[:, :2] - p_hat)
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean(axis=0)) ** 2).sum())
    if ss_tot < 1e-18:
        return None
    return 1.0 - ss_res / ss_tot


def collapse_rate_fit(sweep) -> tuple[float, float]:
    """Least-squares slope and intercept of log(eps) against log(alpha).

    Needs at least four positive sweep points; the intercept is the log of
    the fitted constant (eps ~ exp(intercept) * alpha^slope).
    """
    pts = [(float(a), float(e)) for a, e in sweep]
    if len(pts) < 4:
        raise ValueError(f"need at least 4 sweep points, got {len(pts)}")
    if any(a <= 0 or e <= 0 for a, e in pts):
        raise ValueError("sweep points must be positive")
    la = np.log([a for a, _ in pts])
    le = np.log([e for _, e in pts])
    slope, intercept = np.polyfit(la, le, 1)
    return float(slope), float(intercept)
