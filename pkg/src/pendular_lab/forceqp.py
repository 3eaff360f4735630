"""Per-step contact-force distribution QP.

Minimizes  alpha*||hdot||^2 + lam*||hdot - hdot_task||^2 + gamma*sum_i ||f_i||^2
subject to sum_i f_i = f_net and f_i inside each second-order friction cone.

The equality constraint is eliminated exactly by writing the forces as the
equal split plus an orthonormal null-space coordinate vector z of dimension
3(N-1).  The cone-constrained problem is then solved by over-relaxed ADMM
with exact closed-form projection onto each second-order cone; the
unconstrained problem has a closed form through the SVD of the moment map
and doubles as the solver oracle when no cone is active.  A pyramid-
linearized path (m facets per cone, solved by an SQP/active-set method) is
provided as a cross-check oracle only.

The objective is rescaled by 1/(1+alpha) before iterating so that large
balance weights (1e5..1e6 in the stress sweeps) keep the iteration matrix
well conditioned; tolerances apply to the rescaled residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .model import (
    StanceConfig,
    as_vec3,
    friction_contains,
    moment_arm_matrix,
    net_wrench,
    sum_constraint_nullspace,
)


class InfeasibleNetForceError(RuntimeError):
    """f_net lies outside the Minkowski sum of the friction cones.

    ``certificate`` is the unit direction from the closest achievable
    contact-force sum toward f_net; ``gap`` is the distance in Newtons.
    """

    def __init__(self, gap: float, certificate: np.ndarray):
        self.gap = float(gap)
        self.certificate = np.asarray(certificate, dtype=float)
        super().__init__(
            f"net force infeasible for the friction cones (gap {gap:.3e} N "
            f"along {np.array2string(self.certificate, precision=4)})"
        )


class ConvergenceError(RuntimeError):
    """Solver stopped without meeting tolerances; carries last residuals."""

    def __init__(self, message: str, diagnostics: dict):
        self.diagnostics = dict(diagnostics)
        super().__init__(f"{message} ({self.diagnostics})")


@dataclass(frozen=True)
class QpWeights:
    """Objective weights.  gamma must be positive so the minimizer is unique."""

    alpha: float = 0.0
    gamma: float = 1.0
    lam: float = 0.0
    hdot_task: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.alpha < 0.0 or self.lam < 0.0:
            raise ValueError("alpha and lam must be non-negative")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive (it breaks degenerate ties)")
        object.__setattr__(self, "hdot_task", as_vec3(self.hdot_task, "hdot_task"))


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 100_000
    cone_model: str = "soc"  # "soc" | "pyramid8" | "none"
    over_relax: float = 1.7
    rho: float | None = None
    use_fast_path: bool = True
    pyramid_variant: str = "inner"  # "inner" (conservative) | "outer"

    def __post_init__(self):
        if self.cone_model not in ("soc", "pyramid8", "none"):
            raise ValueError(f"unknown cone_model {self.cone_model!r}")
        if self.pyramid_variant not in ("inner", "outer"):
            raise ValueError(f"unknown pyramid_variant {self.pyramid_variant!r}")
        if not 1.0 <= self.over_relax < 2.0:
            raise ValueError("over_relax must be in [1, 2)")


@dataclass(frozen=True)
class ForceSolution:
    forces: np.ndarray  # (N, 3)
    hdot: np.ndarray  # (3,)
    objective: float
    iterations: int
    primal_residual: float
    cone_active: tuple[bool, ...]


def qp_objective(stance: StanceConfig, com, forces, w: QpWeights) -> float:
    """Unscaled objective value of a force distribution."""
    h = net_wrench(stance, com, forces).hdot
    f = np.atleast_2d(np.asarray(forces, dtype=float))
    return float(
        w.alpha * h @ h
        + w.lam * (h - w.hdot_task) @ (h - w.hdot_task)
        + w.gamma * (f * f).sum()
    )


# -- problem assembly ---------------------------------------------------------

class _Problem:
    """Cached geometry and objective data for one (stance, com, f_net, w)."""

    def __init__(self, stance: StanceConfig, com, f_net, w: QpWeights, basis: np.ndarray | None = None):
        self.stance = stance
        self.n = stance.n_contacts
        self.f_net = as_vec3(f_net, "f_net")
        self.w = w
        self.arm = moment_arm_matrix(stance, com)  # (3, 3N)
        if basis is None:
            basis = sum_constraint_nullspace(self.n)  # (3N, d)
        self.basis = basis
        self.dim = self.basis.shape[1]
        self.f0 = np.tile(self.f_net / self.n, self.n)  # stacked equal split
        self.h0 = self.arm @ self.f0
        self.jac = self.arm @ self.basis  # (3, d)
        self.scale = 1.0 / (1.0 + w.alpha)
        self.wsum = w.alpha + w.lam
        # gradient of the scaled objective: M z + c_lin
        self.mat = 2.0 * self.scale * (
            self.wsum * self.jac.T @ self.jac + w.gamma * np.eye(self.dim)
        )
        self.c_lin = 2.0 * self.scale * self.jac.T @ (
            self.wsum * self.h0 - w.lam * w.hdot_task
        )

    def forces_of(self, z: np.ndarray) -> np.ndarray:
        return (self.f0 + self.basis @ z).reshape(self.n, 3)

    def stacked_of(self, z: np.ndarray) -> np.ndarray:
        return self.f0 + self.basis @ z

    def hdot_of(self, z: np.ndarray) -> np.ndarray:
        return self.h0 + self.jac @ z

    def objective_of(self, z: np.ndarray) -> float:
        h = self.hdot_of(z)
        dt = h - self.w.hdot_task
        f = self.stacked_of(z)
        return float(self.w.alpha * h @ h + self.w.lam * dt @ dt + self.w.gamma * f @ f)

    def scaled_value_and_grad(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        g = self.mat @ z + self.c_lin
        val = self.scale * self.objective_of(z)
        return val, g

    def unconstrained_z(self) -> np.ndarray:
        if self.dim == 0:
            return np.zeros(0)
        u, sig, vt = np.linalg.svd(self.jac, full_matrices=False)
        b = self.wsum * self.h0 - self.w.lam * self.w.hdot_task
        coef = sig / (self.wsum * sig**2 + self.w.gamma)
        return -vt.T @ (coef * (u.T @ b))

    def solution_from_z(self, z, iterations, primal_residual) -> ForceSolution:
        forces = self.forces_of(z)
        return ForceSolution(
            forces=forces,
            hdot=self.hdot_of(z),
            objective=self.objective_of(z),
            iterations=int(iterations),
            primal_residual=float(primal_residual),
            cone_active=_active_flags(self.stance, forces),
        )


def _active_flags(stance: StanceConfig, forces: np.ndarray) -> tuple[bool, ...]:
    flags = []
    for contact, f in zip(stance.contacts, forces):
        fn = float(f @ contact.normal)
        ft = float(np.linalg.norm(f - fn * contact.normal))
        slack = 1e-6 * (1.0 + float(np.linalg.norm(f)))
        flags.append(ft >= contact.mu * fn - slack)
    return tuple(flags)


def _cone_feasible_exact(stance: StanceConfig, forces: np.ndarray) -> bool:
    """Feasibility up to roundoff only; used to accept the closed form."""
    return all(
        friction_contains(c, f, tol=1e-12) for c, f in zip(stance.contacts, forces)
    )


# -- second-order cone projection ---------------------------------------------

def project_friction_cone(f, normal, mu: float) -> np.ndarray:
    """Euclidean projection of a single force onto {f_n >= 0, ||f_t|| <= mu f_n}."""
    f = as_vec3(f, "force")
    n = as_vec3(normal, "normal")
    fn = float(f @ n)
    t_vec = f - fn * n
    ft = float(np.linalg.norm(t_vec))
    if ft <= mu * fn:
        return f.copy()
    if mu * ft <= -fn:
        return np.zeros(3)
    coef = (fn + mu * ft) / (1.0 + mu * mu)
    return coef * (n + mu * t_vec / ft)


def _project_cones_stacked(v: np.ndarray, normals: np.ndarray, mus: np.ndarray) -> np.ndarray:
    """Vectorized cone projection of stacked forces (N*3,) -> (N*3,)."""
    f = v.reshape(-1, 3)
    fn = np.einsum("ij,ij->i", f, normals)
    t_vec = f - fn[:, None] * normals
    ft = np.linalg.norm(t_vec, axis=1)
    out = f.copy()

    inside = ft <= mus * fn
    polar = mus * ft <= -fn
    boundary = ~(inside | polar)

    out[polar] = 0.0
    if np.any(boundary):
        b = boundary
        coef = (fn[b] + mus[b] * ft[b]) / (1.0 + mus[b] ** 2)
        t_hat = t_vec[b] / ft[b][:, None]
        out[b] = coef[:, None] * (normals[b] + mus[b][:, None] * t_hat)
    return out.reshape(-1)


# -- feasibility of the net force ---------------------------------------------

def minkowski_gap(stance: StanceConfig, f_net, iters: int = 4000) -> tuple[float, np.ndarray]:
    """Distance from f_net to the set of achievable contact-force sums.

    Returns (gap, certificate direction).  When all contacts share one
    normal the Minkowski sum of the cones is the widest single cone and the
    gap is a closed-form cone projection; otherwise the projection is
    computed by the same splitting iteration on the feasibility problem
    min ||sum_i f_i - f_net|| over f_i in K_i.
    """
    fn = as_vec3(f_net, "f_net")
    normals = stance.normals
    mus = stance.mus
    ref = max(1.0, float(np.linalg.norm(fn)))

    if np.all(np.abs(normals - normals[0]) < 1e-12):
        proj = project_friction_cone(fn, normals[0], float(mus.max()))
        gap = float(np.linalg.norm(fn - proj))
        cert = (fn - proj) / gap if gap > 0 else np.zeros(3)
        return gap, cert

    n3 = 3 * stance.n_contacts
    rho = 1.0
    x = np.tile(fn / stance.n_contacts, stance.n_contacts)
    y = x.copy()
    u = np.zeros(n3)
    nc = stance.n_contacts
    for _ in range(iters):
        # x-step: argmin 0.5||Sx - fn||^2 + rho/2 ||x - (y-u)||^2 (Woodbury)
        v = y - u
        sv = v.reshape(nc, 3).sum(axis=0)
        x = v - np.tile((sv - fn) / (nc + rho), nc)
        y_new = _project_cones_stacked(x + u, normals, mus)
        u += x - y_new
        if np.max(np.abs(y_new - y)) < 1e-14 * ref:
            y = y_new
            break
        y = y_new
    achieved = y.reshape(nc, 3).sum(axis=0)
    gap = float(np.linalg.norm(fn - achieved))
    cert = (fn - achieved) / gap if gap > 0 else np.zeros(3)
    return gap, cert


def _check_feasible(stance: StanceConfig, f_net) -> None:
    gap, cert = minkowski_gap(stance, f_net)
    if gap > 1e-6 * max(1.0, float(np.linalg.norm(f_net))):
        raise InfeasibleNetForceError(gap, cert)


# -- solvers -------------------------------------------------------------------

def solve_unconstrained(stance: StanceConfig, com, f_net, w: QpWeights) -> ForceSolution:
    """Closed-form minimizer ignoring the cones (null-space parametrization).

    With lam = 0 this realizes hdot* = sum_k gamma/(gamma + alpha s_k^2) h_k u_k
    over the singular triplets (s_k, u_k) of the moment map; it is the oracle
    for :func:`solve` whenever no cone is active at the optimum.
    """
    prob = _Problem(stance, com, f_net, w)
    z = prob.unconstrained_z()
    return prob.solution_from_z(z, iterations=0, primal_residual=0.0)


def solve(
    stance: StanceConfig,
    com,
    f_net,
    w: QpWeights,
    opts: SolverOptions | None = None,
    warm: ForceSolution | None = None,
) -> ForceSolution:
    """Cone-constrained force distribution for one time instant.

    Raises :class:`InfeasibleNetForceError` when f_net cannot be summed from
    the cones, and :class:`ConvergenceError` when the iteration budget is
    exhausted.  With ``cone_model="none"`` the cones are ignored but the
    iterative path is still used (so it can be cross-checked against
    :func:`solve_unconstrained`).
    """
    opts = opts or SolverOptions()
    prob = _Problem(stance, com, f_net, w)

    if opts.cone_model == "pyramid8":
        _check_feasible(stance, f_net)
        return _solve_pyramid_problem(prob, facets=8, variant=opts.pyramid_variant, opts=opts)

    if opts.cone_model == "soc":
        _check_feasible(stance, f_net)
        z_unc = prob.unconstrained_z()
        if opts.use_fast_path and _cone_feasible_exact(stance, prob.forces_of(z_unc)):
            return prob.solution_from_z(z_unc, iterations=0, primal_residual=0.0)

    return _solve_admm(prob, opts, warm)


def solve_in_subspace(
    stance: StanceConfig,
    com,
    f_net,
    w: QpWeights,
    basis: np.ndarray,
    opts: SolverOptions | None = None,
    warm: ForceSolution | None = None,
) -> ForceSolution:
    """Same QP with the redistribution restricted to a column subspace.

    ``basis`` must have orthonormal columns inside the zero-sum force
    subspace.  Used by the kink analysis to take the infimum over the
    moment-effective channel only: sliding force along the two-foot axis is
    moment-neutral but can buy cone margin, so the unrestricted QP defers
    the cone transition beyond the closed-form critical acceleration.
    """
    opts = opts or SolverOptions()
    prob = _Problem(stance, com, f_net, w, basis=np.asarray(basis, dtype=float))
    _check_feasible(stance, f_net)
    if opts.cone_model == "soc" and opts.use_fast_path:
        z_unc = prob.unconstrained_z()
        if _cone_feasible_exact(stance, prob.forces_of(z_unc)):
            return prob.solution_from_z(z_unc, iterations=0, primal_residual=0.0)
    return _solve_admm(prob, opts, warm)


def _solve_admm(prob: _Problem, opts: SolverOptions, warm: ForceSolution | None) -> ForceSolution:
    n, d = prob.n, prob.dim
    if d == 0:
        return prob.solution_from_z(np.zeros(0), iterations=0, primal_residual=0.0)

    project = opts.cone_model != "none"
    normals, mus = prob.stance.normals, prob.stance.mus
    ref = 1.0 + float(np.max(np.abs(prob.f0)))

    sig_max_sq = float(np.linalg.norm(prob.jac, 2)) ** 2
    eig_lo = 2.0 * prob.scale * prob.w.gamma
    eig_hi = 2.0 * prob.scale * (prob.wsum * sig_max_sq + prob.w.gamma)
    rho = opts.rho if opts.rho is not None else float(np.sqrt(eig_lo * eig_hi))

    def factor(r):
        return np.linalg.cholesky(prob.mat + r * np.eye(d))

    chol = factor(rho)

    if warm is not None:
        f_warm = np.asarray(warm.forces, dtype=float).reshape(-1)
        z = prob.basis.T @ (f_warm - prob.f0)
    elif project:
        z = prob.unconstrained_z()
    else:
        z = np.zeros(d)  # cones disabled: iterate from scratch so the
        # closed form stays an independent cross-check
    y = prob.stacked_of(z)
    if project:
        y = _project_cones_stacked(y, normals, mus)
    u = np.zeros(3 * n)

    eta = opts.over_relax
    r_prim = np.inf
    s_dual = np.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        rhs = rho * (prob.basis.T @ (y - u)) - prob.c_lin
        z = _cho_solve(chol, rhs)
        fz = prob.stacked_of(z)
        w_rel = eta * fz + (1.0 - eta) * y
        y_new = w_rel + u
        if project:
            y_new = _project_cones_stacked(y_new, normals, mus)
        u += w_rel - y_new

        r_prim = float(np.max(np.abs(fz - y_new)))
        s_dual = rho * float(np.max(np.abs(prob.basis.T @ (y_new - y))))
        y = y_new

        if max(r_prim, s_dual) <= opts.tol * ref:
            break

        if it % 100 == 0:  # residual balancing keeps both residuals falling
            if r_prim > 10.0 * s_dual and rho < 1e8:
                rho *= 2.0
                u *= 0.5
                chol = factor(rho)
            elif s_dual > 10.0 * r_prim and rho > 1e-12:
                rho *= 0.5
                u *= 2.0
                chol = factor(rho)
    else:
        if project:
            gap, cert = minkowski_gap(prob.stance, prob.f_net)
            if gap > 1e-6 * max(1.0, float(np.linalg.norm(prob.f_net))):
                raise InfeasibleNetForceError(gap, cert)
        raise ConvergenceError(
            "force QP did not converge",
            {
                "iterations": it,
                "primal_residual": r_prim,
                "dual_residual": s_dual,
                "tol": opts.tol * ref,
            },
        )

    return prob.solution_from_z(z, iterations=it, primal_residual=r_prim)


def _cho_solve(chol: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    tmp = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, tmp)


# -- pyramid-linearized cross check --------------------------------------------

def _tangent_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    seed = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = seed - (seed @ normal) * normal
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(normal, t1)


def pyramid_facet_rows(stance: StanceConfig, facets: int, variant: str) -> tuple[np.ndarray, np.ndarray]:
    """Linear rows (G, h): the pyramid cone constraints are G @ f_stacked <= h.

    ``variant="inner"`` inscribes the pyramid in the cone (conservative,
    effective friction mu*cos(pi/m)); ``"outer"`` circumscribes it.
    """
    rows = []
    for i, contact in enumerate(stance.contacts):
        t1, t2 = _tangent_basis(contact.normal)
        mu_eff = contact.mu * (np.cos(np.pi / facets) if variant == "inner" else 1.0)
        for j in range(facets):
            th = 2.0 * np.pi * j / facets
            a = np.cos(th) * t1 + np.sin(th) * t2 - mu_eff * contact.normal
            row = np.zeros(3 * stance.n_contacts)
            row[3 * i : 3 * i + 3] = a
            rows.append(row)
        row = np.zeros(3 * stance.n_contacts)
        row[3 * i : 3 * i + 3] = -contact.normal
        rows.append(row)
    g = np.array(rows)
    return g, np.zeros(g.shape[0])


def solve_pyramid(
    stance: StanceConfig,
    com,
    f_net,
    w: QpWeights,
    facets: int = 8,
    variant: str = "inner",
    opts: SolverOptions | None = None,
) -> ForceSolution:
    """Cross-check oracle: same QP with each cone replaced by an m-facet pyramid."""
    opts = opts or SolverOptions()
    prob = _Problem(stance, com, f_net, w)
    return _solve_pyramid_problem(prob, facets, variant, opts)


def _solve_pyramid_problem(prob: _Problem, facets: int, variant: str, opts: SolverOptions) -> ForceSolution:
    g_f, _ = pyramid_facet_rows(prob.stance, facets, variant)
    g = g_f @ prob.basis  # constraints on z
    h = -(g_f @ prob.f0)

    def fun(z):
        return prob.scaled_value_and_grad(z)

    z0 = prob.unconstrained_z()
    viol = g @ z0 - h
    if prob.dim > 0 and np.any(viol > 0):
        z0 = np.zeros(prob.dim)  # start from the equal split; SLSQP restores
        # feasibility when even that sits outside an inner pyramid

    res = optimize.minimize(
        fun,
        z0,
        jac=True,
        method="SLSQP",
        constraints=[{"type": "ineq", "fun": lambda z: h - g @ z, "jac": lambda z: -g}],
        options={"maxiter": 800, "ftol": 1e-16},
    )
    if not res.success and res.status != 8:  # 8: positive directional derivative (stalled at optimum)
        raise ConvergenceError(
            "pyramid QP did not converge", {"status": res.status, "message": res.message}
        )
    worst = float(np.max(g @ res.x - h, initial=0.0))
    return prob.solution_from_z(res.x, iterations=res.nit, primal_residual=max(worst, 0.0))
