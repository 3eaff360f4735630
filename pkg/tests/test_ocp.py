import numpy as np
import pytest

from pendular_lab import forceqp, model, ocp


def small_problem(stance, alpha=3.0, beta=2.0, lam=0.5, knots=5, horizon=0.8):
    task = np.tile([0.1, -0.2, 0.05], (knots, 1)) if lam else None
    return ocp.OcpProblem(
        stance=stance,
        horizon=horizon,
        knots=knots,
        start=ocp.BoundaryState((0.05, 0.0, 0.30), (0, 0, 0)),
        goal=ocp.BoundaryState((0.0, 0.0, 0.30), (0, 0, 0)),
        alpha=alpha,
        beta=beta,
        gamma=1.0,
        lam=lam,
        hdot_task=task,
    )


def lean_problem(stance, alpha, beta, gamma=1.0, knots=40, horizon=2.0):
    """Rest-to-rest fore-aft lean: excites the vertical channel through the
    offset coupling, used by the beta-term and tightness checks."""
    return ocp.OcpProblem(
        stance=stance,
        horizon=horizon,
        knots=knots,
        start=ocp.BoundaryState((0.06, 0.0, 0.30), (0, 0, 0)),
        goal=ocp.BoundaryState((0.0, 0.0, 0.30), (0, 0, 0)),
        alpha=alpha,
        beta=beta,
        gamma=gamma,
    )


class TestGradient:
    def test_analytic_gradient_matches_central_differences(self, pm_rect):
        problem = small_problem(pm_rect)
        tr = ocp._Transcription(problem, ocp.OcpOptions())
        tr.mu_pos[:] = [0.1, -0.2, 0.3]
        tr.mu_vel[:] = [-0.05, 0.15, 0.02]
        tr.cone_mult[:] = 0.5
        rng = np.random.default_rng(7)
        x = np.tile([1.0, -2.0, 36.8], (5, 4, 1)).reshape(-1)
        x = x + rng.normal(scale=3.0, size=x.size)
        _, grad = tr.value_and_grad(x)
        h = 1e-6
        num = np.empty_like(x)
        for i in range(x.size):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            num[i] = (tr.value_and_grad(xp)[0] - tr.value_and_grad(xm)[0]) / (2 * h)
        rel = np.abs(num - grad) / np.maximum(1e-8, np.abs(num) + np.abs(grad))
        assert rel.max() < 1e-5


class TestSolve:
    def test_static_problem_is_constant_equal_split(self, pm_rect):
        problem = ocp.OcpProblem(
            stance=pm_rect, horizon=2.0, knots=30,
            start=ocp.BoundaryState((0, 0, 0.30), (0, 0, 0)),
            goal=ocp.BoundaryState((0, 0, 0.30), (0, 0, 0)),
            alpha=10.0, beta=1.0, gamma=1.0)
        sol = ocp.solve_ocp(problem)
        static = pm_rect.mass * pm_rect.gravity / 4.0
        assert sol.eps_h < 1e-8
        assert sol.eps_pend < 1e-4
        assert np.allclose(sol.knot_forces[..., 2], static, atol=1e-4)
        assert np.allclose(sol.knot_forces[..., :2], 0.0, atol=1e-4)
        assert sol.bc_residual <= 1e-6
        assert sol.lipm_r2 is None  # zero-motion sentinel

    def test_dynamics_consistency(self, pm_rect):
        sol = ocp.solve_ocp(small_problem(pm_rect, knots=12, horizon=1.5))
        com, vel, acc = ocp.integrate_forces(small_problem(pm_rect, knots=12, horizon=1.5),
                                             sol.knot_forces)
        assert np.max(np.abs(com - sol.com)) < 1e-12
        assert np.max(np.abs(vel - sol.com_vel)) < 1e-12
        assert np.max(np.abs(acc - sol.com_acc)) < 1e-12

    def test_objective_is_running_cost_quadrature(self, pm_rect):
        problem = small_problem(pm_rect, knots=12, horizon=1.5)
        sol = ocp.solve_ocp(problem)
        w = np.full(12, problem.dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        total = 0.0
        for k in range(12):
            h = model.net_wrench(pm_rect, sol.com[k], sol.knot_forces[k]).hdot
            dtask = h - problem.hdot_task[k]
            total += w[k] * (
                problem.alpha * h @ h
                + problem.lam * dtask @ dtask
                + problem.beta * (problem.normal @ sol.com_acc[k]) ** 2
                + problem.gamma * (sol.knot_forces[k] ** 2).sum()
            )
        assert sol.objective == pytest.approx(total, rel=1e-9)

    def test_cone_feasibility_at_knots(self, pm_rect):
        sol = ocp.solve_ocp(small_problem(pm_rect, knots=12, horizon=1.5))
        for forces in sol.knot_forces:
            for c, f in zip(pm_rect.contacts, forces):
                assert model.friction_contains(c, f, tol=1e-6)

    def test_infeasible_boundary_raises(self, pm_rect):
        from dataclasses import replace

        low_mu = model.StanceConfig(
            tuple(replace(c, mu=0.05) for c in pm_rect.contacts), pm_rect.mass)
        problem = ocp.OcpProblem(
            stance=low_mu, horizon=0.5, knots=8,
            start=ocp.BoundaryState((0, 0, 0.30), (0, 0, 0)),
            goal=ocp.BoundaryState((5.0, 0, 0.30), (0, 0, 0)),
            alpha=1.0, beta=1.0, gamma=1.0)
        opts = ocp.OcpOptions(max_outer=4, max_inner=200)
        with pytest.raises((ocp.InfeasibleBoundaryError, forceqp.ConvergenceError)):
            ocp.solve_ocp(problem, opts)


class TestMetrics:
    def make_solution(self, stance, times, forces):
        problem = ocp.OcpProblem(
            stance=stance, horizon=float(times[-1]), knots=len(times),
            start=ocp.BoundaryState((0, 0, 0.3), (0, 0, 0)),
            goal=ocp.BoundaryState((0, 0, 0.3), (0, 0, 0)))
        com, vel, acc = ocp.integrate_forces(problem, forces)
        return ocp.OcpSolution(
            times=np.asarray(times), knot_forces=np.asarray(forces), com=com,
            com_vel=vel, com_acc=acc, objective=0.0, eps_h=0.0, eps_pend=0.0,
            lipm_r2=None, iterations=0, stationarity=0.0, bc_residual=0.0,
            cone_violation=0.0)

    def test_exact_pendular_trajectory(self, pm_rect):
        # analytic inverted-pendulum orbit about the stance center
        g, h = pm_rect.gravity, 0.30
        omega = model.pendulum_frequency(h, g)
        times = np.linspace(0.0, 0.6, 25)
        amp = np.array([0.03, -0.01])
        com = np.zeros((25, 3))
        acc = np.zeros((25, 3))
        com[:, 2] = h
        for i, t in enumerate(times):
            com[i, :2] = amp * np.cosh(omega * t)
            acc[i, :2] = (g / h) * com[i, :2]
        m = pm_rect.mass
        forces = np.array([
            np.tile((m * acc[i] + [0, 0, m * g]) / 4.0, (4, 1)) for i in range(25)
        ])
        sol = ocp.OcpSolution(
            times=times, knot_forces=forces, com=com, com_vel=np.zeros((25, 3)),
            com_acc=acc, objective=0.0, eps_h=0.0, eps_pend=0.0, lipm_r2=None,
            iterations=0, stationarity=0.0, bc_residual=0.0, cone_violation=0.0)
        eps_pend, eps_h, r2 = ocp.metrics(sol, pm_rect)
        assert eps_h < 1e-10
        assert eps_pend < 1e-10
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_equal_split_matches_baseline_oracle(self, pm_rect):
        # arbitrary smooth equal-split force trajectory: eps_h must equal the
        # quadrature of the equal-split excitation baseline
        times = np.linspace(0.0, 1.2, 30)
        m, g = pm_rect.mass, pm_rect.gravity
        acc_profile = np.column_stack([
            0.6 * np.sin(2 * np.pi * times), -0.4 * np.cos(3 * times), np.zeros_like(times)])
        forces = np.array([
            np.tile((m * a + [0, 0, m * g]) / 4.0, (4, 1)) for a in acc_profile
        ])
        sol = self.make_solution(pm_rect, times, forces)
        _, eps_h, _ = ocp.metrics(sol, pm_rect)
        w = np.full(30, times[1] - times[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        norms = [
            np.linalg.norm(model.excitation_baseline(pm_rect, sol.com[k], sol.com_acc[k]))
            for k in range(30)
        ]
        expected = float(w @ norms) / times[-1]
        assert eps_h == pytest.approx(expected, rel=1e-12)

    def test_zero_motion_r2_sentinel(self, pm_rect):
        com = np.tile([0.0, 0.0, 0.3], (10, 1))
        acc = np.zeros((10, 3))
        assert ocp.lipm_fit_r2(com, acc, 9.81) is None


@pytest.fixture(scope="module")
def mini_sweep(pm_rect):
    return {
        alpha: ocp.solve_ocp(lean_problem(pm_rect, alpha, beta=alpha))
        for alpha in (1.0, 10.0, 50.0, 100.0, 500.0, 1000.0)
    }


class TestSweepProperties:
    def test_monotone_collapse(self, mini_sweep):
        alphas = sorted(mini_sweep)
        eps = [mini_sweep[a].eps_h for a in alphas]
        for a, b in zip(eps, eps[1:]):
            assert b <= a * 1.05  # 5% slack for solver noise

    def test_tightness_band(self, mini_sweep):
        # joint (alpha, beta) sweep exposes the two-channel collapse rate:
        # the pendular deviation times alpha stays in a narrow band
        prods = [a * s.eps_pend for a, s in mini_sweep.items() if a >= 50.0]
        assert max(prods) / min(prods) < 10.0

    def test_beta_term_suppression(self, pm_rect):
        def avg_nacc_sq(beta):
            problem = lean_problem(pm_rect, alpha=200.0, beta=beta, gamma=0.01)
            sol = ocp.solve_ocp(problem)
            w = np.full(problem.knots, problem.dt)
            w[0] *= 0.5
            w[-1] *= 0.5
            return float(w @ sol.com_acc[:, 2] ** 2) / problem.horizon

        assert avg_nacc_sq(1.0) / avg_nacc_sq(100.0) >= 10.0


class TestCollapseRateFit:
    def test_exact_inverse_law(self):
        pts = [(a, 8.4 / a) for a in (1.0, 10.0, 100.0, 1000.0)]
        slope, intercept = ocp.collapse_rate_fit(pts)
        assert slope == pytest.approx(-1.0, abs=1e-12)
        assert np.exp(intercept) == pytest.approx(8.4, rel=1e-12)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            ocp.collapse_rate_fit([(10.0, 1.0)])
        with pytest.raises(ValueError):
            ocp.collapse_rate_fit([(1.0, 1.0), (2.0, 0.5), (4.0, 0.25)])

    def test_positive_required(self):
        with pytest.raises(ValueError):
            ocp.collapse_rate_fit([(1.0, 1.0), (2.0, -0.5), (4.0, 0.2), (8.0, 0.1)])
