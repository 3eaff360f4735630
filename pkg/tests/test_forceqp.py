import numpy as np
import pytest

from pendular_lab import analysis, forceqp, model
from conftest import random_feasible_stance


def weight_vec(stance, ax=0.0, ay=0.0):
    return stance.mass * np.array([ax, ay, stance.gravity])


class TestClosedFormCases:
    def test_symmetric_vertical_gives_equal_split_zero_moment(self, go1_rect, com27):
        f_net = weight_vec(go1_rect)
        for alpha in (0.0, 1.0, 1e4):
            sol = forceqp.solve(go1_rect, com27, f_net, forceqp.QpWeights(alpha=alpha))
            assert np.allclose(sol.forces, np.tile(f_net / 4, (4, 1)), atol=1e-8)
            assert np.linalg.norm(sol.hdot) < 1e-9

    def test_pure_regularizer_gives_equal_split(self, go1_rect, com27):
        f_net = weight_vec(go1_rect, ax=0.4, ay=-0.2)
        sol = forceqp.solve(go1_rect, com27, f_net, forceqp.QpWeights(alpha=0.0, lam=0.0))
        assert np.allclose(sol.forces, np.tile(f_net / 4, (4, 1)), atol=1e-9)

    def test_unconstrained_modal_form(self, go1_rect, com27):
        # hdot* = sum_k gamma/(gamma + alpha s_k^2) h_k u_k
        alpha, gamma = 37.0, 1.0
        f_net = weight_vec(go1_rect, ax=0.6, ay=0.3)
        h0 = model.excitation_baseline(go1_rect, com27, np.array([0.6, 0.3, 0.0]))
        jac = analysis.moment_jacobian(go1_rect, com27)
        coef = gamma / (gamma + alpha * jac.singular_values**2)
        expected = jac.left_vectors @ (coef * (jac.left_vectors.T @ h0))
        sol = forceqp.solve_unconstrained(go1_rect, com27, f_net,
                                          forceqp.QpWeights(alpha=alpha, gamma=gamma))
        assert np.allclose(sol.hdot, expected, atol=1e-10)

    def test_alpha_zero_returns_baseline_moment(self, go1_rect, com27):
        f_net = weight_vec(go1_rect, ax=0.5)
        h0 = model.excitation_baseline(go1_rect, com27, np.array([0.5, 0.0, 0.0]))
        sol = forceqp.solve_unconstrained(go1_rect, com27, f_net, forceqp.QpWeights(alpha=0.0))
        assert np.allclose(sol.hdot, h0, atol=1e-10)

    def test_high_alpha_modal_decay(self, go1_rect, com27):
        f_net = weight_vec(go1_rect, ax=0.5, ay=-0.7)
        jac = analysis.moment_jacobian(go1_rect, com27)
        h0 = model.excitation_baseline(go1_rect, com27, np.array([0.5, -0.7, 0.0]))
        modal0 = jac.left_vectors.T @ h0
        sig_sq = jac.singular_values**2
        for alpha in (1e4, 1e6):
            sol = forceqp.solve_unconstrained(go1_rect, com27, f_net,
                                              forceqp.QpWeights(alpha=alpha))
            modal = jac.left_vectors.T @ sol.hdot
            exact = modal0 / (1.0 + alpha * sig_sq)
            assert np.allclose(modal, exact, rtol=1e-9)
        # asymptotic 1/(alpha * sigma^2) decay rate per mode
        assert np.allclose(modal, modal0 / (alpha * sig_sq), rtol=2e-5)


class TestSolverAgreement:
    def test_admm_without_cones_matches_closed_form(self, com27):
        rng = np.random.default_rng(5)
        for trial in range(6):
            stance = random_feasible_stance(rng, 4)
            ax, ay = rng.uniform(-1, 1, size=2)
            f_net = weight_vec(stance, ax, ay)
            w = forceqp.QpWeights(alpha=float(rng.uniform(0.5, 200.0)),
                                  gamma=float(rng.uniform(0.5, 2.0)))
            ref = forceqp.solve_unconstrained(stance, com27, f_net, w)
            sol = forceqp.solve(stance, com27, f_net, w,
                                forceqp.SolverOptions(cone_model="none", tol=1e-13))
            assert np.max(np.abs(sol.forces - ref.forces)) < 1e-8
            assert sol.iterations > 0  # genuinely iterated

    def test_fast_path_matches_forced_admm(self, go1_rect, com27):
        f_net = weight_vec(go1_rect, ax=0.5, ay=-0.3)
        w = forceqp.QpWeights(alpha=100.0)
        fast = forceqp.solve(go1_rect, com27, f_net, w)
        slow = forceqp.solve(go1_rect, com27, f_net, w,
                             forceqp.SolverOptions(use_fast_path=False, tol=1e-13))
        assert fast.iterations == 0
        assert np.max(np.abs(fast.forces - slow.forces)) < 1e-7

    def test_soc_vs_fine_pyramid_bracket_on_active_cones(self, go1_trot, com27):
        # above the channel transition both cones engage; the inner and outer
        # pyramids bracket the cone objective and pin it to 1e-4 relative
        f_net = weight_vec(go1_trot, ax=5.5)
        w = forceqp.QpWeights(alpha=1e6)
        soc = forceqp.solve(go1_trot, com27, f_net, w)
        assert any(soc.cone_active)
        obj = forceqp.qp_objective(go1_trot, com27, soc.forces, w)
        inner = forceqp.solve_pyramid(go1_trot, com27, f_net, w, facets=512, variant="inner")
        outer = forceqp.solve_pyramid(go1_trot, com27, f_net, w, facets=512, variant="outer")
        obj_in = forceqp.qp_objective(go1_trot, com27, inner.forces, w)
        obj_out = forceqp.qp_objective(go1_trot, com27, outer.forces, w)
        assert obj_out <= obj * (1 + 1e-9)
        assert obj <= obj_in * (1 + 1e-9)
        assert (obj_in - obj_out) / obj < 1e-4

    def test_pyramid8_dispatch(self, go1_trot, com27):
        f_net = weight_vec(go1_trot, ax=1.0)
        sol = forceqp.solve(go1_trot, com27, f_net, forceqp.QpWeights(alpha=10.0),
                            forceqp.SolverOptions(cone_model="pyramid8"))
        total = sol.forces.sum(axis=0)
        assert np.allclose(total, f_net, atol=1e-6)


class TestInvariants:
    def cases(self):
        rng = np.random.default_rng(42)
        out = []
        for n in (2, 3, 4):
            for _ in range(3):
                stance = random_feasible_stance(rng, n)
                ax, ay = rng.uniform(-1.5, 1.5, size=2)
                alpha = float(10.0 ** rng.uniform(0, 5))
                out.append((stance, weight_vec(stance, ax, ay), alpha))
        return out

    def test_equality_and_cone_feasibility(self, com27):
        for stance, f_net, alpha in self.cases():
            sol = forceqp.solve(stance, com27, f_net, forceqp.QpWeights(alpha=alpha))
            assert np.linalg.norm(sol.forces.sum(axis=0) - f_net) <= \
                1e-8 * (1.0 + np.linalg.norm(f_net))
            assert all(
                model.friction_contains(c, f, tol=1e-7)
                for c, f in zip(stance.contacts, sol.forces)
            )
            assert sol.objective >= 0.0

    def test_hdot_monotone_in_alpha(self, go1_trot, com27):
        f_net = weight_vec(go1_trot, ax=4.2)  # cone-active regime
        prev = np.inf
        for alpha in (1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6):
            sol = forceqp.solve(go1_trot, com27, f_net, forceqp.QpWeights(alpha=alpha))
            h = np.linalg.norm(sol.hdot)
            assert h <= prev * (1 + 1e-9)
            prev = h

    def test_objective_monotone_in_tol(self, go1_trot, com27):
        f_net = weight_vec(go1_trot, ax=4.2)
        w = forceqp.QpWeights(alpha=1e4)
        objs = []
        for tol in (1e-6, 1e-8, 1e-10, 1e-12):
            sol = forceqp.solve(go1_trot, com27, f_net, w,
                                forceqp.SolverOptions(tol=tol, use_fast_path=False))
            objs.append(forceqp.qp_objective(go1_trot, com27, sol.forces, w))
        for a, b in zip(objs, objs[1:]):
            assert b <= a + 1e-7 * abs(a)

    def test_weight_scaling_leaves_argmin(self, go1_trot, com27):
        f_net = weight_vec(go1_trot, ax=4.2)
        base = forceqp.solve(go1_trot, com27, f_net,
                             forceqp.QpWeights(alpha=1e4, gamma=1.0))
        for s in (0.1, 7.0, 400.0):
            scaled = forceqp.solve(go1_trot, com27, f_net,
                                   forceqp.QpWeights(alpha=1e4 * s, gamma=s))
            assert np.max(np.abs(scaled.forces - base.forces)) < 1e-5

    def test_floor_law_every_alpha(self, go1_trot, com27):
        f_net = weight_vec(go1_trot, ax=1.3, ay=0.6)
        floor = analysis.geometric_floor(go1_trot, com27, f_net).geometric_floor
        for alpha in (0.0, 1.0, 50.0, 1e3, 1e6):
            sol = forceqp.solve(go1_trot, com27, f_net, forceqp.QpWeights(alpha=alpha))
            assert np.linalg.norm(sol.hdot) / go1_trot.mass >= floor - 1e-6

    def test_prefactor_law(self, go1_rect, com27):
        rng = np.random.default_rng(9)
        task = np.array([0.4, -0.3, 0.2])
        f_net = weight_vec(go1_rect)
        for _ in range(20):
            alpha = float(10.0 ** rng.uniform(-1, 3))
            lam = float(10.0 ** rng.uniform(-1, 3))
            w = forceqp.QpWeights(alpha=alpha, gamma=1e-8 * (alpha + lam), lam=lam,
                                  hdot_task=task)
            sol = forceqp.solve(go1_rect, com27, f_net, w)
            assert not any(sol.cone_active)
            pf = analysis.task_prefactor(alpha, lam)
            assert np.linalg.norm(sol.hdot - pf * task) <= 1e-6 * np.linalg.norm(task)

    def test_tracking_bound(self, go1_rect, com27):
        # with a tight tracking requirement the achieved moment rate cannot be
        # much smaller than the target
        task = np.array([0.5, -0.1, 0.3])
        f_net = weight_vec(go1_rect)
        w = forceqp.QpWeights(alpha=1.0, gamma=1e-9, lam=1e6, hdot_task=task)
        sol = forceqp.solve(go1_rect, com27, f_net, w)
        eps = np.linalg.norm(sol.hdot - task)
        assert eps < np.linalg.norm(task)
        assert np.linalg.norm(sol.hdot) >= np.linalg.norm(task) - eps - 1e-8


class TestErrors:
    def test_infeasible_net_force_certificate(self, go1_trot, com27):
        f_net = weight_vec(go1_trot, ax=10.0)  # |a_t| > mu * g
        with pytest.raises(forceqp.InfeasibleNetForceError) as exc:
            forceqp.solve(go1_trot, com27, f_net, forceqp.QpWeights(alpha=1.0))
        err = exc.value
        assert err.gap > 1e-6 * np.linalg.norm(f_net)
        assert np.linalg.norm(err.certificate) == pytest.approx(1.0, abs=1e-9)
        # certificate points from the achievable set toward the requested force
        assert err.certificate @ np.array([1.0, 0.0, 0.0]) > 0

    def test_minkowski_gap_zero_for_feasible(self, go1_trot, com27):
        gap, _ = forceqp.minkowski_gap(go1_trot, weight_vec(go1_trot, ax=1.0))
        assert gap == 0.0

    def test_nonconvergence_raises_with_diagnostics(self, go1_trot, com27):
        f_net = weight_vec(go1_trot, ax=4.2)
        with pytest.raises(forceqp.ConvergenceError) as exc:
            forceqp.solve(go1_trot, com27, f_net, forceqp.QpWeights(alpha=1e4),
                          forceqp.SolverOptions(max_iter=3, use_fast_path=False))
        assert "primal_residual" in exc.value.diagnostics

    def test_gamma_zero_rejected(self):
        with pytest.raises(ValueError):
            forceqp.QpWeights(alpha=1.0, gamma=0.0)

    def test_unknown_cone_model_rejected(self):
        with pytest.raises(ValueError):
            forceqp.SolverOptions(cone_model="octagon")
