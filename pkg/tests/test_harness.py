import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from pendular_lab import forceqp, harness, model


class TestScenario:
    def test_frames_shapes_and_kinematics(self, go1_cfg, go1_rect):
        scen = harness.sway_scenario(go1_cfg, go1_rect, "sway")
        t, com, acc = scen.frames()
        assert t.shape == (200,)
        assert com.shape == (200, 3) and acc.shape == (200, 3)
        assert np.allclose(com[:, 2], 0.27)
        # second derivative of the prescribed sine matches the closed form
        w = 2 * math.pi * go1_cfg.scenario.sway_freq_y
        k = 37
        assert acc[k, 1] == pytest.approx(-(w**2) * com[k, 1], rel=1e-12)

    def test_orbit_boundary_rides_a_single_pendulum(self, pm_cfg):
        start, goal = harness.orbit_boundary(pm_cfg)
        h = pm_cfg.robot.height
        omega = model.pendulum_frequency(h, pm_cfg.robot.gravity)
        # integrate the pendulum about the stance center from the start state
        pos, vel = start.pos[:2].copy(), start.vel[:2].copy()
        n = 40000
        dt = pm_cfg.ocp.horizon / n
        for _ in range(n):
            acc = omega**2 * pos
            k1v = acc
            pos_mid = pos + 0.5 * dt * vel
            vel_mid = vel + 0.5 * dt * k1v
            pos = pos + dt * vel_mid
            vel = vel + dt * omega**2 * pos_mid
        assert np.allclose(pos, goal.pos[:2], atol=1e-5)
        assert np.allclose(vel, goal.vel[:2], atol=1e-4)


class TestSweepResults:
    def test_rows_sorted_by_parameter(self, test_b_result, test_c_result, kink_result):
        for res in (test_b_result, test_c_result, kink_result):
            params = [row[0] for row in res.rows]
            assert params == sorted(params)

    def test_spot_check_rows_recomputable(self, go1_cfg, test_b_result, test_c_result,
                                          prefactor_result):
        rng = np.random.default_rng(go1_cfg.output.seed)
        # test_b rows: recompute the frame-mean residual at that alpha
        stance = go1_cfg.rectangle_stance()
        scen = harness.sway_scenario(go1_cfg, stance, "sway")
        _, com_frames, acc_frames = scen.frames()
        gvec = np.array([0.0, 0.0, -stance.gravity])
        for res, stance_r in ((test_b_result, stance), (test_c_result, go1_cfg.trot_stance())):
            idx = rng.integers(0, len(res.rows), size=3)
            for i in idx:
                alpha = res.rows[i][0]
                w = forceqp.QpWeights(alpha=alpha, gamma=1.0)
                vals = [
                    np.linalg.norm(forceqp.solve(stance_r, c, stance_r.mass * (a - gvec), w).hdot)
                    for c, a in zip(com_frames, acc_frames)
                ]
                assert res.rows[i][1] == pytest.approx(np.mean(vals) / stance_r.mass, rel=1e-9)
        # prefactor row
        i = int(rng.integers(0, len(prefactor_result.rows)))
        ratio = prefactor_result.rows[i][0]
        assert prefactor_result.rows[i][1] == pytest.approx(ratio / (1.0 + ratio), rel=1e-12)

    def test_cancellation_ratios(self, test_b_result, test_c_result):
        assert test_b_result.fitted["cancellation_ratio"] >= 50.0  # full-rank stance
        assert test_c_result.fitted["cancellation_ratio"] <= 2.0  # two-contact stance

    def test_b_published_endpoints(self, test_b_result):
        # published sweep endpoints: 0.58 m^2/s^2 at alpha=1 down to 0.0084 at 1000
        first = test_b_result.rows[0]
        last = test_b_result.rows[-1]
        assert first[0] == 1.0 and last[0] == 1000.0
        assert first[1] == pytest.approx(0.58, rel=0.10)
        assert last[1] == pytest.approx(0.0084, rel=0.10)

    def test_prefactor_midpoint(self, prefactor_result):
        row = next(r for r in prefactor_result.rows if r[0] == pytest.approx(1.0, rel=1e-12))
        assert row[2] == pytest.approx(0.5, abs=1e-6)  # measured ratio at lam = alpha

    def test_c_fraction_stats(self, test_c_result):
        assert test_c_result.fitted["fraction_mean"] == pytest.approx(0.64, abs=0.01)
        assert test_c_result.fitted["fraction_max"] > 0.98

    def test_e_rows(self, test_e_result):
        assert test_e_result.columns[0] == "alpha"
        inside = test_e_result.column("zmp_inside_fraction")
        assert np.all(inside == 1.0)


class TestArtifacts:
    def test_csv_determinism(self, go1_cfg, tmp_path):
        r1 = harness.run_prefactor(go1_cfg)
        r2 = harness.run_prefactor(go1_cfg)
        p1 = harness.write_sweep(r1, tmp_path / "a", timestamp="T0")
        p2 = harness.write_sweep(r2, tmp_path / "b", timestamp="T0")
        assert p1["csv"].read_bytes() == p2["csv"].read_bytes()

    def test_write_read_round_trip(self, test_b_result, tmp_path):
        paths = harness.write_sweep(test_b_result, tmp_path, timestamp="T0")
        cols, rows = harness.read_csv(paths["csv"])
        assert cols == test_b_result.columns
        assert len(rows) == len(test_b_result.rows)
        for a, b in zip(rows, test_b_result.rows):
            assert a == pytest.approx(b, rel=1e-9)
        summary = harness.read_summary(paths["summary"])
        assert summary["fitted_k_e"] == pytest.approx(test_b_result.fitted["k_e"], rel=1e-9)

    def test_svg_is_valid_xml(self, test_b_result, tmp_path):
        paths = harness.write_sweep(test_b_result, tmp_path, timestamp="T0")
        root = ET.parse(paths["svg"]).getroot()
        assert root.tag.endswith("svg")
        assert paths["svg"].name == "test_b_T0.svg"

    def test_extra_tables_written(self, test_c_result, tmp_path):
        paths = harness.write_sweep(test_c_result, tmp_path, timestamp="T0")
        cols, rows = harness.read_csv(paths["test_c_fractions"])
        assert cols == ("heading_deg", "fraction")
        assert len(rows) == 7

    def test_report_regenerates_from_disk(self, test_b_result, test_c_result, tmp_path):
        harness.write_sweep(test_b_result, tmp_path, timestamp="T0")
        harness.write_sweep(test_c_result, tmp_path, timestamp="T0")
        text, data = harness.report(tmp_path)
        assert "test_b" in data and "test_c" in data
        assert "K_e" in text and "final_rel_gap" in text
        assert data["test_b"]["fitted_k_e"] == pytest.approx(test_b_result.fitted["k_e"],
                                                             rel=1e-9)

    def test_report_missing_dir_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            harness.report(tmp_path / "empty")


class TestParallelMap:
    def test_order_preserved_and_env_cap(self, monkeypatch):
        monkeypatch.setenv("PENDULAR_LAB_THREADS", "3")
        assert harness.max_workers() == 3
        out = harness.parallel_map(lambda x: x * x, range(20))
        assert out == [x * x for x in range(20)]
        monkeypatch.setenv("PENDULAR_LAB_THREADS", "1")
        assert harness.max_workers() == 1
