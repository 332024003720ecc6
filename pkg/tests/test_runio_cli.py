"""Scenario loading, result persistence, verification, and the CLI surface."""

import math

import numpy as np
import pytest

from uavcast import cli, driver, online, runio

from conftest import fixed_trace, make_config


class TestLoadScenario:
    def test_fig4_fields(self):
        cfg, trace = runio.load_scenario("fig4")
        assert trace is None
        assert cfg.num_groups == 3
        assert cfg.users_per_group == (5, 5, 5)
        assert cfg.num_slots == 5
        assert cfg.noise_power == pytest.approx(1e-9)       # -90 dB
        assert cfg.pathloss_ref == pytest.approx(1e-3)      # -30 dB
        assert np.allclose(cfg.min_rate, 0.25 * math.log(2))  # bps -> nats
        assert cfg.eps_traj == 0.01 and cfg.eps_power == 0.001
        # coordinates arrive shifted into the positive frame
        assert np.all(cfg.start_point > 0) and np.all(cfg.end_point > 0)
        assert cfg.coord_offset == pytest.approx(2 * cfg.coverage_radius + 1)

    def test_fig7_regrouping_base(self):
        cfg, _ = runio.load_scenario("fig7")
        assert sum(cfg.users_per_group) == 12
        assert np.allclose(cfg.min_rate, 0.08 * math.log(2))

    def test_pinned_positions_build_trace(self):
        cfg, trace = runio.load_scenario("fig10-hotspot")
        assert cfg.num_groups == 1 and cfg.users_per_group == (1,)
        assert trace is not None and trace.is_static()
        pos = trace.at_slot(1)[0][0] - cfg.coord_offset
        assert pos == pytest.approx([-25.0, 30.0])

    def test_missing_field_names_it(self, tmp_path):
        bad = tmp_path / "bad.scn"
        bad.write_text("num_groups = 1\nusers_per_group = 1\n")
        with pytest.raises(runio.LoadError, match="num_slots"):
            runio.load_scenario(str(bad))

    def test_unreachable_endpoint_rejected(self, tmp_path):
        bad = tmp_path / "far.scn"
        bad.write_text("\n".join([
            "num_groups = 1", "users_per_group = 1", "num_slots = 2",
            "horizon_s = 1", "v_max_mps = 1", "altitude_m = 25", "p_max_w = 2",
            "noise_power_db = -90", "pathloss_ref_db = -30",
            "coverage_radius_m = 50", "start_xy_m = -20,0", "end_xy_m = 20,0",
            "min_rate_bps = 0",
        ]))
        with pytest.raises(runio.LoadError, match="unreachable"):
            runio.load_scenario(str(bad))

    def test_unknown_name(self):
        with pytest.raises(runio.LoadError, match="neither a file nor"):
            runio.load_scenario("no-such-scenario")


def small_run(tmp_path, seed=1):
    cfg = make_config(num_groups=2, users_per_group=(2, 1), num_slots=3,
                      horizon=9.0, min_rate_nats=0.05, seed=seed)
    trace = fixed_trace(cfg, [[(0, 8), (-4, 2)], [(8, -6)]])
    res = driver.run_offline(cfg, trace, mode="offline-fixed")
    out = tmp_path / "run"
    runio.save_result(res, out, cfg, trace=trace)
    return cfg, trace, res, out


class TestSaveAndVerify:
    def test_table_shapes_and_roundtrip(self, tmp_path):
        cfg, trace, res, out = small_run(tmp_path)
        traj_rows = (out / "trajectory.csv").read_text().strip().splitlines()
        assert len(traj_rows) == 1 + cfg.num_slots + 1  # header + N+1 points
        power_rows = (out / "powers.csv").read_text().strip().splitlines()
        assert len(power_rows) == 1 + cfg.num_groups * cfg.num_slots

        saved = runio.load_result(out)
        assert np.allclose(saved.trajectory.points, res.trajectory.points, atol=1e-6)
        assert saved.config.num_groups == cfg.num_groups
        # config echo is full precision
        assert saved.config.noise_power == cfg.noise_power
        assert np.array_equal(saved.config.min_rate, cfg.min_rate)
        assert runio.verify_result(out) == []

    def test_byte_identical_rerun(self, tmp_path):
        _, _, _, out1 = small_run(tmp_path / "a", seed=2)
        _, _, _, out2 = small_run(tmp_path / "b", seed=2)
        for name in ("trajectory.csv", "powers.csv", "summary.txt", "trace.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_tampered_powers_detected(self, tmp_path):
        _, _, _, out = small_run(tmp_path)
        lines = (out / "powers.csv").read_text().splitlines()
        cells = lines[1].split(",")
        cells[2] = "1.9"  # inflate one power entry
        lines[1] = ",".join(cells)
        (out / "powers.csv").write_text("\n".join(lines) + "\n")
        problems = runio.verify_result(out)
        assert problems and any("objective" in p or "power" in p for p in problems)

    def test_trace_replay_round_trip(self, tmp_path):
        # an online run's observations replayed through the offline planner
        cfg = make_config(num_groups=2, users_per_group=(2, 2), num_slots=3,
                          horizon=9.0, user_speed_range=(0.0, 3.0), seed=21)
        res = online.run_online(cfg)
        out = tmp_path / "replay-src"
        runio.save_result(res, out, cfg)
        trace = runio.trace_from_result(out)
        for n in range(1, 4):
            direct = [rec for rec in res.log if rec.get("slot") == n][0]["positions"]
            for g in range(2):
                assert np.allclose(trace.at_slot(n)[g], direct[g], atol=1e-6)
        replay = driver.run_offline(cfg, trace, mode="offline-mobile")
        assert replay.converged

    def test_online_snapshots_written(self, tmp_path):
        cfg = make_config(num_groups=1, num_slots=3, horizon=9.0,
                          user_speed_range=(0.0, 2.0), seed=6)
        res = online.run_online(cfg)
        out = tmp_path / "online"
        runio.save_result(res, out, cfg)
        snaps = sorted(out.glob("snapshot_*.csv"))
        assert len(snaps) == cfg.num_slots
        assert runio.verify_result(out) == []
        first = snaps[0].read_text().splitlines()
        assert first[0] == "kind,g,u,x,y"
        assert first[1].startswith("uav,")


class TestCli:
    def test_run_verify_cycle(self, tmp_path, capsys):
        scn = tmp_path / "mini.scn"
        scn.write_text("\n".join([
            "name = mini", "num_groups = 1", "users_per_group = 2",
            "num_slots = 2", "horizon_s = 6", "v_max_mps = 10",
            "altitude_m = 25", "p_max_w = 2", "noise_power_db = -90",
            "pathloss_ref_db = -30", "coverage_radius_m = 50",
            "start_xy_m = -10,0", "end_xy_m = 10,0", "min_rate_bps = 0.1",
        ]))
        out = tmp_path / "result"
        code = cli.main(["run", "--mode", "offline-fixed", "--scenario", str(scn),
                         "--seed", "3", "--out", str(out)])
        assert code == 0
        assert cli.main(["verify", "--out", str(out)]) == 0
        # tamper, then verify must fail naming the issue
        lines = (out / "powers.csv").read_text().splitlines()
        cells = lines[1].split(",")
        cells[2] = "5.0"
        lines[1] = ",".join(cells)
        (out / "powers.csv").write_text("\n".join(lines) + "\n")
        assert cli.main(["verify", "--out", str(out)]) == 1
        err = capsys.readouterr().err
        assert "violation" in err or "mismatch" in err

    def test_sweep_row_count(self, tmp_path):
        out = tmp_path / "sw"
        code = cli.main(["sweep", "--param", "T", "--values", "5,6",
                         "--seeds", "1", "--scenario", "fig4",
                         "--out", str(out)])
        assert code == 0
        rows = (out / "sweep.csv").read_text().strip().splitlines()
        assert len(rows) == 1 + 2

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["run", "--bogus"])
        assert exc.value.code == 2

    def test_online_no_reachability_flag(self, tmp_path):
        out = tmp_path / "hot"
        code = cli.main(["run", "--mode", "online", "--scenario", "fig10-hotspot",
                         "--seed", "1", "--out", str(out), "--no-reachability"])
        assert code == 0
        rows = (out / "trajectory.csv").read_text().strip().splitlines()[1:]
        final = np.array([float(v) for v in rows[-1].split(",")[1:]])
        assert np.linalg.norm(final - np.array([20.0, 0.0])) > 10.0
