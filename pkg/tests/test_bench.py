import json
import shutil
import subprocess

import numpy as np
import pytest

from equiflow import (
    CaseSpec,
    DelayModel,
    DomainError,
    InsufficientDataError,
    ScenarioConfig,
    ScheduleError,
    StepSchedule,
    emit_plot,
    estimate_reference_optimum,
    fig1_suite,
    fig2_suite,
    fit_loglog_slope,
    grid_network,
    read_metrics_csv,
    run_case,
    sample_scenario,
    save_scenario,
    write_metrics_csv,
)
from equiflow.bench import load_oracle, save_oracle
from equiflow.cli import cli

from helpers import parallel_two_route_game, single_route_game, two_player_game


class TestSlopeFit:
    def test_exact_quadratic_decay(self):
        k = np.arange(1, 2001)
        gap = 1.0 / k.astype(float) ** 2
        assert fit_loglog_slope(k, gap, 10, 1000) == pytest.approx(-2.0, abs=1e-9)

    def test_constant_series(self):
        k = np.arange(1, 200)
        gap = np.full(len(k), 3.7)
        assert fit_loglog_slope(k, gap, 1, 150) == pytest.approx(0.0, abs=1e-12)

    def test_noisy_half_power(self):
        rng = np.random.default_rng(8)
        k = np.arange(1, 5001)
        gap = 3.0 / np.sqrt(k) * rng.uniform(0.9, 1.1, len(k))
        slope = fit_loglog_slope(k, gap, 10, 5000)
        assert -0.6 <= slope <= -0.4

    def test_envelope_suppresses_oscillations(self):
        k = np.arange(1, 1001).astype(float)
        gap = (1.0 / k) * (1.0 + 0.8 * np.sin(k))
        slope = fit_loglog_slope(k, gap, 5, 1000)
        assert slope == pytest.approx(-1.0, abs=0.1)

    def test_insufficient_data(self):
        k = np.arange(1, 100)
        gap = -np.ones(len(k))
        with pytest.raises(InsufficientDataError):
            fit_loglog_slope(k, gap, 1, 50)

    def test_bad_window(self):
        with pytest.raises(DomainError):
            fit_loglog_slope(np.arange(1, 10), np.ones(9), 5, 5)


class TestReferenceOracle:
    def test_single_route_game_exact(self):
        game = single_route_game(demand=5.0)
        result = estimate_reference_optimum(game, 50)
        assert result.phi_star == pytest.approx(game.potential([np.array([5.0])]), rel=1e-12)
        assert result.epsilon_oracle == 0.0
        assert result.wardrop_gap == 0.0

    def test_symmetric_two_route_even_split(self):
        game = parallel_two_route_game(demand=4.0)
        result = estimate_reference_optimum(game, 3000)
        even = game.potential([np.array([2.0, 2.0])])
        assert result.phi_star == pytest.approx(even, rel=1e-10)
        np.testing.assert_allclose(result.x_star[0], [2.0, 2.0], atol=1e-4)

    def test_two_player_matches_grid_search(self):
        # Brute-force oracle: exhaustive grid over both simplices.
        game = two_player_game()
        result = estimate_reference_optimum(game, 4000)
        s1, s2 = game.demands
        best = np.inf
        arg = None
        for t1 in np.linspace(0.0, s1, 101):
            for t2 in np.linspace(0.0, s2, 101):
                profile = [np.array([t1, s1 - t1]), np.array([t2, s2 - t2])]
                value = game.potential(profile, validate=False)
                if value < best:
                    best, arg = value, profile
        grad_scale = max(
            np.max(np.abs(g)) for g in game.partial_gradients(arg, validate=False)
        )
        slack = grad_scale * 0.01 * float(s1 + s2)
        assert result.phi_star <= best + 1e-9
        assert best <= result.phi_star + slack

    def test_oracle_round_trip(self, tmp_path):
        game = single_route_game()
        result = estimate_reference_optimum(game, 20)
        path = tmp_path / "oracle.json"
        save_oracle(result, path)
        loaded = load_oracle(path)
        assert loaded.phi_star == result.phi_star
        assert loaded.epsilon_oracle == result.epsilon_oracle
        np.testing.assert_array_equal(loaded.x_star[0], result.x_star[0])

    def test_budget_validated(self):
        with pytest.raises(DomainError):
            estimate_reference_optimum(single_route_game(), 0)


class TestSuites:
    def test_fig1_structure(self):
        game = two_player_game()
        suite = fig1_suite(game.smoothness, horizon=500)
        assert [c.label for c in suite] == [f"case{i}" for i in range(1, 7)]
        assert suite[0].delay.kind == "none"
        assert (suite[1].delay.D, suite[1].delay.alpha) == (10.0, 0.0)
        assert (suite[2].delay.D, suite[2].delay.alpha) == (50.0, 0.0)
        assert (suite[3].delay.D, suite[3].delay.alpha) == (1.0, 0.3)
        assert (suite[4].delay.D, suite[4].delay.alpha) == (1.0, 0.7)
        assert (suite[5].delay.D, suite[5].delay.alpha) == (0.1, 1.0)
        assert all(c.schedule.family == "power" for c in suite[:5])
        assert suite[5].schedule.family == "inverse"

    def test_fig2_matches_means(self):
        game = two_player_game()
        fig2 = fig2_suite(game.smoothness, horizon=500)
        assert fig2[0].delay.kind == "none"
        for det, sto in zip(fig1_suite(game.smoothness)[1:], fig2[1:]):
            assert sto.delay.kind == "stochastic_uniform"
            assert sto.delay.D == det.delay.D
            assert sto.delay.alpha == det.delay.alpha


class TestRunCase:
    def test_csv_round_trip(self, tmp_path):
        game = two_player_game()
        case = fig1_suite(game.smoothness, horizon=50)[0]
        path = tmp_path / "case1.csv"
        run = run_case(game, case, seed=3, phi_star=100.0, out_csv=path)
        table = read_metrics_csv(path)
        np.testing.assert_array_equal(table["k"], run.trace.k)
        np.testing.assert_array_equal(table["phi"], run.trace.phi)
        np.testing.assert_array_equal(table["gap"], run.trace.gap)
        np.testing.assert_array_equal(table["A_k"], run.trace.A)

    def test_rerun_byte_identical(self, tmp_path):
        game = two_player_game()
        case = fig2_suite(game.smoothness, horizon=80)[3]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_case(game, case, seed=5, phi_star=0.0, out_csv=a)
        run_case(game, case, seed=5, phi_star=0.0, out_csv=b)
        assert a.read_bytes() == b.read_bytes()

    def test_zero_horizon_header_only(self, tmp_path):
        game = two_player_game()
        case = CaseSpec("empty", DelayModel.none(),
                        StepSchedule.power(0.001, 1.0), 0)
        path = tmp_path / "empty.csv"
        run_case(game, case, seed=0, phi_star=0.0, out_csv=path)
        assert path.read_text() == "k,phi,gap,max_staleness,a_k,A_k\n"

    def test_invalid_power_schedule_rejected(self):
        game = two_player_game()
        bad = CaseSpec("bad", DelayModel.none(),
                       StepSchedule.power(1e6, 0.0), 100)
        with pytest.raises(ScheduleError):
            run_case(game, bad, seed=0, phi_star=0.0)

    def test_gap_never_dips_below_oracle_tolerance(self):
        game = two_player_game()
        oracle = estimate_reference_optimum(game, 5000)
        case = fig1_suite(game.smoothness, horizon=800)[0]
        run = run_case(game, case, seed=1, phi_star=oracle.phi_star)
        assert np.min(run.trace.gap) >= -oracle.epsilon_oracle


class TestEmitPlot:
    def test_single_polyline(self, tmp_path):
        k = np.arange(1, 101)
        path = tmp_path / "one.svg"
        emit_plot([("only", k, 1.0 / k**2)], path)
        svg = path.read_text()
        assert svg.count("<polyline") == 1
        assert (tmp_path / "one_data.csv").exists()

    def test_six_polylines_legend_order(self, tmp_path):
        k = np.arange(1, 301)
        runs = [(f"series{i}", k, (i + 1.0) / k) for i in range(6)]
        path = tmp_path / "six.svg"
        emit_plot(runs, path)
        svg = path.read_text()
        assert svg.count("<polyline") == 6
        positions = [svg.index(f">series{i}<") for i in range(6)]
        assert positions == sorted(positions)

    def test_decade_ticks(self, tmp_path):
        k = np.arange(1, 12_001)
        path = tmp_path / "ticks.svg"
        emit_plot([("t", k, 100.0 / k)], path)
        svg = path.read_text()
        # decades 1e0 .. 1e5 for k_max = 12000 -> ceil(log10) = 5
        assert svg.count('class="tick-x"') == 6
        for d in range(0, 6):
            assert f">1e{d}<" in svg

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(DomainError):
            emit_plot([], tmp_path / "x.svg")


class TestMetricsCsv:
    def test_write_read_preserves_floats(self, tmp_path):
        game = two_player_game()
        case = fig1_suite(game.smoothness, horizon=25)[0]
        run = run_case(game, case, seed=2, phi_star=np.pi)
        path = tmp_path / "m.csv"
        write_metrics_csv(run.trace, path)
        table = read_metrics_csv(path)
        np.testing.assert_array_equal(table["gap"], run.trace.gap)
        np.testing.assert_array_equal(table["a_k"], run.trace.a)

    def test_lf_line_endings(self, tmp_path):
        game = two_player_game()
        case = fig1_suite(game.smoothness, horizon=5)[0]
        path = tmp_path / "m.csv"
        run_case(game, case, seed=2, phi_star=0.0, out_csv=path)
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.endswith(b"\n")


@pytest.fixture()
def tiny_scenario(tmp_path):
    game = sample_scenario(
        grid_network(4, 4), ScenarioConfig(player_count=3, routes_per_player=2, seed=5)
    )
    path = tmp_path / "scenario.json"
    save_scenario(game, path)
    return path


class TestCli:
    def test_sample_oracle_run_slope_plot_pipeline(self, tmp_path, capsys):
        scenario = tmp_path / "s.json"
        rc = cli([
            "sample", "--synthetic", "4x4", "--players", "3", "--routes", "2",
            "--seed", "5", "--out", str(scenario),
        ])
        assert rc == 0
        oracle = tmp_path / "oracle.json"
        rc = cli(["oracle", "--scenario", str(scenario), "--budget", "400",
                  "--out", str(oracle)])
        assert rc == 0
        out_dir = tmp_path / "runs"
        rc = cli(["run", "--scenario", str(scenario), "--suite", "fig1",
                  "--horizon", "40", "--seed", "7", "--oracle", str(oracle),
                  "--out", str(out_dir)])
        assert rc == 0
        for i in range(1, 7):
            assert (out_dir / f"case{i}.csv").exists()
        rc = cli(["slope", "--csv", str(out_dir / "case1.csv"),
                  "--kmin", "1", "--kmax", "40"])
        assert rc == 0
        printed = capsys.readouterr().out.strip().splitlines()[-1]
        assert float(printed) < 0.0
        plot = tmp_path / "fig.svg"
        rc = cli(["plot", "--out", str(plot),
                  str(out_dir / "case1.csv"), str(out_dir / "case2.csv")])
        assert rc == 0
        assert plot.read_text().count("<polyline") == 2

    def test_fig2_suite_flag(self, tiny_scenario, tmp_path):
        out_dir = tmp_path / "fig2"
        rc = cli(["run", "--scenario", str(tiny_scenario), "--suite", "fig2",
                  "--horizon", "30", "--out", str(out_dir)])
        assert rc == 0
        assert len(list(out_dir.glob("case*.csv"))) == 6

    def test_case_document(self, tiny_scenario, tmp_path):
        doc = {
            "label": "custom",
            "delay": {"kind": "deterministic_power", "D": 2.0, "alpha": 0.0},
            "schedule": "auto",
            "horizon": 25,
        }
        case_path = tmp_path / "case.json"
        case_path.write_text(json.dumps(doc))
        out_dir = tmp_path / "out"
        rc = cli(["run", "--scenario", str(tiny_scenario), "--case", str(case_path),
                  "--out", str(out_dir)])
        assert rc == 0
        assert (out_dir / "custom.csv").exists()

    def test_seeds_repetition(self, tiny_scenario, tmp_path):
        doc = {"label": "rep", "delay": {"kind": "none"}, "horizon": 10}
        case_path = tmp_path / "case.json"
        case_path.write_text(json.dumps(doc))
        out_dir = tmp_path / "reps"
        rc = cli(["run", "--scenario", str(tiny_scenario), "--case", str(case_path),
                  "--seeds", "3", "--seed", "2", "--out", str(out_dir)])
        assert rc == 0
        assert sorted(p.name for p in out_dir.glob("*.csv")) == [
            "rep_seed2.csv", "rep_seed3.csv", "rep_seed4.csv",
        ]

    def test_env_var_default_output_dir(self, tiny_scenario, tmp_path, monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv("EQUIFLOW_OUT", str(target))
        doc = {"label": "env", "delay": {"kind": "none"}, "horizon": 5}
        case_path = tmp_path / "case.json"
        case_path.write_text(json.dumps(doc))
        rc = cli(["run", "--scenario", str(tiny_scenario), "--case", str(case_path)])
        assert rc == 0
        assert (target / "env.csv").exists()

    def test_unknown_flag_usage_error(self, capsys):
        rc = cli(["sample", "--bogus"])
        assert rc == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_subcommand(self, capsys):
        assert cli([]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        rc = cli(["oracle", "--scenario", str(tmp_path / "nope.json"),
                  "--out", str(tmp_path / "o.json")])
        assert rc == 2
        assert "error" in capsys.readouterr().err.lower()

    def test_bad_synthetic_spec(self, tmp_path, capsys):
        rc = cli(["sample", "--synthetic", "5by5", "--out", str(tmp_path / "s.json")])
        assert rc == 1

    @pytest.mark.skipif(shutil.which("equiflow") is None,
                        reason="console script not on PATH")
    def test_console_script_usage(self):
        proc = subprocess.run(["equiflow"], capture_output=True, text=True)
        assert proc.returncode == 1
        assert "usage" in proc.stderr.lower()

    def test_full_pipeline_byte_determinism(self, tmp_path):
        # sample -> oracle -> run twice from the same seeds, compare bytes.
        outputs = []
        for tag in ("first", "second"):
            base = tmp_path / tag
            base.mkdir()
            scenario = base / "s.json"
            oracle = base / "o.json"
            runs = base / "runs"
            assert cli(["sample", "--synthetic", "4x4", "--players", "3",
                        "--routes", "2", "--seed", "9", "--out", str(scenario)]) == 0
            assert cli(["oracle", "--scenario", str(scenario), "--budget", "200",
                        "--out", str(oracle)]) == 0
            assert cli(["run", "--scenario", str(scenario), "--suite", "fig2",
                        "--horizon", "25", "--seed", "4", "--oracle", str(oracle),
                        "--out", str(runs)]) == 0
            blob = scenario.read_bytes() + oracle.read_bytes()
            for csv_path in sorted(runs.glob("*.csv")):
                blob += csv_path.read_bytes()
            outputs.append(blob)
        assert outputs[0] == outputs[1]
