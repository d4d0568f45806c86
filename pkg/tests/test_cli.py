import json
import os

import numpy as np
import pytest

from nuvbox.cli import main


def read(path):
    with open(path) as fh:
        return fh.read()


class TestScalarSweep:
    def test_box_sweep_row_count(self, tmp_path):
        code = main(
            [
                "scalar-sweep", "--prior", "box", "--a", "-1", "--b", "1",
                "--gamma", "1", "--s2", "1,0.5,0.1", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        lines = read(tmp_path / "sweep_box.csv").splitlines()
        assert lines[0] == "mu,s_sq,x_hat,oracle_x_hat,feasible_flag"
        assert len(lines) - 1 == 3 * 80
        summary = json.loads(read(tmp_path / "sweep_box.json"))
        assert summary["all_converged"]
        assert summary["thresholds"][0]["threshold"] >= 0.0

    def test_empty_grid_exits_2(self, tmp_path):
        code = main(
            ["scalar-sweep", "--prior", "box", "--s2", "1", "--mu-grid", "", "--out-dir", str(tmp_path)]
        )
        assert code == 2

    def test_bad_s2_exits_2(self, tmp_path):
        code = main(["scalar-sweep", "--prior", "box", "--s2", "-1", "--out-dir", str(tmp_path)])
        assert code == 2

    def test_halfspace_monotone_characteristic(self, tmp_path):
        code = main(
            [
                "scalar-sweep", "--prior", "halfspace", "--a", "0", "--side", "ge",
                "--gamma", "1", "--s2", "0.5", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        lines = read(tmp_path / "sweep_halfspace.csv").splitlines()[1:]
        xs = [float(line.split(",")[2]) for line in lines]
        assert all(b >= a - 1e-7 for a, b in zip(xs, xs[1:]))


class TestRunScenario:
    def test_builtin_runs_clean(self, tmp_path):
        code = main(["run-scenario", "corridor-output", "--out-dir", str(tmp_path)])
        assert code == 0
        lines = read(tmp_path / "scenario_corridor-output.csv").splitlines()
        assert lines[0] == "k,channel,kind,mean,variance,lower,upper,violation"
        summary = json.loads(read(tmp_path / "scenario_corridor-output.json"))
        assert summary["converged"]
        assert all(v["feasible"] for v in summary["violations"])

    def test_forced_nonconvergence_exits_4(self, tmp_path):
        code = main(
            ["run-scenario", "reservoir", "--set", "solver.max_iter=1", "--out-dir", str(tmp_path)]
        )
        assert code == 4
        # partial trace still written
        assert (tmp_path / "scenario_reservoir.csv").exists()

    def test_inverted_box_exits_2(self, tmp_path):
        code = main(
            [
                "run-scenario", "corridor-output",
                "--set", "constraints.corridor.lo=10",
                "--set", "constraints.corridor.hi=-10",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 2

    def test_unknown_key_override_exits_2(self, tmp_path):
        code = main(
            ["run-scenario", "box-input", "--set", "solver.wibble=3", "--out-dir", str(tmp_path)]
        )
        assert code == 2

    def test_unknown_scenario_exits_2(self, tmp_path):
        assert main(["run-scenario", "nope", "--out-dir", str(tmp_path)]) == 2

    def test_config_file_with_parse_error_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{ not json }")
        assert main(["run-scenario", str(bad), "--out-dir", str(tmp_path)]) == 2

    def test_config_file_roundtrip(self, tmp_path):
        from nuvbox.scenarios import builtin_scenario_dict

        cfg = builtin_scenario_dict("flappy-bird")
        path = tmp_path / "flappy.json"
        path.write_text(json.dumps(cfg))
        assert main(["run-scenario", str(path), "--out-dir", str(tmp_path)]) == 0

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run-scenario", "shifted-corridors", "--out-dir", str(a)]) == 0
        assert main(["run-scenario", "shifted-corridors", "--out-dir", str(b)]) == 0
        assert read(a / "scenario_shifted-corridors.csv") == read(b / "scenario_shifted-corridors.csv")
        assert read(a / "scenario_shifted-corridors.json") == read(b / "scenario_shifted-corridors.json")


class TestCostEval:
    def test_box_plateau(self, tmp_path):
        code = main(
            [
                "cost-eval", "--prior", "box", "--a", "-1", "--b", "1", "--gamma", "1",
                "--lo", "-3", "--hi", "3", "--step", "0.01", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        lines = read(tmp_path / "cost_box.csv").splitlines()
        assert lines[0] == "x,kappa"
        rows = [tuple(map(float, line.split(","))) for line in lines[1:]]
        zero = [x for x, k in rows if k == 0.0]
        assert min(zero) == pytest.approx(-1.0, abs=0.011)
        assert max(zero) == pytest.approx(1.0, abs=0.011)

    def test_laplace_v_shape(self, tmp_path):
        code = main(
            [
                "cost-eval", "--prior", "laplace", "--a", "0", "--gamma", "1",
                "--lo", "-3", "--hi", "3", "--step", "0.5", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        rows = [line.split(",") for line in read(tmp_path / "cost_laplace.csv").splitlines()[1:]]
        table = {float(x): float(k) for x, k in rows}
        assert table[3.0] == pytest.approx(3.0)
        assert table[-3.0] == pytest.approx(3.0)
        assert table[0.0] == 0.0

    def test_triangle_zero_set(self, tmp_path):
        code = main(
            [
                "cost-eval", "--prior", "polyhedron", "--spec", "triangle",
                "--lo", "-2", "--hi", "6", "--step", "0.25", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        from nuvbox.polyhedron import triangle_spec

        spec = triangle_spec()
        lines = read(tmp_path / "cost_polyhedron.csv").splitlines()
        assert lines[0] == "y1,y2,kappa"
        for line in lines[1:]:
            y1, y2, kappa = map(float, line.split(","))
            assert (kappa <= 1e-9) == spec.contains(np.array([y1, y2]), tol=1e-9)

    def test_missing_spec_file_exits_2(self, tmp_path):
        code = main(
            ["cost-eval", "--prior", "polyhedron", "--spec", "missing.json", "--out-dir", str(tmp_path)]
        )
        assert code == 2

    def test_custom_spec_file(self, tmp_path):
        spec = {
            "gamma": 2.0,
            "faces": [
                {"normal": [1.0, 0.0], "offset": 0.0, "side": "ge"},
                {"normal": [0.0, 1.0], "offset": 0.0, "side": "ge"},
            ],
        }
        path = tmp_path / "quad.json"
        path.write_text(json.dumps(spec))
        code = main(
            [
                "cost-eval", "--prior", "polyhedron", "--spec", str(path),
                "--lo", "-1", "--hi", "1", "--step", "0.5", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0


class TestMisc:
    def test_list_scenarios(self, capsys):
        assert main(["list-scenarios"]) == 0
        out = capsys.readouterr().out.split()
        assert out == [
            "box-input", "halfspace-input", "corridor-output", "shifted-corridors",
            "flappy-bird", "polyhedron-waypoints", "reservoir",
        ]

    def test_env_var_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NUV_OUT_DIR", str(tmp_path / "env"))
        code = main(["cost-eval", "--prior", "laplace", "--a", "0", "--gamma", "1", "--step", "1"])
        assert code == 0
        assert (tmp_path / "env" / "cost_laplace.csv").exists()

    def test_unknown_subcommand_exits_2(self):
        assert main(["frobnicate"]) == 2

    def test_unknown_flag_exits_2(self):
        assert main(["list-scenarios", "--bogus"]) == 2
