import copy

import numpy as np
import pytest

from nuvbox.errors import ConfigError, InfeasibleConfig, NonConvergence
from nuvbox.scenarios import (
    BUILTIN_NAMES,
    ScenarioConfig,
    builtin_scenario,
    builtin_scenario_dict,
    builtin_scenarios,
    constraint_report,
    run_scenario,
    threshold_diagnostics,
)
from nuvbox.ssm import FactorSet, smooth
from nuvbox.gaussian import GaussianMsg


@pytest.fixture(scope="module")
def results():
    out = {}
    for cfg in builtin_scenarios():
        out[cfg.name] = (cfg, run_scenario(cfg))
    return out


class TestBuiltins:
    def test_names_stable(self):
        assert BUILTIN_NAMES == (
            "box-input",
            "halfspace-input",
            "corridor-output",
            "shifted-corridors",
            "flappy-bird",
            "polyhedron-waypoints",
            "reservoir",
        )
        assert len(builtin_scenarios()) == 7

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            builtin_scenario("no-such-scenario")

    def test_ternary_decomposition(self):
        # ternary inputs realized as two binary {-0.5, +0.5} channels summed
        cfg = builtin_scenario("corridor-output")
        binaries = [b for b in cfg.constraints if b.kind == "binary"]
        assert sorted(b.channel for b in binaries) == [0, 1]
        assert all(b.levels == (-0.5, 0.5) for b in binaries)
        assert cfg.derived_inputs == {"u": [0, 1]}
        assert np.allclose(cfg.model.B[:, 0], cfg.model.B[:, 1])

    def test_shifted_corridor_structure(self):
        cfg = builtin_scenario("shifted-corridors")
        shifted = [b for b in cfg.constraints if b.kind == "shifted_box"]
        assert len(shifted) == 1
        blk = shifted[0]
        assert np.all(blk.offset != 0.0)
        lv = blk.shift_levels(blk.k_lo)
        assert lv[0] == 0.0 and lv[1] == pytest.approx(0.5)


class TestScenarioProperties:
    def test_all_converged_within_budget(self, results):
        for name, (cfg, res) in results.items():
            assert res.converged, name
            assert res.iterations <= 2000, name

    def test_box_input_clipped(self, results):
        _, res = results["box-input"]
        u = res.posterior.u_mean[:, 0]
        assert np.all(u >= -1.0 - 1e-6) and np.all(u <= 1.0 + 1e-6)
        assert u.max() > 0.999 and u.min() < -0.999  # constraint actually binds

    def test_halfspace_input_bounded(self, results):
        _, res = results["halfspace-input"]
        u = res.posterior.u_mean[:, 0]
        assert np.all(u >= -1.0 - 1e-6)
        assert u.min() < -0.999

    def test_corridor_containment(self, results):
        cfg, res = results["corridor-output"]
        blk = next(b for b in cfg.constraints if b.name == "corridor")
        y = res.posterior.y_mean[blk.k_lo - 1 : blk.k_hi, 0]
        assert np.all(y >= blk.lo - 1e-5) and np.all(y <= blk.hi + 1e-5)

    def test_corridor_inputs_ternary(self, results):
        _, res = results["corridor-output"]
        u = res.posterior.u_mean
        for c in (0, 1):
            dist = np.minimum(np.abs(u[:, c] + 0.5), np.abs(u[:, c] - 0.5))
            assert dist.max() <= 1e-6
        total = u[:, 0] + u[:, 1]
        levels = np.abs(total[:, None] - np.array([-1.0, 0.0, 1.0])).min(axis=1)
        assert levels.max() <= 2e-6

    def test_shifted_corridor_union_and_switch(self, results):
        cfg, res = results["shifted-corridors"]
        blk = next(b for b in cfg.constraints if b.kind == "shifted_box")
        y = res.posterior.y_mean[blk.k_lo - 1 : blk.k_hi, 0]
        in_c2 = (y >= blk.lo - 1e-5) & (y <= blk.hi + 1e-5)
        in_c1 = (y >= blk.lo - blk.offset - 1e-5) & (y <= blk.hi - blk.offset + 1e-5)
        assert np.all(in_c1 | in_c2)
        s = res.shifts[blk.name]
        assert s.max() > 0.4 and s.min() < 0.1  # both corridors used

    def test_flappy_threads_slits(self, results):
        cfg, res = results["flappy-bird"]
        for row in res.violations:
            if row["kind"] in ("box", "shifted_box"):
                assert row["max_violation"] <= 1e-5, row
        u = res.posterior.u_mean[:, 0]
        assert np.all(u >= -1e-6) and np.all(u <= 1.0 + 1e-6)
        dist = np.minimum(np.abs(u), np.abs(u - 1.0))
        # the plain alternating-maximization binary rule can leave isolated
        # fractional decisions behind; everything else locks to a level
        assert (dist > 1e-6).sum() <= 2
        assert dist.max() <= 0.05

    def test_polyhedron_waypoints_inside(self, results):
        cfg, res = results["polyhedron-waypoints"]
        for blk in cfg.constraints:
            if blk.kind != "polyhedron":
                continue
            y = res.posterior.y_mean[blk.at - 1]
            assert np.all(blk.polyhedron.violations(y) <= 1e-5), (blk.name, y)

    def test_reservoir_boxes_and_sparsity(self, results):
        cfg, res = results["reservoir"]
        for row in res.violations:
            assert row["max_violation"] <= 1e-5, row
        u = res.posterior.u_mean
        K = cfg.horizon
        for c in range(4):  # flow-rate increment channels
            changes = int((np.abs(u[:, c]) > 1e-6).sum())
            assert changes <= 0.1 * K, (c, changes)

    def test_reservoir_mass_bookkeeping(self, results):
        cfg, res = results["reservoir"]
        x = res.posterior.x_mean
        u = res.posterior.u_mean
        V3 = x[:, 2]
        inflow = x[1:, 4] + x[1:, 5] - x[1:, 6] + u[:, 6]
        np.testing.assert_allclose(np.diff(V3), inflow, atol=1e-9)

    def test_monotone_objective_nonbinary(self, results):
        for name in ("box-input", "halfspace-input", "polyhedron-waypoints", "reservoir"):
            _, res = results[name]
            assert res.objective_exact
            t = res.objective_trace
            assert all(t[i + 1] <= t[i] + 1e-8 for i in range(1, len(t) - 1)), name

    def test_determinism(self, results):
        cfg, first = results["corridor-output"]
        second = run_scenario(builtin_scenario("corridor-output"))
        assert first.trace_rows == second.trace_rows
        assert first.objective_trace == second.objective_trace


class TestThresholdDiagnostics:
    def test_met_implies_satisfied(self, results):
        for name in ("box-input", "halfspace-input"):
            cfg, res = results[name]
            rows = threshold_diagnostics(cfg, res, stride=25)
            assert rows
            for row in rows:
                if row["met"]:
                    assert row["violation"] <= 1e-5, row

    def test_active_constraints_report_finite_threshold(self, results):
        cfg, res = results["box-input"]
        rows = threshold_diagnostics(cfg, res, stride=25)
        assert any(row["threshold"] > 0 for row in rows)


class TestWideCorridorReducesToUnconstrained:
    def test_outputs_match_unconstrained(self):
        d = {
            "name": "wide",
            "model": {"kind": "lowpass"},
            "horizon": 60,
            "regularizers": {"u": {"on": "input", "channel": 0, "mean": 0.0, "variance": 1.0}},
            "target": {"channel": 0, "values": [float(np.sin(k / 8.0)) for k in range(60)], "s_sq": 0.05},
            "constraints": {
                "corridor": {"kind": "box", "on": "output", "channel": 0, "lo": -10.0, "hi": 10.0, "gamma": 4.0}
            },
            "solver": {"tol": 1e-9, "max_iter": 3000},
        }
        res = run_scenario(ScenarioConfig.from_dict(d))
        d_unc = copy.deepcopy(d)
        d_unc["constraints"] = {}
        unc = run_scenario(ScenarioConfig.from_dict(d_unc))
        np.testing.assert_allclose(res.posterior.y_mean, unc.posterior.y_mean, atol=1e-6)


class TestConstraintReport:
    def test_all_feasible_is_empty_violations(self, results):
        _, res = results["corridor-output"]
        assert all(v["feasible"] for v in res.violations)

    def test_hand_built_violation(self):
        cfg = builtin_scenario("box-input")
        res = run_scenario(cfg)
        post = res.posterior
        post.u_mean[0, 0] = 1.2
        rows = constraint_report(post, cfg)
        row = next(r for r in rows if r["constraint"] == "u-box")
        assert row["max_violation"] == pytest.approx(0.2, abs=1e-9)
        assert not row["feasible"]

    def test_polyhedron_violation_matches_faces(self, results):
        cfg, res = results["polyhedron-waypoints"]
        post = res.posterior
        blk = next(b for b in cfg.constraints if b.name == "wp2-square")
        y = post.y_mean[blk.at - 1].copy()
        post.y_mean[blk.at - 1] = np.array([10.0, 1.0])
        rows = constraint_report(post, cfg)
        row = next(r for r in rows if r["constraint"] == "wp2-square")
        assert row["max_violation"] == pytest.approx(10.0 - 4.5, abs=1e-9)
        post.y_mean[blk.at - 1] = y


class TestConfigValidation:
    def test_unknown_key_rejected(self):
        d = builtin_scenario_dict("box-input")
        d["bogus"] = 1
        with pytest.raises(ConfigError, match="bogus"):
            ScenarioConfig.from_dict(d)
        d = builtin_scenario_dict("box-input")
        d["constraints"]["u-box"]["mystery"] = 2
        with pytest.raises(ConfigError, match="mystery"):
            ScenarioConfig.from_dict(d)

    def test_inverted_box_rejected(self):
        d = builtin_scenario_dict("box-input")
        d["constraints"]["u-box"]["lo"] = 10.0
        d["constraints"]["u-box"]["hi"] = -10.0
        with pytest.raises(InfeasibleConfig):
            ScenarioConfig.from_dict(d)

    def test_bad_range_rejected(self):
        d = builtin_scenario_dict("box-input")
        d["constraints"]["u-box"]["range"] = [0, 10]
        with pytest.raises(ConfigError, match="range"):
            ScenarioConfig.from_dict(d)

    def test_bad_channel_rejected(self):
        d = builtin_scenario_dict("box-input")
        d["constraints"]["u-box"]["channel"] = 5
        with pytest.raises(ConfigError, match="channel"):
            ScenarioConfig.from_dict(d)

    def test_roundtrip_via_json(self):
        cfg = builtin_scenario("reservoir")
        import json

        again = ScenarioConfig.from_dict(json.loads(cfg.to_json()))
        assert again.horizon == cfg.horizon
        assert len(again.constraints) == len(cfg.constraints)


def test_nonconvergence_carries_partial_report():
    d = builtin_scenario_dict("reservoir")
    d["solver"]["max_iter"] = 1
    with pytest.raises(NonConvergence) as info:
        run_scenario(ScenarioConfig.from_dict(d))
    report = info.value.report
    assert report is not None
    assert report.iterations == 1
    assert not report.converged
    assert report.trace_rows


def test_trace_rows_schema(results):
    _, res = results["box-input"]
    kinds = {row["kind"] for row in res.trace_rows}
    assert kinds == {"u", "x", "y", "cost"}
    for row in res.trace_rows:
        assert set(row) == {"k", "channel", "kind", "mean", "variance", "lower", "upper", "violation"}
    u_rows = [r for r in res.trace_rows if r["kind"] == "u" and r["channel"] == "u"]
    assert len(u_rows) == 150
    assert all(r["lower"] == -1.0 and r["upper"] == 1.0 for r in u_rows)
