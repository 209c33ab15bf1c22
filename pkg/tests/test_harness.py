import copy
import csv
import json

import numpy as np
import pytest

from handover_sim.batch import batch, run_seeds, summarize
from handover_sim.cli import EXIT_INVARIANT, EXIT_OK, EXIT_PARSE, main
from handover_sim.geometry import Pose
from handover_sim.scenario import (
    Scenario,
    ScenarioError,
    load_scenario,
    scenario_from_dict,
)
from handover_sim.sim import Schedule, WorldLayout, run
from handover_sim.trace import read_trace, trace_digest, verify_records, write_trace

NOMINAL = "scenarios/nominal_cylinder.yaml"
BELOW = "scenarios/hand_below_table.yaml"
ROTATE = "scenarios/rotate90_midmotion.yaml"


def base_dict(**over):
    d = {
        "seed": 0,
        "mode": "temporal_plus",
        "time_limit": 60,
        "object": {
            "kind": "cylinder",
            "dims": [0.02, 0.16],
            "grip_offset": [0.0, -0.11, 0.0, -0.7071067811865476, 0.0, 0.0, 0.7071067811865476],
        },
        "hand_trajectory": [{"t": 0.0, "pose": [0.55, 0.05, 0.28]}],
    }
    d.update(over)
    return d


def short(scenario: Scenario, seconds: float) -> Scenario:
    from dataclasses import replace

    return replace(scenario, time_limit=seconds)


class TestScenarioParsing:
    def test_loads_nominal_file(self):
        s = load_scenario(NOMINAL)
        assert s.name == "nominal_cylinder"
        assert s.mode == "temporal_plus"
        assert s.object_shape.kind == "cylinder"
        assert np.allclose(s.grip_offset.p, [0.0, -0.11, 0.0])

    def test_unknown_mode_rejected(self):
        with pytest.raises(ScenarioError):
            scenario_from_dict(base_dict(mode="psychic"))

    def test_missing_trajectory_rejected(self):
        d = base_dict()
        del d["hand_trajectory"]
        with pytest.raises(ScenarioError):
            scenario_from_dict(d)

    def test_non_increasing_keyframes_rejected(self):
        d = base_dict(
            hand_trajectory=[
                {"t": 0.0, "pose": [0.5, 0, 0.3]},
                {"t": 0.0, "pose": [0.5, 0, 0.4]},
            ]
        )
        with pytest.raises(ScenarioError):
            scenario_from_dict(d)

    def test_bad_pose_length_rejected(self):
        d = base_dict(hand_trajectory=[{"t": 0.0, "pose": [0.5, 0.0]}])
        with pytest.raises(ScenarioError):
            scenario_from_dict(d)

    def test_bad_object_kind_rejected(self):
        d = base_dict()
        d["object"]["kind"] = "torus"
        with pytest.raises(ScenarioError):
            scenario_from_dict(d)

    def test_bad_event_rejected(self):
        d = base_dict(events=[{"trigger": {"time": 1.0}, "action": {"explode": {}}}])
        with pytest.raises(ScenarioError):
            scenario_from_dict(d)

    def test_nonpositive_time_limit_rejected(self):
        with pytest.raises(ScenarioError):
            scenario_from_dict(base_dict(time_limit=0))

    def test_keyframe_interpolation(self):
        d = base_dict(
            hand_trajectory=[
                {"t": 0.0, "pose": [0.0, 0.0, 0.2]},
                {"t": 2.0, "pose": [0.4, 0.0, 0.2]},
            ]
        )
        s = scenario_from_dict(d)
        assert np.allclose(s.hand_pose_at(1.0).p, [0.2, 0.0, 0.2], atol=1e-12)
        assert np.allclose(s.hand_pose_at(-1.0).p, [0.0, 0.0, 0.2])
        assert np.allclose(s.hand_pose_at(9.0).p, [0.4, 0.0, 0.2])


class TestSchedule:
    def test_divisor_validation(self):
        with pytest.raises(ValueError):
            Schedule(base_hz=90, cloud_div=7)

    def test_tick_flags_follow_divisors(self):
        s = short(load_scenario(BELOW), 1.0)
        _, records = run(s, seed=0)
        ticks = [r for r in records if r["type"] == "tick"]
        assert len(ticks) == 90
        for r in ticks:
            k = r["tick"]
            assert r["tracking_tick"] == (k % 6 == 0)
            assert ("hand_points" in r) == (k % 10 == 0)
            assert r["refined"] == (k % 18 == 0)
            assert r["selection_tick"] == (k % 9 == 0)


class TestDeterminism:
    def test_same_seed_same_digest(self):
        s = short(load_scenario(NOMINAL), 6.0)
        m1, r1 = run(s, seed=3)
        m2, r2 = run(s, seed=3)
        assert trace_digest(r1) == trace_digest(r2)
        assert m1.success == m2.success
        assert m1.time_to_success == m2.time_to_success

    def test_different_seed_different_digest(self):
        s = short(load_scenario(NOMINAL), 2.0)
        _, r1 = run(s, seed=0)
        _, r2 = run(s, seed=1)
        assert trace_digest(r1) != trace_digest(r2)


class TestBehaviors:
    def test_nominal_succeeds_and_verifies(self):
        s = load_scenario(NOMINAL)
        metrics, records = run(s, seed=0)
        assert metrics.success
        assert metrics.time_to_success < s.time_limit
        assert metrics.attempts >= 1
        assert verify_records(records) == []

    def test_hand_below_table_waits_home(self):
        s = load_scenario(BELOW)
        metrics, records = run(s, seed=0)
        assert not metrics.success
        home = WorldLayout().home
        for r in records:
            if r["type"] != "tick":
                continue
            assert r["stage"] == "wait_home"
            assert np.linalg.norm(np.asarray(r["ee_pose"][:3]) - home.p) < 0.02

    def test_rotation_event_fires_after_motion_and_still_succeeds(self):
        s = load_scenario(ROTATE)
        metrics, records = run(s, seed=0)
        events = [r for r in records if r["type"] == "event"]
        assert len(events) == 1 and events[0]["action"] == "rotate_object"
        assert events[0]["tick"] > 0
        assert metrics.success
        assert verify_records(records) == []

    def test_object_center_sphere_grasp_at_center(self):
        center = np.array([0.5, 0.0, 0.30])
        d = base_dict(mode="object_center", time_limit=2.0)
        # sphere held out along the palm's -Y so the hand stays clear of it
        d["object"] = {"kind": "sphere", "dims": [0.04], "grip_offset": [0, -0.12, 0]}
        d["hand_trajectory"] = [{"t": 0.0, "pose": [0.5, 0.12, 0.30]}]
        s = scenario_from_dict(d)
        _, records = run(s, seed=0)
        grasps = [r["selected_grasp"] for r in records if r["type"] == "tick" and r["selected_grasp"]]
        assert grasps
        for g in grasps:
            assert np.linalg.norm(np.asarray(g[:3]) - center) < 1e-9
            assert np.allclose(g[3:], [1, 0, 0, 0])

    def test_naive_resamples_every_refine_tick(self):
        s = short(load_scenario(NOMINAL), 2.0)
        from dataclasses import replace

        _, records = run(replace(s, mode="naive"), seed=0)
        refine = [r for r in records if r["type"] == "tick" and r["refined"]]
        assert refine and all(r["resampled"] for r in refine)

    def test_temporal_plus_resamples_only_at_bootstrap(self):
        s = short(load_scenario(NOMINAL), 2.0)
        _, records = run(s, seed=0)
        flags = [r["resampled"] for r in records if r["type"] == "tick" and r["refined"]]
        assert flags[0] is True
        assert not any(flags[1:])


class TestTraceIO:
    def test_roundtrip_and_digest_stability(self, tmp_path):
        s = short(load_scenario(NOMINAL), 1.0)
        _, records = run(s, seed=0)
        path = tmp_path / "trace.jsonl"
        write_trace(records, path)
        back = read_trace(path)
        assert back == json.loads(json.dumps(records))
        assert trace_digest(back) == trace_digest(json.loads(json.dumps(records)))

    def test_verify_flags_velocity_violation(self):
        s = short(load_scenario(NOMINAL), 1.0)
        _, records = run(s, seed=0)
        bad = copy.deepcopy(records)
        ticks = [r for r in bad if r["type"] == "tick"]
        ticks[-1]["ee_pose"][0] += 0.5
        out = verify_records(bad)
        assert any("linear step" in v for v in out)

    def test_verify_flags_grasp_in_hand(self):
        s = short(load_scenario(NOMINAL), 1.0)
        _, records = run(s, seed=0)
        bad = copy.deepcopy(records)
        hand_pt = None
        for r in bad:
            if r["type"] == "tick" and r.get("hand_points"):
                hand_pt = r["hand_points"][0]
        assert hand_pt is not None
        for r in bad:
            if r["type"] == "tick":
                r["selected_grasp"] = list(hand_pt) + [0, 0, 0, 1]
        assert any("collides" in v for v in verify_records(bad))


class TestBatch:
    def test_summarize_fields(self):
        s = short(load_scenario(NOMINAL), 8.0)
        seeds = [0, 1]
        results = run_seeds(s, seeds)
        row = summarize(s, seeds, results)
        assert row["scenario"] == "nominal_cylinder"
        assert row["seeds"] == 2
        assert 0.0 <= row["success_rate"] <= 1.0

    def test_batch_writes_csv(self, tmp_path):
        sdir = tmp_path / "scenarios"
        sdir.mkdir()
        import shutil

        shutil.copy(BELOW, sdir / "a_below.yaml")
        out = tmp_path / "summary.csv"
        rows = batch(sdir, [0], out_csv=out)
        assert len(rows) == 1
        with open(out) as fh:
            got = list(csv.DictReader(fh))
        assert got[0]["scenario"] == "a_below"
        assert float(got[0]["success_rate"]) == 0.0

    def test_batch_empty_dir_errors(self, tmp_path):
        with pytest.raises(ScenarioError):
            batch(tmp_path, [0])


class TestCli:
    def test_run_ok(self, tmp_path, capsys):
        trace = tmp_path / "t.jsonl"
        code = main(["run", "--scenario", BELOW, "--seed", "0", "--trace", str(trace)])
        assert code == EXIT_OK
        assert trace.exists()
        assert "success=False" in capsys.readouterr().out

    def test_run_bad_scenario_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("mode: nope\n")
        assert main(["run", "--scenario", str(bad)]) == EXIT_PARSE

    def test_verify_clean_and_tampered(self, tmp_path, capsys):
        trace = tmp_path / "t.jsonl"
        assert main(["run", "--scenario", BELOW, "--seed", "0", "--trace", str(trace)]) == EXIT_OK
        assert main(["verify", "--trace", str(trace)]) == EXIT_OK
        records = read_trace(trace)
        for r in records:
            if r["type"] == "tick":
                r["ee_pose"][0] += 1.0
                break
        write_trace(records, trace)
        assert main(["verify", "--trace", str(trace)]) == EXIT_INVARIANT

    def test_batch_cli(self, tmp_path, capsys):
        sdir = tmp_path / "s"
        sdir.mkdir()
        import shutil

        shutil.copy(BELOW, sdir / "below.yaml")
        out = tmp_path / "o.csv"
        code = main(["batch", "--dir", str(sdir), "--seeds", "0", "--out", str(out)])
        assert code == EXIT_OK
        assert out.exists()
