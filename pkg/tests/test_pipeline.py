import json

import numpy as np
import pytest

from gridmotion.cli import main
from gridmotion.geometry import SE3, Matches
from gridmotion.grid import GridConfig, Verdict
from gridmotion.io import (format_labels, read_labels, read_matches, read_trajectory,
                           write_config, write_matches, write_scene_config, write_trajectory)
from gridmotion.pipeline import (PipelineConfig, PipelineError, bench, gmc_filter,
                                 run_filter_pipeline)
from gridmotion.pose_eval import Trajectory, classification_metrics, pose_error
from gridmotion.simulator import ObjectSpec, SceneConfig, generate


def test_noiseless_static_scene_has_no_dynamic_labels():
    scene = SceneConfig(n_static=1500, objects=(), pixel_noise_sigma=0, depth_noise_sigma=0)
    m, gt = generate(scene)
    labels, refined, report = run_filter_pipeline(m, gt.pose)
    assert labels.dynamic_ids == set()
    assert report.counts["D"] == 0 and report.clusters == []
    assert pose_error(refined, gt.pose)[0] < 1e-9


def test_default_scene_finds_the_object():
    m, gt = generate(SceneConfig(seed=1))
    labels, refined, report = run_filter_pipeline(m)
    c = classification_metrics(labels, gt.dynamic_ids)
    assert c.precision > 0.9 and c.recall > 0.8
    assert report.pose_source == "estimated"
    assert len(report.clusters) >= 1
    assert {r["bin_x"] for r in report.clusters} == {-2} or all(r["bin_x"] < 0 for r in report.clusters)


def test_empty_input_is_an_error():
    with pytest.raises(PipelineError) as e:
        run_filter_pipeline(Matches.empty())
    assert e.value.stage == "input"


def test_stage_errors_carry_stage_name():
    pts = np.outer(np.arange(1, 6.0), [0, 0, 1]) + [0, 0, 1]
    m = Matches(np.arange(5), np.zeros((5, 2)), np.zeros((5, 2)), pts, pts)
    with pytest.raises(PipelineError) as e:
        run_filter_pipeline(m)
    assert e.value.stage == "estimate_pose"
    with pytest.raises(PipelineError) as e:
        run_filter_pipeline(m, SE3.identity())
    assert e.value.stage == "refine_pose"


def test_pipeline_deterministic():
    m, _ = generate(SceneConfig(seed=5, false_match_rate=0.05))
    a = run_filter_pipeline(m)
    b = run_filter_pipeline(m)
    assert format_labels(a[0]) == format_labels(b[0])
    assert a[1] == b[1]
    assert a[2].to_dict(timings=False) == b[2].to_dict(timings=False)


def test_timings_cover_total():
    m, _ = generate(SceneConfig(seed=2))
    _, _, report = run_filter_pipeline(m)
    t = report.timings_ms
    stages = sum(v for k, v in t.items() if k != "total")
    assert set(t) == {"estimate_pose", "bins", "grid", "clustering", "fusion", "refine_pose", "total"}
    assert stages <= t["total"] * 1.01 + 0.05
    assert stages >= 0.8 * t["total"]
    assert "timings_ms" not in report.to_dict(timings=False)


def test_out_of_image_matches_are_reported():
    m, gt = generate(SceneConfig(n_static=3000, objects=(), seed=3))
    px = m.px_ma.copy()
    px[0] = [-5.0, 10.0]
    m2 = Matches(m.ids, m.px_re, px, m.x_re, m.x_ma)
    labels, _, report = run_filter_pipeline(m2, gt.pose)
    assert report.rejected_ids == [0]
    assert labels[0].verdict is Verdict.UNKNOWN


def test_sparse_scene_has_no_static_support():
    # about one match per cell: every cell is below n_min, nothing is left to refine on
    m, gt = generate(SceneConfig(n_static=300, objects=(), seed=3))
    with pytest.raises(PipelineError) as e:
        run_filter_pipeline(m, gt.pose)
    assert e.value.stage == "refine_pose"
    assert run_filter_pipeline(m, gt.pose, PipelineConfig(GridConfig(gx=4, gy=3)))[0].counts()["S"] == 300


def test_gmc_filter_passes_summary():
    m, gt = generate(SceneConfig(seed=4))
    _, _, summaries = gmc_filter(m, gt.pose)
    assert [s["pass"] for s in summaries] == [0, 1, 2, 3]
    assert summaries[0]["cells"] == 300 and summaries[3]["cells"] == 21 * 16


def test_bench_records():
    out = bench((300, 600), repeats=1)
    assert [r["size"] for r in out] == [300, 600]
    assert all(r["seconds"] > 0 for r in out)


# -- command line ------------------------------------------------------------

def test_cli_simulate_filter_evaluate(tmp_path, capsys):
    scene = tmp_path / "scene.cfg"
    write_scene_config(scene, SceneConfig(n_static=800, objects=(ObjectSpec(n_points=200),), seed=3))
    mp, gp = tmp_path / "m.csv", tmp_path / "gt.txt"
    assert main(["simulate", "--scene", str(scene), "--out-matches", str(mp), "--out-gt", str(gp)]) == 0
    assert "matches=1000" in capsys.readouterr().out
    assert len(read_matches(mp)) == 1000

    cfg = tmp_path / "c.cfg"
    write_config(cfg, PipelineConfig(GridConfig()))
    lp, pp, rp = tmp_path / "l.csv", tmp_path / "pose.txt", tmp_path / "r.json"
    args = ["filter", "--matches", str(mp), "--config", str(cfg), "--out", str(lp),
            "--refined-pose-out", str(pp), "--report-out", str(rp)]
    assert main(args) == 0
    assert "dynamic=" in capsys.readouterr().out
    labels = read_labels(lp)
    assert len(labels) == 1000
    report = json.loads(rp.read_text())
    assert "timings_ms" not in report and report["pose_source"] == "estimated"
    first = (lp.read_bytes(), rp.read_bytes())
    assert main(args) == 0
    assert (lp.read_bytes(), rp.read_bytes()) == first
    assert main(args + ["--report-timings"]) == 0
    assert "timings_ms" in json.loads(rp.read_text())
    capsys.readouterr()

    refined = read_trajectory(pp).poses[0]
    gt_pose = SceneConfig().camera_motion
    est = Trajectory.from_relative(0.1 * np.arange(3), [refined, refined])
    gt = Trajectory.from_relative(0.1 * np.arange(3), [gt_pose, gt_pose])
    ep, gtp = tmp_path / "est.txt", tmp_path / "gt_traj.txt"
    write_trajectory(ep, est)
    write_trajectory(gtp, gt)
    for mode in ("ate", "rpe-trans", "rpe-rot"):
        assert main(["evaluate", "--est", str(ep), "--gt", str(gtp), "--mode", mode]) == 0
        assert capsys.readouterr().out.startswith("rmse=")


def test_cli_filter_with_given_pose(tmp_path, capsys):
    m, gt = generate(SceneConfig(seed=8))
    mp, pp, lp = tmp_path / "m.csv", tmp_path / "p.txt", tmp_path / "l.csv"
    write_matches(mp, m)
    write_trajectory(pp, Trajectory([0.0], [gt.pose]))
    assert main(["filter", "--matches", str(mp), "--pose", str(pp), "--out", str(lp)]) == 0
    labels, _, _ = run_filter_pipeline(m, read_trajectory(pp).poses[0])
    assert lp.read_text() == format_labels(labels)


def test_cli_stats(capsys):
    assert main(["stats", "--t", "0.6", "--m-ratio", "0.04", "--n", "50"]) == 0
    out = dict(line.split("=", 1) for line in capsys.readouterr().out.split()
               if "=" in line)
    assert float(out["p_true"]) == pytest.approx(0.616)
    assert float(out["p_false"]) == pytest.approx(0.016)
    assert out["separable"] == "true"
    assert main(["stats", "--t", "0.6", "--m-ratio", "0.04", "--n", "1",
                 "--monte-carlo", "2000", "--seed", "1"]) == 0
    assert "empirical_p_true=" in capsys.readouterr().out


def test_cli_bench(capsys):
    assert main(["bench", "--sizes", "200,400", "--repeats", "1"]) == 0
    lines = capsys.readouterr().out.split()
    assert lines[0] == "size,seconds" and len(lines) == 3


def test_cli_errors(tmp_path, capsys):
    mp = tmp_path / "m.csv"
    mp.write_text("# gridmotion-format v1\nid,u\n")
    assert main(["filter", "--matches", str(mp), "--out", str(tmp_path / "l.csv")]) == 1
    assert ":2:" in capsys.readouterr().err
    mp.write_text("# gridmotion-format v1\nid,u_re,v_re,u_ma,v_ma,xre_x,xre_y,xre_z,xma_x,xma_y,xma_z\n")
    assert main(["filter", "--matches", str(mp), "--out", str(tmp_path / "l.csv")]) == 1
    assert "empty" in capsys.readouterr().err
    assert main(["evaluate", "--est", str(tmp_path / "nope"), "--gt", str(tmp_path / "nope")]) == 1
    assert not (tmp_path / "l.csv").exists()
