"""Command line entry point: filter, simulate, evaluate, stats, bench."""
from __future__ import annotations

import argparse
import json
import sys

from . import io
from .pipeline import PipelineConfig, bench, run_filter_pipeline
from .pose_eval import Trajectory, ate, rpe
from .simulator import SceneConfig, generate
from .stats import StatModel, monte_carlo_check, separability


def _cmd_filter(args):
    matches = io.read_matches(args.matches)
    cfg = io.read_config(args.config) if args.config else PipelineConfig()
    pose0 = io.read_trajectory(args.pose).poses[0] if args.pose else None
    labels, refined, report = run_filter_pipeline(matches, pose0, cfg)
    io.write_labels(args.out, labels)
    if args.refined_pose_out:
        io.write_trajectory(args.refined_pose_out, Trajectory([0.0], [refined]))
    if args.report_out:
        text = json.dumps(report.to_dict(timings=args.report_timings), indent=2, sort_keys=True)
        io.atomic_write(args.report_out, text + "\n")
    c = report.counts
    print(f"static={c['S']} dynamic={c['D']} unknown={c['U']} clusters={len(report.clusters)}")


def _cmd_simulate(args):
    scene = io.read_scene_config(args.scene) if args.scene else SceneConfig()
    if args.seed is not None:
        from dataclasses import replace
        scene = replace(scene, seed=args.seed)
    matches, gt = generate(scene)
    io.write_matches(args.out_matches, matches)
    if args.out_gt:
        io.write_ground_truth(args.out_gt, gt)
    print(f"matches={len(matches)} dynamic={len(gt.dynamic_ids)} false={len(gt.false_match_ids)}")


def _cmd_evaluate(args):
    est = io.read_trajectory(args.est)
    gt = io.read_trajectory(args.gt)
    if args.mode == "ate":
        m = ate(est, gt, args.max_dt)
    else:
        trans, rot = rpe(est, gt, args.delta, args.max_dt)
        m = trans if args.mode == "rpe-trans" else rot
    print(f"rmse={m.rmse!r} mae={m.mae!r} count={m.count}")


def _cmd_stats(args):
    model = StatModel(t=args.t, beta=args.beta, m_over_M=args.m_ratio)
    rep = separability(model, args.n, args.k)
    print(f"p_true={rep.p_true!r}")
    print(f"p_false={rep.p_false!r}")
    print(f"threshold={rep.threshold!r}")
    print(f"mean_true={rep.mean_true!r} std_true={rep.std_true!r}")
    print(f"mean_false={rep.mean_false!r} std_false={rep.std_false!r}")
    print(f"separable={str(rep.separable).lower()}")
    if args.monte_carlo:
        et, ef = monte_carlo_check(model, args.mc_n, args.monte_carlo, args.seed)
        print(f"empirical_p_true={et!r}")
        print(f"empirical_p_false={ef!r}")


def _cmd_bench(args):
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    print("size,seconds")
    for r in bench(sizes, args.seed, args.repeats):
        print(f"{r['size']},{r['seconds']:.6f}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridmotion", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("filter", help="label correspondences as static/dynamic and refine the pose")
    f.add_argument("--matches", required=True)
    f.add_argument("--pose", help="initial pose (trajectory file, first line used); estimated if absent")
    f.add_argument("--config")
    f.add_argument("--out", required=True, help="labels file")
    f.add_argument("--refined-pose-out")
    f.add_argument("--report-out")
    f.add_argument("--report-timings", action="store_true",
                   help="include wall-clock timings (makes the report non-reproducible)")
    f.set_defaults(func=_cmd_filter)

    s = sub.add_parser("simulate", help="generate a synthetic scene")
    s.add_argument("--scene")
    s.add_argument("--out-matches", required=True)
    s.add_argument("--out-gt")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=_cmd_simulate)

    e = sub.add_parser("evaluate", help="ATE / RPE between trajectories")
    e.add_argument("--est", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--mode", choices=("ate", "rpe-trans", "rpe-rot"), default="ate")
    e.add_argument("--delta", type=int, default=1)
    e.add_argument("--max-dt", type=float, default=0.02)
    e.set_defaults(func=_cmd_evaluate)

    st = sub.add_parser("stats", help="support model probabilities and threshold")
    st.add_argument("--t", type=float, required=True)
    st.add_argument("--beta", type=float, default=1.0)
    st.add_argument("--m-ratio", type=float, required=True)
    st.add_argument("--n", type=int, required=True)
    st.add_argument("--k", type=float, default=3.0)
    st.add_argument("--monte-carlo", type=int, metavar="TRIALS")
    st.add_argument("--mc-n", type=int, default=1, help="neighbors per simulated neighborhood")
    st.add_argument("--seed", type=int, default=0)
    st.set_defaults(func=_cmd_stats)

    b = sub.add_parser("bench", help="filter time versus match count")
    b.add_argument("--sizes", default="1000,2000,4000,8000")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--repeats", type=int, default=5)
    b.set_defaults(func=_cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (OSError, ValueError, RuntimeError) as e:
        print(f"gridmotion {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
