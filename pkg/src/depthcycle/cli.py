"""Command line front end.

Subcommands: run (adaptive estimation over a sequence), sweep (threshold
trade-off table), power (duty cycle to watts), table2 (robust vs plain
solver on synthetic corruption), infill (patch one depth map from a
reference pair).  All outputs are plain CSV/text and deterministic for a
fixed seed and configuration.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .dataset import decode_depth_png, encode_depth_png, load_config, load_sequence, to_gray
from .infill import CannotInfillError, infill
from .pipeline import run_sequence, sweep_threshold
from .power import PowerParams, reduction_vs_tof, system_power
from .ransac import RansacParams
from .synth import table2_experiment

__all__ = ["main"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    return repr(value) if isinstance(value, float) else str(value)


def _write_metrics_csv(path: Path, report) -> None:
    lines = ["frame_index,used_tof,mre,mae_cm,rmse_cm,inliers,mean_residual,hole_fraction"]
    for r in report.frames:
        lines.append(
            ",".join(
                _fmt(x)
                for x in (
                    r.frame_index, r.used_tof, r.mre_percent, r.mae_cm, r.rmse_cm,
                    r.inliers, r.mean_residual, r.hole_fraction,
                )
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_trajectory(path: Path, report) -> None:
    lines = []
    for r in report.frames:
        t = r.pose_cumulative.translation
        q = r.pose_cumulative.quaternion()
        fields = [r.timestamp, t[0], t[1], t[2], q[0], q[1], q[2], q[3]]
        lines.append(" ".join(repr(float(x)) for x in fields))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    frames = load_sequence(
        args.dataset, cfg.intrinsics, cfg.max_time_diff, limit=args.limit, workers=args.threads
    )
    params = RansacParams(threshold=args.threshold, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    depth_dir = out / "depth"
    if args.emit_depth:
        depth_dir.mkdir(exist_ok=True)

    def on_frame(decision, frame) -> None:
        if args.emit_depth and not decision.record.used_tof:
            png = encode_depth_png(decision.depth_out, cfg.intrinsics.depth_scale)
            (depth_dir / f"{decision.record.frame_index:06d}.png").write_bytes(png)

    report = run_sequence(
        frames,
        cfg.intrinsics,
        ransac_params=params,
        limit=args.limit,
        median_fill_kernel=args.median_fill,
        on_frame=on_frame,
    )
    _write_metrics_csv(out / "metrics.csv", report)
    if args.emit_trajectory:
        _write_trajectory(out / "trajectory.txt", report)
    print(
        f"frames={len(report.frames)} duty_cycle={report.duty_cycle_percent:.2f}% "
        f"median_mre={_fmt(report.median_mre_percent)}% "
        f"median_mae={_fmt(report.median_mae_cm)}cm "
        f"median_rmse={_fmt(report.median_rmse_cm)}cm"
    )
    print(f"wrote {out / 'metrics.csv'}")
    return 0


def _cmd_sweep(args) -> int:
    thresholds = [float(x) for x in args.thresholds.split(",") if x.strip()]
    if not thresholds:
        raise ValueError("no thresholds given")
    cfg = load_config(args.config)
    frames = load_sequence(
        args.dataset, cfg.intrinsics, cfg.max_time_diff, limit=args.limit, workers=args.threads
    )
    points = sweep_threshold(
        frames,
        cfg.intrinsics,
        thresholds,
        ransac_params=RansacParams(seed=args.seed),
        limit=args.limit,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["threshold,duty_cycle_percent,median_mre_percent"]
    for p in points:
        lines.append(f"{_fmt(p.threshold)},{_fmt(p.duty_cycle_percent)},{_fmt(p.median_mre_percent)}")
    (out / "tradeoff.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    print(f"wrote {out / 'tradeoff.csv'}")
    return 0


def _cmd_power(args) -> int:
    print("p_tof_w,system_power_w,reduction_percent")
    p_tof = args.p_tof_min
    while p_tof <= args.p_tof_max + 1e-9:
        params = PowerParams(p_tof=p_tof, p_idle=args.p_idle, p_core=args.p_core, p_mem=args.p_mem)
        watts = system_power(args.dc, params)
        saved = reduction_vs_tof(args.dc, params)
        print(f"{p_tof:g},{watts:.6f},{saved:.6f}")
        p_tof += args.p_tof_step
    return 0


def _cmd_table2(args) -> int:
    results = table2_experiment(seed=args.seed, trials=args.trials)
    print("regime,error_without_m,error_with_m,reduction_percent,trials_used")
    for r in results:
        print(
            f"{r.regime},{r.error_without:.6f},{r.error_with:.6f},"
            f"{r.reduction_percent:.2f},{r.trials_used}"
        )
    return 0


def _cmd_infill(args) -> int:
    cfg = load_config(args.config)
    ref_image = to_gray(Path(args.ref_image).read_bytes())
    cur_image = to_gray(Path(args.cur_image).read_bytes())
    scale = cfg.intrinsics.depth_scale
    ref_depth = decode_depth_png(Path(args.ref_depth).read_bytes(), scale)
    cur_depth = decode_depth_png(Path(args.cur_depth).read_bytes(), scale)
    params = RansacParams(threshold=args.threshold, seed=args.seed)
    result = infill(ref_image, ref_depth, cur_image, cur_depth, cfg.intrinsics, ransac_params=params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "filled_depth.png").write_bytes(encode_depth_png(result.depth_filled, scale))
    mre = "n/a" if result.overlap_mre_percent is None else f"{result.overlap_mre_percent:.3f}%"
    print(f"filled_pixels={result.filled_pixel_count} overlap_mre={mre}")
    print(f"wrote {out / 'filled_depth.png'}")
    return 0


def _add_common_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="sequence directory with rgb.txt/depth.txt")
    p.add_argument("--config", required=True, help="key=value camera config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int, default=100, help="max frames to process")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=1, help="decoder worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depthcycle",
        description="Depth estimation from image motion with adaptive sensor duty cycling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the adaptive estimator over a sequence")
    _add_common_run_flags(p)
    p.add_argument("--threshold", type=float, default=4.0, help="inlier threshold in px^2")
    p.add_argument("--emit-depth", action="store_true", help="write estimated depth PNGs")
    p.add_argument("--emit-trajectory", action="store_true", help="write per-frame poses")
    p.add_argument("--median-fill", type=int, default=None, metavar="K",
                   help="fill warp holes with a K x K median (off by default)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="duty cycle vs accuracy across thresholds")
    _add_common_run_flags(p)
    p.add_argument("--thresholds", default="1,2,4,8,16", help="comma-separated px^2 values")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("power", help="duty cycle to system power")
    p.add_argument("--dc", type=float, default=15.0, help="duty cycle percent")
    p.add_argument("--p-tof-min", type=float, default=1.0)
    p.add_argument("--p-tof-max", type=float, default=5.0)
    p.add_argument("--p-tof-step", type=float, default=0.5)
    p.add_argument("--p-idle", type=float, default=0.19)
    p.add_argument("--p-core", type=float, default=0.63)
    p.add_argument("--p-mem", type=float, default=0.06)
    p.set_defaults(func=_cmd_power)

    p = sub.add_parser("table2", help="robust vs plain solver on synthetic corruption")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=_cmd_table2)

    p = sub.add_parser("infill", help="patch invalid depth pixels from a reference pair")
    p.add_argument("--ref-image", required=True)
    p.add_argument("--ref-depth", required=True)
    p.add_argument("--cur-image", required=True)
    p.add_argument("--cur-depth", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--threshold", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_infill)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, CannotInfillError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
