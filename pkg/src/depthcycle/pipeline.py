"""Frame-by-frame depth estimation with adaptive sensor duty cycling.

The first frame always takes a real depth measurement.  For every later
frame, sparse flow is matched against the previous frame using whatever
depth state that frame ended with (measured or estimated), and a robust
motion estimate is attempted.  On success the motion is composed onto
the transform accumulated since the last measurement and the *last
measured* depth map is forward-warped through it (always warping the
measurement, never an estimate, keeps warping error from compounding).
On failure the sensor is triggered: the frame consumes its measured
depth and the accumulated transform resets to identity.

Estimated frames are scored against the withheld measurement over pixels
valid in both maps: mean relative error (percent), mean absolute error
and root-mean-square error (both cm).  Sequence-level numbers are
medians over estimated frames, plus the duty cycle: the percentage of
frames that used the sensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import Intrinsics, Pose
from .dataset import AssociatedFrame
from .flow import GridSpec, compute_flow
from .ransac import PoseEstimate, RansacParams, TofSignal, estimate
from .warp import compose, median_infill, reproject

__all__ = [
    "DepthErrors",
    "FrameRecord",
    "SequenceReport",
    "TradeoffPoint",
    "depth_metrics",
    "run_sequence",
    "sweep_threshold",
]


@dataclass(frozen=True)
class DepthErrors:
    mre_percent: float
    mae_cm: float
    rmse_cm: float
    pixel_count: int


def depth_metrics(estimate_m, truth_m) -> DepthErrors | None:
    """Error of an estimated depth map against a measured one.

    Only pixels valid (> 0) in both maps count; returns None when no
    pixel qualifies.  The relative error is normalized by the measured
    depth.
    """
    est = np.asarray(estimate_m, dtype=np.float64)
    truth = np.asarray(truth_m, dtype=np.float64)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    mask = (est > 0) & (truth > 0)
    n = int(mask.sum())
    if n == 0:
        return None
    diff = np.abs(est[mask] - truth[mask])
    return DepthErrors(
        mre_percent=float(100.0 * np.mean(diff / truth[mask])),
        mae_cm=float(100.0 * np.mean(diff)),
        rmse_cm=float(100.0 * math.sqrt(np.mean(diff**2))),
        pixel_count=n,
    )


@dataclass(frozen=True)
class FrameRecord:
    """Per-frame outcome.  Metric fields are None on measured frames (and
    on estimated frames with no mutually valid pixel to score)."""

    frame_index: int
    timestamp: float
    used_tof: bool
    mre_percent: float | None
    mae_cm: float | None
    rmse_cm: float | None
    inliers: int | None
    mean_residual: float | None
    hole_fraction: float | None
    valid_samples: int | None
    pose_cumulative: Pose


@dataclass(frozen=True)
class FrameDecision:
    """What run_sequence decided for one frame, including the depth map.

    Depth maps are only surfaced through the on_frame callback to keep
    reports small on long sequences.
    """

    record: FrameRecord
    depth_out: np.ndarray


@dataclass(frozen=True)
class SequenceReport:
    frames: tuple[FrameRecord, ...]
    duty_cycle_percent: float
    median_mre_percent: float | None
    median_mae_cm: float | None
    median_rmse_cm: float | None


def _median_or_none(values: list[float]) -> float | None:
    return float(np.median(values)) if values else None


def run_sequence(
    frames: Iterable[AssociatedFrame],
    intrinsics: Intrinsics,
    grid: GridSpec = GridSpec(),
    ransac_params: RansacParams = RansacParams(),
    limit: int | None = 100,
    median_fill_kernel: int | None = None,
    on_frame: Callable[[FrameDecision, AssociatedFrame], None] | None = None,
) -> SequenceReport:
    """Run the adaptive estimator over a frame sequence."""
    frames = list(frames)
    if limit is not None:
        frames = frames[:limit]
    if not frames:
        raise ValueError("empty sequence")
    expected = (intrinsics.height, intrinsics.width)
    if frames[0].image.shape != expected:
        raise ValueError(
            f"frame size {frames[0].image.shape[::-1]} does not match intrinsics "
            f"{intrinsics.width}x{intrinsics.height}"
        )
    if frames[0].depth is None:
        raise ValueError("the first frame needs a measured depth map")

    records: list[FrameRecord] = []

    def emit(record: FrameRecord, depth_out: np.ndarray, frame: AssociatedFrame) -> None:
        records.append(record)
        if on_frame is not None:
            on_frame(FrameDecision(record=record, depth_out=depth_out), frame)

    last_measured = frames[0].depth
    depth_state = frames[0].depth
    cumulative = Pose.identity()
    record = FrameRecord(
        frame_index=0,
        timestamp=frames[0].rgb_timestamp,
        used_tof=True,
        mre_percent=None, mae_cm=None, rmse_cm=None,
        inliers=None, mean_residual=None, hole_fraction=None, valid_samples=None,
        pose_cumulative=cumulative,
    )
    emit(record, depth_state, frames[0])

    for index in range(1, len(frames)):
        frame = frames[index]
        flow = compute_flow(frames[index - 1].image, frame.image, depth_state, grid)
        n_valid = sum(1 for s in flow if s.valid)
        result = estimate(flow, intrinsics, ransac_params)
        if isinstance(result, TofSignal):
            if frame.depth is None:
                raise ValueError(
                    f"frame {index}: a depth measurement was requested but none is available"
                )
            last_measured = frame.depth
            depth_state = frame.depth
            cumulative = Pose.identity()
            record = FrameRecord(
                frame_index=index,
                timestamp=frame.rgb_timestamp,
                used_tof=True,
                mre_percent=None, mae_cm=None, rmse_cm=None,
                inliers=None, mean_residual=None, hole_fraction=None,
                valid_samples=n_valid,
                pose_cumulative=cumulative,
            )
            emit(record, depth_state, frame)
            continue

        assert isinstance(result, PoseEstimate)
        cumulative = compose(result.pose, cumulative)
        depth_out = reproject(last_measured, cumulative, intrinsics)
        if median_fill_kernel is not None:
            depth_out = median_infill(depth_out, median_fill_kernel)
        source_valid = int((last_measured > 0).sum())
        hole_fraction = 1.0 - int((depth_out > 0).sum()) / source_valid if source_valid else 0.0
        errors = depth_metrics(depth_out, frame.depth) if frame.depth is not None else None
        record = FrameRecord(
            frame_index=index,
            timestamp=frame.rgb_timestamp,
            used_tof=False,
            mre_percent=errors.mre_percent if errors else None,
            mae_cm=errors.mae_cm if errors else None,
            rmse_cm=errors.rmse_cm if errors else None,
            inliers=len(result.inlier_indices),
            mean_residual=result.mean_residual,
            hole_fraction=hole_fraction,
            valid_samples=n_valid,
            pose_cumulative=cumulative,
        )
        depth_state = depth_out
        emit(record, depth_out, frame)

    n_tof = sum(1 for r in records if r.used_tof)
    return SequenceReport(
        frames=tuple(records),
        duty_cycle_percent=100.0 * n_tof / len(records),
        median_mre_percent=_median_or_none(
            [r.mre_percent for r in records if r.mre_percent is not None]
        ),
        median_mae_cm=_median_or_none([r.mae_cm for r in records if r.mae_cm is not None]),
        median_rmse_cm=_median_or_none([r.rmse_cm for r in records if r.rmse_cm is not None]),
    )


@dataclass(frozen=True)
class TradeoffPoint:
    threshold: float
    duty_cycle_percent: float
    median_mre_percent: float | None


def sweep_threshold(
    frames: Sequence[AssociatedFrame],
    intrinsics: Intrinsics,
    thresholds: Sequence[float],
    grid: GridSpec = GridSpec(),
    ransac_params: RansacParams = RansacParams(),
    limit: int | None = 100,
    median_fill_kernel: int | None = None,
) -> list[TradeoffPoint]:
    """Duty cycle and accuracy of the same sequence at several thresholds."""
    frames = list(frames)
    points = []
    for threshold in thresholds:
        report = run_sequence(
            frames,
            intrinsics,
            grid=grid,
            ransac_params=replace(ransac_params, threshold=threshold),
            limit=limit,
            median_fill_kernel=median_fill_kernel,
        )
        points.append(
            TradeoffPoint(
                threshold=threshold,
                duty_cycle_percent=report.duty_cycle_percent,
                median_mre_percent=report.median_mre_percent,
            )
        )
    return points
