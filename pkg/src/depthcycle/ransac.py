"""Robust motion estimation with a fixed-budget RANSAC loop.

Minimal 3-sample hypotheses are solved with a single Gauss-Newton
iteration (the plain linear solution), scored by how many valid samples
fall under the residual threshold, and ranked by the mean residual over
their own inlier set.  The best hypothesis is refit on its inliers with
three iterations.  When no hypothesis collects the minimum inlier count
the estimator refuses to produce a motion and instead signals that a
fresh depth measurement is needed.

Sampling uses numpy's PCG64 generator seeded explicitly, so runs are
reproducible across platforms.  Degenerate draws (collinear points)
count against the iteration budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import Intrinsics, Pose
from .flow import FlowSample
from .pose import DegenerateGeometryError, residuals_for_pose, solve_pose

__all__ = ["PoseEstimate", "RansacParams", "TofSignal", "estimate"]


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 30
    threshold: float = 4.0
    min_inlier_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not self.threshold > 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if not 0.0 <= self.min_inlier_fraction <= 1.0:
            raise ValueError(
                f"min_inlier_fraction must be in [0, 1], got {self.min_inlier_fraction}"
            )


@dataclass(frozen=True)
class TofSignal:
    """Request for a fresh depth measurement: no trustworthy motion found."""

    reason: str


@dataclass(frozen=True)
class PoseEstimate:
    """Accepted motion with the samples that supported it.

    inlier_indices are positions in the sample sequence passed to
    estimate(); every indexed sample satisfied residual < threshold under
    the winning hypothesis.  mean_residual is the mean over those inliers
    under the refit motion.
    """

    pose: Pose
    inlier_indices: np.ndarray
    mean_residual: float


PoseOrSignal = Union[PoseEstimate, TofSignal]


def estimate(
    samples: Sequence[FlowSample], intrinsics: Intrinsics, params: RansacParams = RansacParams()
) -> PoseOrSignal:
    """Estimate the frame-to-frame motion or signal for a new measurement."""
    positions = np.array([i for i, s in enumerate(samples) if s.valid], dtype=np.intp)
    n_valid = len(positions)
    if n_valid < 3:
        return TofSignal(f"only {n_valid} flow samples carry valid depth (need 3)")
    valid = [samples[i] for i in positions]
    min_inliers = max(3, math.ceil(params.min_inlier_fraction * n_valid))

    rng = np.random.default_rng(params.seed)
    best_mean = math.inf
    best_mask = None
    for _ in range(params.iterations):
        pick = rng.choice(n_valid, size=3, replace=False)
        try:
            hypothesis = solve_pose([valid[j] for j in pick], intrinsics, gn_iterations=1)
        except DegenerateGeometryError:
            continue
        res = residuals_for_pose(valid, hypothesis.pose, intrinsics)
        mask = res < params.threshold
        if int(mask.sum()) < min_inliers:
            continue
        mean_res = float(res[mask].mean())
        if mean_res < best_mean:
            best_mean = mean_res
            best_mask = mask

    if best_mask is None:
        return TofSignal("no motion hypothesis reached the minimum inlier count")
    inliers = [valid[j] for j in np.flatnonzero(best_mask)]
    try:
        refit = solve_pose(inliers, intrinsics, gn_iterations=3)
    except DegenerateGeometryError as exc:
        return TofSignal(f"inlier refit failed: {exc}")
    return PoseEstimate(
        pose=refit.pose,
        inlier_indices=positions[best_mask],
        mean_residual=refit.mean_residual,
    )
