"""Patching invalid regions of a measured depth map from a reference pair.

Depth sensors drop pixels (out-of-range returns, saturation under bright
light).  Given a fully usable reference frame and the current frame, the
camera motion between them is estimated from sparse flow; the reference
depth is then forward-warped into the current view and copied only into
the invalid pixels of the current measurement.  Valid measurements are
never overwritten.  The warped map is also scored against the valid part
of the current measurement (the overlap), which gives an honest estimate
of how accurate the filled-in values are.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Intrinsics, check_depth_map, check_gray_image
from .flow import GridSpec, compute_flow
from .pipeline import depth_metrics
from .ransac import RansacParams, TofSignal, estimate
from .warp import reproject

__all__ = ["CannotInfillError", "InfillResult", "infill"]


class CannotInfillError(RuntimeError):
    """Motion between the two frames could not be estimated reliably."""


@dataclass(frozen=True)
class InfillResult:
    depth_filled: np.ndarray
    filled_pixel_count: int
    overlap_mre_percent: float | None  # None when the warp shares no valid pixel


def infill(
    ref_image,
    ref_depth,
    cur_image,
    cur_depth,
    intrinsics: Intrinsics,
    grid: GridSpec = GridSpec(),
    ransac_params: RansacParams = RansacParams(),
) -> InfillResult:
    """Fill invalid pixels of cur_depth by warping ref_depth forward."""
    ref_image = check_gray_image(ref_image)
    cur_image = check_gray_image(cur_image)
    ref_d = check_depth_map(ref_depth)
    cur_d = check_depth_map(cur_depth)
    if not (ref_image.shape == cur_image.shape == ref_d.shape == cur_d.shape):
        raise ValueError("all four inputs must share one image size")

    flow = compute_flow(ref_image, cur_image, ref_d, grid)
    result = estimate(flow, intrinsics, ransac_params)
    if isinstance(result, TofSignal):
        raise CannotInfillError(f"cannot infill: {result.reason}")

    warped = reproject(ref_d, result.pose, intrinsics)
    errors = depth_metrics(warped, cur_d)
    fill = (cur_d == 0) & (warped > 0)
    filled = cur_d.copy()
    filled[fill] = warped[fill]
    return InfillResult(
        depth_filled=filled,
        filled_pixel_count=int(fill.sum()),
        overlap_mre_percent=errors.mre_percent if errors else None,
    )
