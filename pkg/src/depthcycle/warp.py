"""Forward depth warping and motion composition.

reproject scatters every valid source depth pixel through a rigid motion
into the target view: back project, transform, project, round to the
nearest pixel, and keep the smallest depth when several sources land on
the same target (nearer surfaces win).  Unwritten target pixels stay 0,
i.e. holes remain explicitly invalid rather than being interpolated;
median_infill exists for callers that do want holes patched.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import Intrinsics, Pose, back_project, check_depth_map

__all__ = ["ReprojectStats", "compose", "median_infill", "reproject"]

# Transformed points closer than this to the camera plane are dropped.
MIN_DEPTH = 1e-6


@dataclass(frozen=True)
class ReprojectStats:
    source_valid: int
    written: int
    dropped_behind: int
    dropped_out_of_bounds: int


def compose(current: Pose, previous: Pose) -> Pose:
    """Motion that applies `previous` first, then `current`.

    R = R_c R_p and t = t_c + R_c t_p, so chaining per-frame motions
    accumulates the transform from the oldest frame to the newest.
    """
    Rc = current.rotation_matrix()
    R = Rc @ previous.rotation_matrix()
    t = current.translation + Rc @ previous.translation
    return Pose.from_rotation(R, t)


def reproject(depth_src, pose: Pose, intrinsics: Intrinsics, *, return_stats: bool = False):
    """Warp a depth map into the view after the given motion.

    Returns the warped depth map, or (depth, ReprojectStats) when
    return_stats is set.  Ties at a target pixel resolve to the minimum
    depth regardless of scatter order; rounding is half-up on both axes.
    """
    depth = check_depth_map(depth_src)
    h, w = depth.shape
    if (h, w) != (intrinsics.height, intrinsics.width):
        raise ValueError(
            f"depth shape {w}x{h} does not match intrinsics "
            f"{intrinsics.width}x{intrinsics.height}"
        )
    out = np.full((h, w), np.inf)
    vs, us = np.nonzero(depth > 0)
    n_valid = len(us)
    if n_valid:
        X = back_project(us, vs, depth[vs, us], intrinsics)
        R = pose.rotation_matrix()
        Y = X @ R.T + pose.translation
        front = Y[:, 2] > MIN_DEPTH
        Yf = Y[front]
        ut = np.floor(intrinsics.fx * Yf[:, 0] / Yf[:, 2] + intrinsics.cx + 0.5).astype(np.intp)
        vt = np.floor(intrinsics.fy * Yf[:, 1] / Yf[:, 2] + intrinsics.cy + 0.5).astype(np.intp)
        inside = (ut >= 0) & (ut < w) & (vt >= 0) & (vt < h)
        np.minimum.at(out, (vt[inside], ut[inside]), Yf[inside, 2])
        n_front = int(front.sum())
        n_inside = int(inside.sum())
    else:
        n_front = n_inside = 0
    written = int(np.isfinite(out).sum())
    out[~np.isfinite(out)] = 0.0
    if not return_stats:
        return out
    stats = ReprojectStats(
        source_valid=n_valid,
        written=written,
        dropped_behind=n_valid - n_front,
        dropped_out_of_bounds=n_front - n_inside,
    )
    return out, stats


def median_infill(depth, kernel: int = 3) -> np.ndarray:
    """Fill invalid pixels with the median of valid values in a k x k window.

    Only invalid pixels with at least one valid neighbor change; valid
    pixels are never touched.  Invalid pixels with no valid neighbor stay
    invalid, so a single pass does not necessarily close large holes.
    """
    if kernel < 3 or kernel % 2 == 0:
        raise ValueError(f"kernel must be odd and >= 3, got {kernel}")
    d = check_depth_map(depth)
    out = d.copy()
    invalid = d == 0
    if not invalid.any():
        return out
    h, w = d.shape
    half = kernel // 2
    padded = np.full((h + 2 * half, w + 2 * half), np.nan)
    padded[half : half + h, half : half + w] = np.where(invalid, np.nan, d)
    windows = np.empty((kernel * kernel, h, w))
    for j in range(kernel):
        for i in range(kernel):
            windows[j * kernel + i] = padded[j : j + h, i : i + w]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN windows are expected
        med = np.nanmedian(windows, axis=0)
    fill = invalid & np.isfinite(med)
    out[fill] = med[fill]
    return out
