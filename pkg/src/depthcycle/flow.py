"""Sparse optical flow by block matching on a fixed grid.

The matcher is the classic three step search: starting from displacement
(0, 0), the 3x3 neighborhood of the current displacement at the current
step size is scored with the sum of absolute differences over a square
block, the best candidate becomes the new center, and the step halves
until a one-pixel round has been evaluated.  With the default step of 8
the cumulative range is +/-15 pixels per axis, so grid points keep a
margin of block//2 + 15 from the image border and every probed block
stays fully inside both images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import check_depth_map, check_gray_image

__all__ = ["FlowSample", "GridSpec", "compute_flow", "grid_points", "tss_match"]


@dataclass(frozen=True)
class GridSpec:
    rows: int = 12
    cols: int = 12
    block: int = 15
    initial_step: int = 8

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.rows * self.cols < 3:
            raise ValueError("grid must provide at least 3 points for pose estimation")
        if self.block < 1 or self.block % 2 == 0:
            raise ValueError(f"block size must be odd and positive, got {self.block}")
        step = self.initial_step
        if step < 1 or step & (step - 1) != 0:
            raise ValueError(f"initial_step must be a power of two >= 1, got {step}")

    @property
    def margin(self) -> int:
        """Border margin: half block plus the cumulative search range."""
        return self.block // 2 + 2 * self.initial_step - 1


@dataclass(frozen=True)
class FlowSample:
    """One grid point with its matched displacement and source depth.

    du, dv are integer valued when produced by tss_match; synthetic
    generators may carry exact sub-pixel values.  z is the depth at the
    source pixel in meters; valid is False when that depth is missing,
    in which case the sample must not be used for pose estimation.
    """

    u: float
    v: float
    du: float
    dv: float
    z: float
    sad: int
    valid: bool


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _axis_points(lo: int, hi: int, count: int) -> list[int]:
    if count == 1:
        return [_round_half_up((lo + hi) / 2.0)]
    span = hi - lo
    return [lo + _round_half_up(i * span / (count - 1)) for i in range(count)]


def grid_points(spec: GridSpec, width: int, height: int) -> list[tuple[int, int]]:
    """Evenly spaced (u, v) grid positions honoring the search margin.

    Points are returned row major (v varies slowest).  Raises if the image
    is too small to leave any room between the margins.
    """
    m = spec.margin
    if width - 1 - 2 * m < 1 or height - 1 - 2 * m < 1:
        raise ValueError(
            f"image {width}x{height} too small for block {spec.block} and "
            f"search range {2 * spec.initial_step - 1}"
        )
    us = _axis_points(m, width - 1 - m, spec.cols)
    vs = _axis_points(m, height - 1 - m, spec.rows)
    return [(u, v) for v in vs for u in us]


def _block_sad(prev: np.ndarray, nxt: np.ndarray, u: int, v: int, du: int, dv: int, half: int) -> int:
    a = prev[v - half : v + half + 1, u - half : u + half + 1].astype(np.int32)
    b = nxt[v + dv - half : v + dv + half + 1, u + du - half : u + du + half + 1].astype(np.int32)
    return int(np.abs(a - b).sum())


def tss_match(prev, nxt, u: int, v: int, spec: GridSpec = GridSpec()) -> tuple[int, int, int]:
    """Three step search around (u, v); returns (du, dv, sad).

    Ties are broken first by the smaller displacement norm du^2 + dv^2,
    then lexicographically by (du, dv), so the result is deterministic.
    """
    prev = check_gray_image(prev)
    nxt = check_gray_image(nxt)
    if prev.shape != nxt.shape:
        raise ValueError(f"image shapes differ: {prev.shape} vs {nxt.shape}")
    m = spec.margin
    h, w = prev.shape
    if not (m <= u <= w - 1 - m and m <= v <= h - 1 - m):
        raise ValueError(f"grid point ({u}, {v}) violates the margin {m} in a {w}x{h} image")
    half = spec.block // 2
    du, dv = 0, 0
    best = (_block_sad(prev, nxt, u, v, 0, 0, half), 0, (0, 0))
    step = spec.initial_step
    while True:
        for j in (-step, 0, step):
            for i in (-step, 0, step):
                cu, cv = du + i, dv + j
                key = (_block_sad(prev, nxt, u, v, cu, cv, half), cu * cu + cv * cv, (cu, cv))
                if key < best:
                    best = key
        du, dv = best[2]
        if step == 1:
            break
        step //= 2
    return du, dv, best[0]


def compute_flow(prev, nxt, depth_prev, spec: GridSpec = GridSpec()) -> list[FlowSample]:
    """Match every grid point and attach the source depth.

    Points whose depth is missing still run the search (the cost is small
    and keeps the scan deterministic) but come back with valid=False.
    """
    prev = check_gray_image(prev)
    nxt = check_gray_image(nxt)
    depth = check_depth_map(depth_prev)
    if prev.shape != nxt.shape or prev.shape != depth.shape:
        raise ValueError(
            f"shape mismatch: prev {prev.shape}, next {nxt.shape}, depth {depth.shape}"
        )
    h, w = prev.shape
    samples = []
    for u, v in grid_points(spec, w, h):
        du, dv, sad = tss_match(prev, nxt, u, v, spec)
        z = float(depth[v, u])
        samples.append(FlowSample(u=u, v=v, du=du, dv=dv, z=z, sad=sad, valid=z > 0))
    return samples
