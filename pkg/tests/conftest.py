"""Shared test scenery: an analytically rendered textured plane.

A plane n . X = c carries a smooth texture defined on 3D position, so a
camera view of it can be rendered in closed form: depth from the
ray-plane intersection, intensity sampled at the exact continuous hit
point.  There is no interpolation anywhere, which means the rendered
pairs are geometrically perfect while the true depth, flow, and motion
stay known to the tests.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from depthcycle.core import Intrinsics, Pose, apply_pose, back_project, project
from depthcycle.dataset import AssociatedFrame, encode_depth_png
from depthcycle.warp import compose

# Small camera for fast unit tests, full size where realism matters.
SMALL_K = Intrinsics(fx=130.0, fy=130.0, cx=79.5, cy=59.5, width=160, height=120)
FULL_K = Intrinsics(fx=525.0, fy=525.0, cx=319.5, cy=239.5, width=640, height=480)

# Default plane: unit normal tilted a little off the optical axis, about
# 2 m out, so depth varies smoothly across the image but stays positive.
PLANE_NORMAL = np.array([0.12, -0.08, 1.0]) / np.linalg.norm([0.12, -0.08, 1.0])
PLANE_OFFSET = 2.0


def sine_texture(points: np.ndarray) -> np.ndarray:
    """Smooth intensity field over 3D position, range [2.5, 252.5].

    Three incommensurate frequencies in different directions: the lowest
    dominates so block matching sees a single cost minimum inside the
    search range, the highest adds gradient inside every block.
    """
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    return (
        127.5
        + 58.0 * np.sin(15.0 * x + 4.0 * y + 3.0 * z)
        + 40.0 * np.sin(5.0 * x - 25.0 * y + 2.0 * z)
        + 27.0 * np.sin(45.0 * x + 38.0 * y - 7.0 * z)
    )


def quantize_gray(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def render_plane(
    intrinsics: Intrinsics,
    pose: Pose = Pose.identity(),
    normal: np.ndarray = PLANE_NORMAL,
    offset: float = PLANE_OFFSET,
) -> tuple[np.ndarray, np.ndarray]:
    """Gray image and depth map of the plane seen from the moved camera.

    The plane lives in the reference frame; pose maps reference
    coordinates into the rendered camera's frame.
    """
    R = pose.rotation_matrix()
    t = pose.translation
    n_i = R @ normal
    c_i = offset + n_i @ t
    dx, dy = np.meshgrid(
        (np.arange(intrinsics.width) - intrinsics.cx) / intrinsics.fx,
        (np.arange(intrinsics.height) - intrinsics.cy) / intrinsics.fy,
    )
    denom = n_i[0] * dx + n_i[1] * dy + n_i[2]
    if not (denom > 1e-6).all():
        raise ValueError("plane leaves the field of view under this motion")
    depth = c_i / denom
    rays = np.stack([dx, dy, np.ones_like(dx)], axis=-1)
    hit = rays * depth[..., None]
    # texture is anchored in the reference frame: X = R^T (Y - t)
    X = (hit - t) @ R
    return quantize_gray(sine_texture(X)), depth


def plane_depth_at(
    intrinsics: Intrinsics,
    u,
    v,
    normal: np.ndarray = PLANE_NORMAL,
    offset: float = PLANE_OFFSET,
):
    """Exact reference-frame plane depth at continuous pixel positions."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    dx = (u - intrinsics.cx) / intrinsics.fx
    dy = (v - intrinsics.cy) / intrinsics.fy
    return offset / (normal[0] * dx + normal[1] * dy + normal[2])


def plane_flow(intrinsics: Intrinsics, pose: Pose, u, v):
    """True flow at reference pixels (u, v) for a camera moving by pose."""
    z = plane_depth_at(intrinsics, u, v)
    X = back_project(u, v, z, intrinsics)
    tu, tv = project(apply_pose(pose, X), intrinsics)
    return tu - np.asarray(u, dtype=np.float64), tv - np.asarray(v, dtype=np.float64)


def relative_pose(prev: Pose, cur: Pose) -> Pose:
    """Motion mapping the prev camera frame into the cur one."""
    return compose(cur, prev.inverse())


def accumulate_poses(steps: list[Pose]) -> list[Pose]:
    """Absolute poses of a trajectory starting at identity."""
    poses = [Pose.identity()]
    for step in steps:
        poses.append(compose(step, poses[-1]))
    return poses


def render_sequence(
    intrinsics: Intrinsics, poses: list[Pose], fps: float = 30.0
) -> list[AssociatedFrame]:
    frames = []
    for i, pose in enumerate(poses):
        image, depth = render_plane(intrinsics, pose)
        frames.append(
            AssociatedFrame(
                rgb_timestamp=i / fps,
                depth_timestamp=i / fps + 0.004,
                image=image,
                depth=depth,
            )
        )
    return frames


def noise_frames(intrinsics: Intrinsics, count: int, seed: int = 0) -> list[AssociatedFrame]:
    """Frames of mutually uncorrelated noise; motion estimation must fail."""
    rng = np.random.default_rng(seed)
    shape = (intrinsics.height, intrinsics.width)
    return [
        AssociatedFrame(
            rgb_timestamp=i / 30.0,
            depth_timestamp=i / 30.0,
            image=rng.integers(0, 256, size=shape, dtype=np.uint8),
            depth=rng.uniform(0.5, 3.0, size=shape),
        )
        for i in range(count)
    ]


def gray_png_bytes(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return buf.getvalue()


def write_dataset(root: Path, intrinsics: Intrinsics, frames: list[AssociatedFrame]) -> Path:
    """Materialize frames as an on-disk sequence; returns the config path.

    Depth goes through the usual 16-bit quantization, so what the loader
    reads back differs from the in-memory maps by up to half a depth unit.
    """
    (root / "rgb").mkdir(parents=True, exist_ok=True)
    (root / "depth").mkdir(exist_ok=True)
    rgb_lines = ["# color images", "# timestamp filename"]
    depth_lines = ["# depth images", "# timestamp filename"]
    for frame in frames:
        name = f"{frame.rgb_timestamp:.6f}.png"
        (root / "rgb" / name).write_bytes(gray_png_bytes(frame.image))
        (root / "depth" / name).write_bytes(
            encode_depth_png(frame.depth, intrinsics.depth_scale)
        )
        rgb_lines.append(f"{frame.rgb_timestamp:.6f} rgb/{name}")
        depth_lines.append(f"{frame.depth_timestamp:.6f} depth/{name}")
    (root / "rgb.txt").write_text("\n".join(rgb_lines) + "\n", encoding="utf-8")
    (root / "depth.txt").write_text("\n".join(depth_lines) + "\n", encoding="utf-8")
    config = root / "camera.cfg"
    config.write_text(
        "\n".join(
            [
                "# camera used to render this sequence",
                f"fx = {intrinsics.fx}",
                f"fy = {intrinsics.fy}",
                f"cx = {intrinsics.cx}",
                f"cy = {intrinsics.cy}",
                f"width = {intrinsics.width}",
                f"height = {intrinsics.height}",
                f"depth_scale = {intrinsics.depth_scale}",
                "max_time_diff = 0.02",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    return config


def rotation_angle_deg(a: Pose, b: Pose) -> float:
    """Geodesic angle between two rotations, in degrees."""
    Rd = a.rotation_matrix() @ b.rotation_matrix().T
    c = 0.5 * (np.trace(Rd) - 1.0)
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
