"""Camera geometry primitives shared by the whole estimation stack.

Conventions used package wide:

* Camera frame: right handed; x right, y down, z forward along the
  optical axis.  3D coordinates are in meters.
* Pixels: u indexes columns, v indexes rows, (0, 0) is the center of the
  top-left pixel.  Sub-pixel coordinates are continuous.
* Grayscale images are uint8 arrays of shape (height, width).
* Depth maps are float64 arrays of shape (height, width) holding meters;
  the value 0 marks an invalid or missing measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Intrinsics",
    "Pose",
    "apply_pose",
    "back_project",
    "check_depth_map",
    "check_gray_image",
    "project",
]

_EYE3 = np.eye(3)


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera parameters plus the integer scale of stored depth.

    depth_scale is the number of stored integer units per meter in 16-bit
    depth images (5000 for the handheld RGB-D recordings this package is
    usually run on, 1000 for most structured-light sensors).
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    depth_scale: float = 5000.0

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )
        if not self.depth_scale > 0:
            raise ValueError(f"depth_scale must be positive, got {self.depth_scale}")


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid motion applied to points as ``R x + t``.

    The rotation is ``angle`` radians about the unit vector ``axis``.  A
    zero-angle pose stores the canonical axis (0, 0, 1) so that identity
    poses compare predictably field by field.
    """

    axis: np.ndarray
    angle: float
    translation: np.ndarray

    def __post_init__(self) -> None:
        axis = np.array(self.axis, dtype=np.float64).reshape(3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        angle = float(self.angle)
        if not (np.isfinite(axis).all() and np.isfinite(t).all() and math.isfinite(angle)):
            raise ValueError("pose parameters must be finite")
        if angle == 0.0:
            axis = np.array([0.0, 0.0, 1.0])
        else:
            n = float(np.linalg.norm(axis))
            if abs(n - 1.0) > 1e-9:
                raise ValueError(f"rotation axis must be unit length, |axis| = {n}")
        axis.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "angle", angle)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(axis=(0.0, 0.0, 1.0), angle=0.0, translation=(0.0, 0.0, 0.0))

    @classmethod
    def from_rotation_vector(cls, w, translation=(0.0, 0.0, 0.0)) -> "Pose":
        """Pose whose rotation is the vector ``w`` (axis times angle in radians)."""
        w = np.asarray(w, dtype=np.float64).reshape(3)
        angle = float(np.linalg.norm(w))
        if angle == 0.0:
            return cls(axis=(0.0, 0.0, 1.0), angle=0.0, translation=translation)
        return cls(axis=w / angle, angle=angle, translation=translation)

    @classmethod
    def from_rotation(cls, rotation: np.ndarray, translation=(0.0, 0.0, 0.0)) -> "Pose":
        """Recover axis and angle from a rotation matrix (inverse of rotation_matrix).

        The angle comes from atan2 of the skew-symmetric part against the
        trace, which stays well conditioned for small rotations; angles near
        pi fall back to extracting the axis from the symmetric part.
        """
        R = np.asarray(rotation, dtype=np.float64)
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {R.shape}")
        w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        s = float(np.linalg.norm(w))
        c = 0.5 * (float(np.trace(R)) - 1.0)
        angle = math.atan2(s, c)
        if angle < 1e-12:
            return cls(axis=(0.0, 0.0, 1.0), angle=0.0, translation=translation)
        if s >= 1e-9:
            return cls(axis=w / s, angle=angle, translation=translation)
        # angle ~ pi: R + I = 2 k k^T, take the strongest column
        M = 0.5 * (R + _EYE3)
        i = int(np.argmax(np.diag(M)))
        axis = M[:, i] / math.sqrt(max(M[i, i], 1e-30))
        axis = axis / np.linalg.norm(axis)
        return cls(axis=axis, angle=angle, translation=translation)

    def rotation_matrix(self) -> np.ndarray:
        """Rodrigues formula: I + sin(a) K + (1 - cos(a)) K^2 with K = [axis]x."""
        if self.angle == 0.0:
            return np.eye(3)
        K = _skew(self.axis)
        return np.eye(3) + math.sin(self.angle) * K + (1.0 - math.cos(self.angle)) * (K @ K)

    def inverse(self) -> "Pose":
        R = self.rotation_matrix()
        return Pose.from_rotation(R.T, -(R.T @ self.translation))

    def quaternion(self) -> np.ndarray:
        """Unit quaternion as (qx, qy, qz, qw)."""
        half = 0.5 * self.angle
        return np.concatenate([math.sin(half) * self.axis, [math.cos(half)]])


def back_project(u, v, z, intrinsics: Intrinsics) -> np.ndarray:
    """Lift pixel coordinates and depth to a camera-frame 3D point.

    Accepts scalars or broadcastable arrays; returns shape (..., 3).
    Rejects non-positive or non-finite depth.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if not (np.isfinite(u).all() and np.isfinite(v).all() and np.isfinite(z).all()):
        raise ValueError("back_project inputs must be finite")
    if not (z > 0).all():
        raise ValueError("back_project requires positive depth")
    x = (u - intrinsics.cx) * z / intrinsics.fx
    y = (v - intrinsics.cy) * z / intrinsics.fy
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def project(points, intrinsics: Intrinsics):
    """Project camera-frame 3D points to pixel coordinates (u, v).

    Accepts shape (..., 3); rejects points with z <= 0 (behind or on the
    camera plane).  No bounds clipping: callers decide what off-image
    projections mean.
    """
    p = np.asarray(points, dtype=np.float64)
    if p.shape[-1] != 3:
        raise ValueError(f"points must have a trailing dimension of 3, got {p.shape}")
    if not np.isfinite(p).all():
        raise ValueError("project inputs must be finite")
    z = p[..., 2]
    if not (z > 0).all():
        raise ValueError("project requires points strictly in front of the camera")
    u = intrinsics.fx * p[..., 0] / z + intrinsics.cx
    v = intrinsics.fy * p[..., 1] / z + intrinsics.cy
    return u, v


def apply_pose(pose: Pose, points) -> np.ndarray:
    """Apply the rigid motion to one point (3,) or many (..., 3)."""
    p = np.asarray(points, dtype=np.float64)
    R = pose.rotation_matrix()
    return p @ R.T + pose.translation


def check_gray_image(image) -> np.ndarray:
    """Validate a grayscale image: 2D uint8."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"gray image must be 2D, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"gray image must be uint8, got {img.dtype}")
    return img


def check_depth_map(depth) -> np.ndarray:
    """Validate a depth map: 2D, float64, finite, non-negative (0 = invalid)."""
    d = np.asarray(depth, dtype=np.float64)
    if d.ndim != 2:
        raise ValueError(f"depth map must be 2D, got shape {d.shape}")
    if not np.isfinite(d).all():
        raise ValueError("depth map must be finite everywhere")
    if (d < 0).any():
        raise ValueError("depth map must be non-negative (0 marks invalid pixels)")
    return d
