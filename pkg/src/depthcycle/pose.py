"""Rigid camera motion from sparse optical flow by Gauss-Newton least squares.

Each flow sample relates its displacement to the six motion unknowns.
For a source pixel (u, v) at depth z, target pixel (u', v') = (u + du,
v + dv), and motion (R, t), write p = (R - I) X + t with X the back
projection of (u, v, z).  The displacement model is then

    du_hat = (fx * p_x - (u' - cx) * p_z) / z
    dv_hat = (fy * p_y - (v' - cy) * p_z) / z

which is an exact rearrangement of the projection equations (no small
angle assumption), so residuals vanish at the true motion on clean data.
The Gauss-Newton step linearizes only the rotation, replacing (R - I) X
by w x X, and solves the stacked 6x6 normal equations; the increment is
composed onto the accumulated motion and the remaining displacement is
re-evaluated.  One iteration from identity is therefore the plain linear
solution; a few more converge quadratically for small motions.

The per-sample residual is the squared prediction error in pixels:
r = (du - du_hat)^2 + (dv - dv_hat)^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import Intrinsics, Pose, back_project
from .flow import FlowSample

__all__ = [
    "DegenerateGeometryError",
    "PoseSolution",
    "flow_jacobian",
    "predicted_flow",
    "residual",
    "residuals_for_pose",
    "solve_pose",
]

# Normal matrices with a 2-norm condition number beyond this are treated
# as rank deficient (collinear points, pure texture-free geometry, ...).
CONDITION_LIMIT = 1e12

_EYE3 = np.eye(3)


class DegenerateGeometryError(ValueError):
    """The sample geometry does not constrain all six motion parameters."""


@dataclass(frozen=True)
class PoseSolution:
    """Solver output: the motion, per-sample squared errors, and their mean."""

    pose: Pose
    residuals: np.ndarray
    mean_residual: float
    iterations: int


class _SampleArrays(NamedTuple):
    u: np.ndarray
    v: np.ndarray
    du: np.ndarray
    dv: np.ndarray
    z: np.ndarray
    X: np.ndarray       # (n, 3) back projections
    rel_tu: np.ndarray  # target u relative to the principal point
    rel_tv: np.ndarray


def _sample_arrays(samples: Sequence[FlowSample], intrinsics: Intrinsics) -> _SampleArrays:
    if any(not s.valid for s in samples):
        raise ValueError("all samples must carry valid depth")
    u = np.array([s.u for s in samples], dtype=np.float64)
    v = np.array([s.v for s in samples], dtype=np.float64)
    du = np.array([s.du for s in samples], dtype=np.float64)
    dv = np.array([s.dv for s in samples], dtype=np.float64)
    z = np.array([s.z for s in samples], dtype=np.float64)
    X = back_project(u, v, z, intrinsics)
    return _SampleArrays(
        u=u, v=v, du=du, dv=dv, z=z, X=X,
        rel_tu=u + du - intrinsics.cx,
        rel_tv=v + dv - intrinsics.cy,
    )


def _predicted(arr: _SampleArrays, pose: Pose, intrinsics: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
    W = pose.rotation_matrix() - _EYE3
    p = arr.X @ W.T + pose.translation
    du_hat = (intrinsics.fx * p[:, 0] - arr.rel_tu * p[:, 2]) / arr.z
    dv_hat = (intrinsics.fy * p[:, 1] - arr.rel_tv * p[:, 2]) / arr.z
    return du_hat, dv_hat


def predicted_flow(sample: FlowSample, pose: Pose, intrinsics: Intrinsics) -> tuple[float, float]:
    """Model displacement (du_hat, dv_hat) of one sample under a motion."""
    arr = _sample_arrays([sample], intrinsics)
    du_hat, dv_hat = _predicted(arr, pose, intrinsics)
    return float(du_hat[0]), float(dv_hat[0])


def residual(sample: FlowSample, pose: Pose, intrinsics: Intrinsics) -> float:
    """Squared prediction error of one sample in pixels squared."""
    du_hat, dv_hat = predicted_flow(sample, pose, intrinsics)
    return (sample.du - du_hat) ** 2 + (sample.dv - dv_hat) ** 2


def residuals_for_pose(
    samples: Sequence[FlowSample], pose: Pose, intrinsics: Intrinsics
) -> np.ndarray:
    """Vectorized residuals of many (all valid) samples under one motion."""
    arr = _sample_arrays(samples, intrinsics)
    du_hat, dv_hat = _predicted(arr, pose, intrinsics)
    return (arr.du - du_hat) ** 2 + (arr.dv - dv_hat) ** 2


def _jacobian(
    X: np.ndarray, z: np.ndarray, rel_tu: np.ndarray, rel_tv: np.ndarray, intrinsics: Intrinsics
) -> np.ndarray:
    """Rows d(du_hat, dv_hat)/d(wx, wy, wz, tx, ty, tz), interleaved u,v per sample."""
    fx, fy = intrinsics.fx, intrinsics.fy
    xz = X[:, 0] / z
    yz = X[:, 1] / z
    J = np.empty((2 * len(z), 6))
    Ju, Jv = J[0::2], J[1::2]
    Ju[:, 0] = -rel_tu * yz
    Ju[:, 1] = fx + rel_tu * xz
    Ju[:, 2] = -fx * yz
    Ju[:, 3] = fx / z
    Ju[:, 4] = 0.0
    Ju[:, 5] = -rel_tu / z
    Jv[:, 0] = -fy - rel_tv * yz
    Jv[:, 1] = rel_tv * xz
    Jv[:, 2] = fy * xz
    Jv[:, 3] = 0.0
    Jv[:, 4] = fy / z
    Jv[:, 5] = -rel_tv / z
    return J


def flow_jacobian(sample: FlowSample, intrinsics: Intrinsics) -> np.ndarray:
    """(2, 6) derivative of the predicted displacement at zero motion."""
    arr = _sample_arrays([sample], intrinsics)
    return _jacobian(arr.X, arr.z, arr.rel_tu, arr.rel_tv, intrinsics)


def _rotation_from_vector(w: np.ndarray) -> np.ndarray:
    angle = float(np.linalg.norm(w))
    if angle == 0.0:
        return np.eye(3)
    return Pose.from_rotation_vector(w).rotation_matrix()


def solve_pose(
    samples: Sequence[FlowSample], intrinsics: Intrinsics, gn_iterations: int = 3
) -> PoseSolution:
    """Least-squares motion from flow samples.

    Samples without valid depth are ignored; at least 3 valid ones are
    required.  Raises DegenerateGeometryError when the normal equations
    are rank deficient (condition number above CONDITION_LIMIT) or the
    accumulated motion pushes points behind the camera.
    """
    if gn_iterations < 1:
        raise ValueError(f"gn_iterations must be >= 1, got {gn_iterations}")
    used = [s for s in samples if s.valid]
    if len(used) < 3:
        raise ValueError(f"need at least 3 valid flow samples, got {len(used)}")
    arr = _sample_arrays(used, intrinsics)
    target_u = arr.u + arr.du
    target_v = arr.v + arr.dv

    R = np.eye(3)
    t = np.zeros(3)
    for _ in range(gn_iterations):
        if np.array_equal(R, _EYE3) and not t.any():
            # exact identity: the model predicts the source pixel itself,
            # so skip the projective round trip and its rounding noise
            Xc, zc = arr.X, arr.z
            pred_u, pred_v = arr.u, arr.v
        else:
            Xc = arr.X @ R.T + t
            zc = Xc[:, 2]
            if (zc <= 1e-9).any():
                raise DegenerateGeometryError("accumulated motion puts samples behind the camera")
            pred_u = intrinsics.fx * Xc[:, 0] / zc + intrinsics.cx
            pred_v = intrinsics.fy * Xc[:, 1] / zc + intrinsics.cy
        J = _jacobian(Xc, zc, arr.rel_tu, arr.rel_tv, intrinsics)
        b = np.empty(2 * len(used))
        b[0::2] = target_u - pred_u
        b[1::2] = target_v - pred_v
        M = J.T @ J
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise DegenerateGeometryError(
                f"normal equations are ill conditioned (cond = {cond:.3g})"
            )
        step = np.linalg.solve(M, J.T @ b)
        R_inc = _rotation_from_vector(step[:3])
        R = R_inc @ R
        t = R_inc @ t + step[3:]

    pose = Pose.from_rotation(R, t)
    res = residuals_for_pose(used, pose, intrinsics)
    return PoseSolution(
        pose=pose,
        residuals=res,
        mean_residual=float(res.mean()),
        iterations=gn_iterations,
    )
