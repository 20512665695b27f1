"""Synthetic flow-field generation for solver and filter evaluation.

A scene is a bag of camera-frame 3D points that stay inside the image in
both views of a known motion.  generate() turns it into exact sub-pixel
flow samples; corrupt() degrades a seeded random subset with depth or
flow noise and can round all displacements to integers, mimicking what a
block matcher would deliver.  table2_experiment() uses these to compare
the robust estimator against plain least squares on all samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import Intrinsics, Pose, apply_pose, project
from .flow import FlowSample
from .pose import DegenerateGeometryError, solve_pose
from .ransac import RansacParams, TofSignal, estimate

__all__ = [
    "CorruptionSpec",
    "DEFAULT_INTRINSICS",
    "RegimeResult",
    "SynthScene",
    "corrupt",
    "generate",
    "make_scene",
    "random_small_pose",
    "table2_experiment",
]

# The classic 640x480 handheld RGB-D default; synthetic experiments and
# tests that need "a plausible camera" use this one.
DEFAULT_INTRINSICS = Intrinsics(
    fx=525.0, fy=525.0, cx=319.5, cy=239.5, width=640, height=480, depth_scale=5000.0
)


@dataclass(frozen=True)
class SynthScene:
    """Camera-frame points, the true motion, and the camera that sees them."""

    points: np.ndarray  # (n, 3), all z > 0
    pose_true: Pose
    intrinsics: Intrinsics
    seed: int


@dataclass(frozen=True)
class CorruptionSpec:
    """What to break and by how much; a magnitude of 0 disables a channel.

    depth_noise is Gaussian with the magnitude as sigma, relative in
    multiplicative mode or meters in additive mode; flow_noise is
    uniform in +/- the magnitude, in pixels.  Only a corrupt_fraction
    share of samples (seeded choice) is touched; quantize_flow rounds
    every displacement to the nearest integer afterwards, corrupted or
    not, mimicking an integer block matcher.
    """

    depth_noise: float = 0.1
    depth_noise_mode: str = "multiplicative"
    flow_noise: float = 10.0
    corrupt_fraction: float = 0.3
    quantize_flow: bool = False

    def __post_init__(self) -> None:
        if self.depth_noise < 0 or self.flow_noise < 0:
            raise ValueError("noise magnitudes must be non-negative")
        if self.depth_noise_mode not in ("multiplicative", "additive"):
            raise ValueError(f"unknown depth_noise_mode {self.depth_noise_mode!r}")
        if not 0.0 <= self.corrupt_fraction <= 1.0:
            raise ValueError(f"corrupt_fraction must be in [0, 1], got {self.corrupt_fraction}")


def make_scene(
    n_points: int,
    pose_true: Pose,
    intrinsics: Intrinsics = DEFAULT_INTRINSICS,
    seed: int = 0,
    depth_range: tuple[float, float] = (0.5, 5.0),
) -> SynthScene:
    """Sample points uniform in pixel space and depth, visible in both views."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    lo, hi = depth_range
    if not 0 < lo <= hi:
        raise ValueError(f"bad depth range {depth_range}")
    rng = np.random.default_rng(seed)
    kept: list[np.ndarray] = []
    total = 0
    attempts = 0
    while total < n_points:
        attempts += 1
        if attempts > 1000:
            raise ValueError("could not place points visible in both views; motion too large?")
        m = max(4 * (n_points - total), 16)
        u = rng.uniform(0.0, intrinsics.width - 1.0, m)
        v = rng.uniform(0.0, intrinsics.height - 1.0, m)
        z = rng.uniform(lo, hi, m)
        x = (u - intrinsics.cx) * z / intrinsics.fx
        y = (v - intrinsics.cy) * z / intrinsics.fy
        X = np.stack([x, y, z], axis=-1)
        Y = apply_pose(pose_true, X)
        ok = Y[:, 2] > 1e-6
        tu = np.where(ok, intrinsics.fx * Y[:, 0] / np.where(ok, Y[:, 2], 1.0) + intrinsics.cx, -1)
        tv = np.where(ok, intrinsics.fy * Y[:, 1] / np.where(ok, Y[:, 2], 1.0) + intrinsics.cy, -1)
        ok &= (tu >= 0) & (tu <= intrinsics.width - 1) & (tv >= 0) & (tv <= intrinsics.height - 1)
        kept.append(X[ok])
        total += int(ok.sum())
    points = np.concatenate(kept)[:n_points]
    return SynthScene(points=points, pose_true=pose_true, intrinsics=intrinsics, seed=seed)


def generate(scene: SynthScene) -> list[FlowSample]:
    """Exact flow samples of the scene under its true motion."""
    K = scene.intrinsics
    u, v = project(scene.points, K)
    tu, tv = project(apply_pose(scene.pose_true, scene.points), K)
    z = scene.points[:, 2]
    return [
        FlowSample(
            u=float(u[i]), v=float(v[i]),
            du=float(tu[i] - u[i]), dv=float(tv[i] - v[i]),
            z=float(z[i]), sad=0, valid=True,
        )
        for i in range(len(z))
    ]


def corrupt(samples: list[FlowSample], spec: CorruptionSpec, seed: int = 0) -> list[FlowSample]:
    """Return a new sample list with a seeded subset degraded.

    Untouched samples are returned unchanged (bitwise, unless
    quantize_flow rounds every displacement).
    """
    rng = np.random.default_rng(seed)
    out = list(samples)
    n = len(out)
    k = int(round(spec.corrupt_fraction * n))
    if k:
        for idx in rng.choice(n, size=k, replace=False):
            s = out[idx]
            z, du, dv = s.z, s.du, s.dv
            if spec.depth_noise > 0:
                if spec.depth_noise_mode == "multiplicative":
                    z = z * (1.0 + rng.normal(0.0, spec.depth_noise))
                else:
                    z = z + rng.normal(0.0, spec.depth_noise)
                z = max(z, 1e-3)  # keep the sample physically in front of the camera
            if spec.flow_noise > 0:
                du = du + rng.uniform(-spec.flow_noise, spec.flow_noise)
                dv = dv + rng.uniform(-spec.flow_noise, spec.flow_noise)
            out[idx] = replace(s, z=z, du=du, dv=dv)
    if spec.quantize_flow:
        out = [replace(s, du=float(np.rint(s.du)), dv=float(np.rint(s.dv))) for s in out]
    return out


def random_small_pose(
    rng: np.random.Generator,
    angle_range_deg: tuple[float, float] = (0.2, 2.0),
    translation_range_m: tuple[float, float] = (0.02, 0.05),
) -> Pose:
    """Random motion in the small envelope the solver is designed for."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = math.radians(rng.uniform(*angle_range_deg))
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    t = direction * rng.uniform(*translation_range_m)
    return Pose(axis=axis, angle=angle, translation=t)


@dataclass(frozen=True)
class RegimeResult:
    regime: str
    error_without: float          # mean |t_est - t_true| in meters, plain least squares
    error_with: float             # same, robust estimator
    reduction_percent: float
    trials_used: int


# Quantization is deliberately off here: rounding perturbs every sample,
# not just the corrupted subset, so no outlier filter can undo it and it
# would mask the effect the experiment isolates.
_REGIMES = (
    ("depth", CorruptionSpec(depth_noise=0.1, flow_noise=0.0, corrupt_fraction=0.3, quantize_flow=False)),
    ("flow", CorruptionSpec(depth_noise=0.0, flow_noise=10.0, corrupt_fraction=0.3, quantize_flow=False)),
    ("both", CorruptionSpec(depth_noise=0.1, flow_noise=10.0, corrupt_fraction=0.3, quantize_flow=False)),
)


def table2_experiment(
    seed: int = 0,
    trials: int = 100,
    n_points: int = 144,
    intrinsics: Intrinsics = DEFAULT_INTRINSICS,
) -> list[RegimeResult]:
    """Translation error of plain least squares vs the robust estimator.

    Each trial draws a fresh small motion and scene, degrades the exact
    flow per regime, and solves both ways with the same corrupted
    samples.  Trials where either solver fails are dropped from that
    regime's averages.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    errors: dict[str, list[tuple[float, float]]] = {name: [] for name, _ in _REGIMES}
    root = np.random.SeedSequence(seed)
    for trial_seq in root.spawn(trials):
        rng = np.random.default_rng(trial_seq)
        pose_true = random_small_pose(rng)
        scene_seed, corrupt_seed, ransac_seed = (int(x) for x in rng.integers(0, 2**31, 3))
        scene = make_scene(n_points, pose_true, intrinsics, seed=scene_seed)
        exact = generate(scene)
        for name, spec in _REGIMES:
            noisy = corrupt(exact, spec, seed=corrupt_seed)
            try:
                plain = solve_pose(noisy, intrinsics, gn_iterations=3)
            except DegenerateGeometryError:
                continue
            robust = estimate(noisy, intrinsics, RansacParams(seed=ransac_seed))
            if isinstance(robust, TofSignal):
                continue
            t_true = pose_true.translation
            errors[name].append(
                (
                    float(np.linalg.norm(plain.pose.translation - t_true)),
                    float(np.linalg.norm(robust.pose.translation - t_true)),
                )
            )
    results = []
    for name, _ in _REGIMES:
        pairs = errors[name]
        if not pairs:
            raise RuntimeError(f"no usable trials in regime {name!r}")
        without = float(np.mean([p[0] for p in pairs]))
        with_r = float(np.mean([p[1] for p in pairs]))
        results.append(
            RegimeResult(
                regime=name,
                error_without=without,
                error_with=with_r,
                reduction_percent=100.0 * (1.0 - with_r / without),
                trials_used=len(pairs),
            )
        )
    return results
