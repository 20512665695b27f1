"""Depth from image motion with adaptive duty cycling of a depth sensor.

Estimate dense depth for most frames by tracking the camera against the
last real measurement, and ask the sensor for a new frame only when the
motion estimate cannot be trusted.
"""

from .core import Intrinsics, Pose, apply_pose, back_project, project
from .dataset import AssociatedFrame, DatasetConfig, load_config, load_sequence
from .flow import FlowSample, GridSpec, compute_flow, grid_points, tss_match
from .infill import CannotInfillError, InfillResult, infill
from .pipeline import (
    DepthErrors,
    FrameRecord,
    SequenceReport,
    TradeoffPoint,
    depth_metrics,
    run_sequence,
    sweep_threshold,
)
from .pose import DegenerateGeometryError, PoseSolution, residual, solve_pose
from .power import PowerParams, reduction_vs_tof, system_power
from .ransac import PoseEstimate, RansacParams, TofSignal, estimate
from .synth import CorruptionSpec, SynthScene, corrupt, generate, make_scene, table2_experiment
from .warp import compose, median_infill, reproject

__version__ = "0.1.0"

__all__ = [
    "AssociatedFrame",
    "CannotInfillError",
    "CorruptionSpec",
    "DatasetConfig",
    "DegenerateGeometryError",
    "DepthErrors",
    "FlowSample",
    "FrameRecord",
    "GridSpec",
    "InfillResult",
    "Intrinsics",
    "Pose",
    "PoseEstimate",
    "PoseSolution",
    "PowerParams",
    "RansacParams",
    "SequenceReport",
    "SynthScene",
    "TofSignal",
    "TradeoffPoint",
    "apply_pose",
    "back_project",
    "compose",
    "compute_flow",
    "corrupt",
    "depth_metrics",
    "estimate",
    "generate",
    "grid_points",
    "infill",
    "load_config",
    "load_sequence",
    "make_scene",
    "median_infill",
    "project",
    "reduction_vs_tof",
    "reproject",
    "residual",
    "run_sequence",
    "solve_pose",
    "sweep_threshold",
    "system_power",
    "table2_experiment",
    "tss_match",
]
