"""End-to-end behavior of the adaptive duty-cycling loop."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import SMALL_K, FULL_K, accumulate_poses, noise_frames, render_sequence
from depthcycle.core import Pose
from depthcycle.dataset import AssociatedFrame
from depthcycle.pipeline import depth_metrics, run_sequence, sweep_threshold

AXIS = np.array([0.2, 1.0, -0.1]) / np.linalg.norm([0.2, 1.0, -0.1])


def _moving_frames(count=6, angle_deg=0.4, translation=(0.008, -0.004, 0.002)):
    step = Pose.from_rotation_vector(np.radians(angle_deg) * AXIS, translation)
    return render_sequence(SMALL_K, accumulate_poses([step] * (count - 1)))


class TestDepthMetrics:
    def test_hand_computed_example(self):
        truth = np.array([[1.0, 2.0], [4.0, 5.0]])
        est = np.array([[1.1, 2.0], [4.0, 5.0]])
        m = depth_metrics(est, truth)
        # diffs (0.1, 0, 0, 0): MRE = 100 * 0.1/1/4 = 2.5 %,
        # MAE = 100 * 0.025 = 2.5 cm, RMSE = 100 * sqrt(0.0025) = 5 cm
        assert m.pixel_count == 4
        assert np.isclose(m.mre_percent, 2.5, rtol=1e-12)
        assert np.isclose(m.mae_cm, 2.5, rtol=1e-12)
        assert np.isclose(m.rmse_cm, 5.0, rtol=1e-12)

    def test_only_mutually_valid_pixels_count(self):
        truth = np.array([[1.0, 0.0], [3.0, 4.0]])
        est = np.array([[1.0, 2.0], [0.0, 4.0]])
        m = depth_metrics(est, truth)
        assert m.pixel_count == 2
        assert m.mre_percent == 0.0

    def test_none_when_no_overlap(self):
        truth = np.array([[1.0, 0.0]])
        est = np.array([[0.0, 2.0]])
        assert depth_metrics(est, truth) is None

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            depth_metrics(np.ones((2, 2)), np.ones((2, 3)))


class TestStaticSequence:
    """A static camera is the cleanest invariant: zero flow solves to the
    exact identity, the warp writes pixels back bitwise, so estimated
    frames reproduce the measurement perfectly and only frame 0 measures."""

    def test_single_measurement_and_exact_depth(self):
        frames = render_sequence(SMALL_K, [Pose.identity()] * 5)
        report = run_sequence(frames, SMALL_K)
        assert [r.used_tof for r in report.frames] == [True, False, False, False, False]
        assert report.duty_cycle_percent == 20.0
        for r in report.frames[1:]:
            assert r.mre_percent == 0.0
            assert r.hole_fraction == 0.0
            assert r.pose_cumulative.angle == 0.0
            assert np.array_equal(r.pose_cumulative.translation, np.zeros(3))
        assert report.median_mre_percent == 0.0
        assert report.median_rmse_cm == 0.0

    def test_estimated_depth_equals_measurement(self):
        frames = render_sequence(SMALL_K, [Pose.identity()] * 3)
        outputs = []
        run_sequence(frames, SMALL_K, on_frame=lambda d, f: outputs.append(d.depth_out))
        assert np.array_equal(outputs[1], frames[0].depth)
        assert np.array_equal(outputs[2], frames[0].depth)


class TestMovingSequence:
    def test_tracks_slow_motion_without_measuring(self):
        report = run_sequence(_moving_frames(), SMALL_K)
        assert [r.used_tof for r in report.frames] == [True] + [False] * 5
        assert report.duty_cycle_percent == pytest.approx(100.0 / 6.0)
        assert report.median_mre_percent < 5.0
        # the first estimated frame matches against the full measurement;
        # later ones match against warped state whose holes can swallow
        # a few grid points
        assert report.frames[1].valid_samples == 144
        for r in report.frames[1:]:
            assert r.valid_samples >= 100
            assert r.inliers >= 15  # the acceptance floor at 144 samples
            assert r.hole_fraction < 0.3

    def test_holes_grow_with_accumulated_motion(self):
        report = run_sequence(_moving_frames(), SMALL_K)
        holes = [r.hole_fraction for r in report.frames[1:]]
        assert holes == sorted(holes)

    def test_median_fill_reduces_holes(self):
        frames = _moving_frames()
        plain = run_sequence(frames, SMALL_K)
        filled = run_sequence(frames, SMALL_K, median_fill_kernel=3)
        assert [r.used_tof for r in filled.frames] == [r.used_tof for r in plain.frames]
        for f, p in zip(filled.frames[1:], plain.frames[1:]):
            assert f.hole_fraction < p.hole_fraction
        assert filled.median_mre_percent < 5.0


class TestMeasurementFallback:
    def test_lost_tracking_triggers_measurement_and_resets(self):
        # two static plane frames, then two of pure noise: the
        # plane-to-noise and noise-to-noise pairs cannot be tracked
        frames = render_sequence(SMALL_K, [Pose.identity()] * 2)
        frames += noise_frames(SMALL_K, 2, seed=3)
        report = run_sequence(frames, SMALL_K)
        assert [r.used_tof for r in report.frames] == [True, False, True, True]
        for r in report.frames:
            if r.used_tof:
                # accumulated motion resets exactly on every measurement
                assert r.pose_cumulative.angle == 0.0
                assert np.array_equal(r.pose_cumulative.translation, np.zeros(3))
                assert r.mre_percent is None

    def test_recovers_after_reset(self):
        planes = render_sequence(SMALL_K, [Pose.identity()] * 3)
        frames = [planes[0], noise_frames(SMALL_K, 1, seed=7)[0], planes[1], planes[2]]
        report = run_sequence(frames, SMALL_K)
        assert [r.used_tof for r in report.frames] == [True, True, True, False]
        # the final pair is static again and warps the frame-2 measurement
        assert report.frames[-1].mre_percent == 0.0

    def test_measurement_needed_but_missing(self):
        plane = render_sequence(SMALL_K, [Pose.identity()])[0]
        noise = noise_frames(SMALL_K, 1, seed=5)[0]
        broken = AssociatedFrame(
            rgb_timestamp=noise.rgb_timestamp,
            depth_timestamp=noise.depth_timestamp,
            image=noise.image,
            depth=None,
        )
        with pytest.raises(ValueError, match="none is available"):
            run_sequence([plane, broken], SMALL_K)

    def test_estimated_frame_without_truth_gets_no_metrics(self):
        frames = render_sequence(SMALL_K, [Pose.identity()] * 2)
        unscored = AssociatedFrame(
            rgb_timestamp=frames[1].rgb_timestamp,
            depth_timestamp=frames[1].depth_timestamp,
            image=frames[1].image,
            depth=None,
        )
        report = run_sequence([frames[0], unscored], SMALL_K)
        last = report.frames[-1]
        assert not last.used_tof
        assert last.mre_percent is None
        assert last.hole_fraction == 0.0
        assert report.median_mre_percent is None


class TestRunSequenceValidation:
    def test_empty_sequence(self):
        with pytest.raises(ValueError, match="empty"):
            run_sequence([], SMALL_K)

    def test_first_frame_needs_depth(self):
        frame = render_sequence(SMALL_K, [Pose.identity()])[0]
        no_depth = AssociatedFrame(
            rgb_timestamp=frame.rgb_timestamp,
            depth_timestamp=frame.depth_timestamp,
            image=frame.image,
            depth=None,
        )
        with pytest.raises(ValueError, match="first frame"):
            run_sequence([no_depth], SMALL_K)

    def test_frame_size_must_match_intrinsics(self):
        frames = render_sequence(SMALL_K, [Pose.identity()] * 2)
        with pytest.raises(ValueError, match="does not match"):
            run_sequence(frames, FULL_K)

    def test_limit_truncates(self):
        frames = render_sequence(SMALL_K, [Pose.identity()] * 6)
        report = run_sequence(frames, SMALL_K, limit=3)
        assert len(report.frames) == 3
        assert report.duty_cycle_percent == pytest.approx(100.0 / 3.0)

    def test_on_frame_sees_every_decision(self):
        frames = _moving_frames(count=4)
        seen = []
        report = run_sequence(frames, SMALL_K, on_frame=lambda d, f: seen.append((d, f)))
        assert len(seen) == 4
        assert [d.record for d, _ in seen] == list(report.frames)
        assert np.array_equal(seen[0][0].depth_out, frames[0].depth)
        for (decision, frame), original in zip(seen, frames):
            assert frame is original
            assert decision.depth_out.shape == (SMALL_K.height, SMALL_K.width)


class TestSweepThreshold:
    def test_tradeoff_over_a_fast_sequence(self):
        # fast enough motion that a tight threshold visibly hurts the fit
        step = Pose.from_rotation_vector(np.radians(3.0) * AXIS, (0.04, 0.0, 0.0))
        frames = render_sequence(SMALL_K, accumulate_poses([step] * 6))
        thresholds = [0.25, 1.0, 4.0, 16.0]
        points = sweep_threshold(frames, SMALL_K, thresholds)
        assert [p.threshold for p in points] == thresholds
        duty = [p.duty_cycle_percent for p in points]
        assert all(a >= b for a, b in zip(duty, duty[1:]))
        # a strict inlier gate keeps too few samples and degrades accuracy
        assert points[2].median_mre_percent < points[0].median_mre_percent
