import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import sor_keep_mask, voxel_centroids
from spatialqa.errors import EmptyCloudError, FrameError, InputShapeError
from spatialqa.geometry import (
    Aabb,
    CameraIntrinsics,
    DepthRaster,
    Frame,
    GravityPose,
    InstanceMask,
    PointCloud,
    backproject,
    canonicalize,
    fit_aabb,
    remove_statistical_outliers,
    rotation_from_gravity,
    voxel_downsample,
)
from spatialqa.synthetic import ground_plane_camera_cloud

pitches = st.floats(min_value=-math.pi / 2, max_value=math.pi / 2, allow_nan=False)
rolls = st.floats(min_value=-math.pi + 1e-9, max_value=math.pi, allow_nan=False)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def cloud_from_seed(seed: int, n: int, spread: float = 2.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.normal(scale=spread, size=(n, 3))


class TestBackproject:
    def test_single_pixel_arithmetic(self):
        # (u - cx) * d / fx by hand: (820 - 320) * 2 / 500 = 2.0
        values = np.zeros((241, 821))
        values[240, 820] = 2.0
        depth = DepthRaster(width=821, height=241, values=values)
        intr = CameraIntrinsics(fx=500.0, fy=400.0, cx=320.0, cy=240.0)
        cloud = backproject(depth, intr)
        assert cloud.frame is Frame.CAMERA
        np.testing.assert_allclose(cloud.points, [[2.0, 0.0, 2.0]])

    def test_principal_point_lands_on_axis(self):
        values = np.full((3, 3), 2.0)
        depth = DepthRaster(3, 3, values)
        intr = CameraIntrinsics(fx=10.0, fy=10.0, cx=1.0, cy=1.0)
        cloud = backproject(depth, intr)
        np.testing.assert_allclose(cloud.points[4], [0.0, 0.0, 2.0])

    def test_row_major_traversal(self):
        values = np.array([[1.0, 2.0], [3.0, 4.0]])
        depth = DepthRaster(2, 2, values)
        intr = CameraIntrinsics(fx=1.0, fy=1.0, cx=0.0, cy=0.0)
        cloud = backproject(depth, intr)
        np.testing.assert_allclose(cloud.points[:, 2], [1.0, 2.0, 3.0, 4.0])
        # x = u * d, y = v * d with unit focal lengths and zero principal point
        np.testing.assert_allclose(cloud.points[:, 0], [0.0, 2.0, 0.0, 4.0])
        np.testing.assert_allclose(cloud.points[:, 1], [0.0, 0.0, 3.0, 4.0])

    def test_invalid_depths_skipped(self):
        values = np.array([[1.0, 0.0], [-2.0, np.nan], [np.inf, 3.0]])
        depth = DepthRaster(2, 3, values)
        intr = CameraIntrinsics(fx=1.0, fy=1.0, cx=0.0, cy=0.0)
        cloud = backproject(depth, intr)
        np.testing.assert_allclose(cloud.points[:, 2], [1.0, 3.0])

    def test_mask_selects_foreground_only(self):
        values = np.full((2, 2), 5.0)
        depth = DepthRaster(2, 2, values)
        mask = InstanceMask.encode(np.array([[0, 1], [0, 0]]), label="thing", instance_id=0)
        intr = CameraIntrinsics(fx=1.0, fy=1.0, cx=0.0, cy=0.0)
        cloud = backproject(depth, intr, mask)
        np.testing.assert_allclose(cloud.points, [[5.0, 0.0, 5.0]])

    def test_mask_shape_mismatch_rejected(self):
        depth = DepthRaster(2, 2, np.ones((2, 2)))
        mask = InstanceMask.encode(np.ones((3, 3), dtype=np.uint8), label="x", instance_id=0)
        with pytest.raises(InputShapeError):
            backproject(depth, CameraIntrinsics(1.0, 1.0, 0.0, 0.0), mask)

    def test_all_invalid_gives_empty_camera_cloud(self):
        cloud = backproject(DepthRaster(2, 2, np.zeros((2, 2))), CameraIntrinsics(1.0, 1.0, 0.0, 0.0))
        assert len(cloud) == 0
        assert cloud.frame is Frame.CAMERA


class TestRotationFromGravity:
    def test_level_pose_permutes_axes(self):
        r = rotation_from_gravity(GravityPose(0.0, 0.0))
        np.testing.assert_allclose(r @ [1.0, 0.0, 0.0], [1.0, 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(r @ [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(r @ [0.0, 1.0, 0.0], [0.0, 0.0, -1.0], atol=1e-15)

    def test_straight_down_maps_forward_to_minus_z(self):
        r = rotation_from_gravity(GravityPose(pitch=-math.pi / 2, roll=0.0))
        np.testing.assert_allclose(r @ [0.0, 0.0, 1.0], [0.0, 0.0, -1.0], atol=1e-15)

    def test_straight_up_maps_forward_to_plus_z(self):
        r = rotation_from_gravity(GravityPose(pitch=math.pi / 2, roll=0.0))
        np.testing.assert_allclose(r @ [0.0, 0.0, 1.0], [0.0, 0.0, 1.0], atol=1e-15)

    def test_quarter_roll_tips_camera_x(self):
        r = rotation_from_gravity(GravityPose(pitch=0.0, roll=math.pi / 2))
        np.testing.assert_allclose(r @ [1.0, 0.0, 0.0], [0.0, 0.0, -1.0], atol=1e-15)

    @given(pitch=pitches, roll=rolls)
    @settings(max_examples=200)
    def test_always_orthonormal(self, pitch, roll):
        r = rotation_from_gravity(GravityPose(pitch, roll))
        assert np.abs(r.T @ r - np.eye(3)).max() < 1e-12
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)

    @given(pitch=pitches, roll=rolls, seed=seeds)
    @settings(max_examples=50)
    def test_ground_plane_lands_level(self, pitch, roll, seed):
        pose = GravityPose(pitch, roll)
        rng = np.random.default_rng(seed)
        cam = ground_plane_camera_cloud(pose, camera_height=1.5, count=64, rng=rng)
        canonical = canonicalize(cam, rotation_from_gravity(pose))
        assert canonical.points[:, 2].std() < 1e-9
        np.testing.assert_allclose(canonical.points[:, 2], -1.5, atol=1e-6)

    def test_pose_validation(self):
        with pytest.raises(ValueError):
            GravityPose(pitch=2.0, roll=0.0)
        with pytest.raises(ValueError):
            GravityPose(pitch=0.0, roll=4.0)


class TestCanonicalize:
    def test_rejects_non_camera_frame(self):
        cloud = PointCloud(np.zeros((1, 3)), Frame.CANONICAL)
        with pytest.raises(FrameError):
            canonicalize(cloud, np.eye(3))

    @given(pitch=pitches, roll=rolls, seed=seeds)
    @settings(max_examples=50)
    def test_is_an_isometry(self, pitch, roll, seed):
        points = cloud_from_seed(seed, 32)
        rotated = canonicalize(PointCloud(points, Frame.CAMERA), rotation_from_gravity(GravityPose(pitch, roll)))
        assert rotated.frame is Frame.CANONICAL
        np.testing.assert_allclose(
            np.linalg.norm(rotated.points, axis=1), np.linalg.norm(points, axis=1), rtol=1e-12
        )


class TestRemoveStatisticalOutliers:
    def test_matches_brute_force_oracle(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(5, 120))
            points = rng.normal(scale=2.0, size=(n, 3))
            kept = remove_statistical_outliers(PointCloud(points, Frame.CAMERA), 10, 1.2)
            expected = points[sor_keep_mask(points, 10, 1.2)]
            np.testing.assert_array_equal(kept.points, expected)

    def test_far_outlier_dropped(self):
        rng = np.random.default_rng(3)
        blob = rng.normal(scale=0.05, size=(25, 3))
        points = np.vstack([blob, [[10.0, 10.0, 10.0]]])
        kept = remove_statistical_outliers(PointCloud(points, Frame.CANONICAL), 10, 1.2)
        assert len(kept) == 25
        np.testing.assert_array_equal(kept.points, blob)

    def test_small_cloud_passes_through(self):
        points = np.arange(30.0).reshape(10, 3)
        kept = remove_statistical_outliers(PointCloud(points, Frame.CAMERA), 10, 1.2)
        np.testing.assert_array_equal(kept.points, points)

    def test_preserves_frame(self):
        points = np.random.default_rng(0).normal(size=(40, 3))
        kept = remove_statistical_outliers(PointCloud(points, Frame.CANONICAL), 5, 2.0)
        assert kept.frame is Frame.CANONICAL


class TestVoxelDownsample:
    def test_single_voxel_collapses_to_mean(self):
        rng = np.random.default_rng(11)
        points = rng.uniform(0.0, 0.99, size=(1000, 3))
        out = voxel_downsample(PointCloud(points, Frame.CANONICAL), 1.0)
        assert len(out) == 1
        np.testing.assert_allclose(out.points[0], points.mean(axis=0), rtol=1e-12)

    def test_first_seen_voxel_order(self):
        points = np.array(
            [
                [1.6, 0.0, 0.0],  # voxel 1
                [0.4, 0.0, 0.0],  # voxel 0
                [1.2, 0.0, 0.0],  # voxel 1 again
            ]
        )
        out = voxel_downsample(PointCloud(points, Frame.CANONICAL), 1.0)
        np.testing.assert_allclose(out.points[:, 0], [1.4, 0.4])

    def test_negative_coordinates_floor_to_own_voxel(self):
        points = np.array([[-0.1, 0.0, 0.0], [0.1, 0.0, 0.0]])
        out = voxel_downsample(PointCloud(points, Frame.CANONICAL), 1.0)
        assert len(out) == 2

    def test_matches_dict_oracle(self):
        for seed in range(10):
            points = cloud_from_seed(seed, 200)
            out = voxel_downsample(PointCloud(points, Frame.CANONICAL), 0.5)
            np.testing.assert_allclose(out.points, voxel_centroids(points, 0.5), rtol=1e-12)

    def test_rejects_non_positive_size(self):
        with pytest.raises(ValueError):
            voxel_downsample(PointCloud(np.zeros((1, 3)), Frame.CAMERA), 0.0)

    def test_empty_cloud_passthrough(self):
        out = voxel_downsample(PointCloud(np.zeros((0, 3)), Frame.CAMERA), 0.5)
        assert len(out) == 0

    @given(seed=seeds, n=st.integers(min_value=1, max_value=300))
    @settings(max_examples=40)
    def test_never_grows_and_stays_inside_hull_box(self, seed, n):
        points = cloud_from_seed(seed, n)
        out = voxel_downsample(PointCloud(points, Frame.CANONICAL), 0.7)
        assert 1 <= len(out) <= n
        assert (out.points >= points.min(axis=0) - 1e-12).all()
        assert (out.points <= points.max(axis=0) + 1e-12).all()


class TestAabb:
    def test_fit_covers_every_point(self):
        points = cloud_from_seed(5, 50)
        box = fit_aabb(PointCloud(points, Frame.CANONICAL))
        assert (points >= np.array(box.min_corner) - 1e-15).all()
        assert (points <= np.array(box.max_corner) + 1e-15).all()
        np.testing.assert_allclose(box.min_corner, points.min(axis=0))
        np.testing.assert_allclose(box.max_corner, points.max(axis=0))

    def test_extents_and_volume(self):
        box = Aabb((0.0, 0.0, 0.0), (1.0, 2.0, 3.0))
        np.testing.assert_allclose(box.extents(), (1.0, 2.0, 3.0))
        assert box.volume() == pytest.approx(6.0)

    def test_empty_cloud_rejected(self):
        with pytest.raises(EmptyCloudError):
            fit_aabb(PointCloud(np.zeros((0, 3)), Frame.CANONICAL))

    def test_camera_frame_rejected(self):
        with pytest.raises(FrameError):
            fit_aabb(PointCloud(np.zeros((1, 3)), Frame.CAMERA))

    def test_inverted_corners_rejected(self):
        with pytest.raises(ValueError):
            Aabb((1.0, 0.0, 0.0), (0.0, 1.0, 1.0))
