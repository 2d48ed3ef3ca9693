import numpy as np
import pytest

from oracles import denoise_staged
from spatialqa.geometry import DenoiseConfig, Frame, FrameError, PointCloud, denoise_pipeline


def blob(rng, center, n, scale=0.02):
    return np.asarray(center) + rng.normal(scale=scale, size=(n, 3))


class TestStagedOracle:
    def test_matches_oracle_composition_exactly(self):
        config = DenoiseConfig()
        for seed in range(15):
            rng = np.random.default_rng(seed)
            points = np.vstack(
                [
                    blob(rng, [0.0, 3.0, 0.5], 120),
                    blob(rng, [2.0, 3.0, 0.5], 40),
                    rng.uniform(-4.0, 4.0, size=(12, 3)),
                ]
            )
            got = denoise_pipeline(PointCloud(points, Frame.CANONICAL), config)
            expected = denoise_staged(points, config)
            if expected is None:
                assert got is None
            else:
                np.testing.assert_array_equal(got.points, expected)

    def test_outlier_removed_before_clustering(self):
        # Scale is measured on the raw cloud by design, so the stray point
        # is kept modest: far enough for outlier removal, close enough not
        # to distort the voxel size.
        rng = np.random.default_rng(7)
        points = np.vstack([blob(rng, [0.0, 2.0, 0.0], 60), [[0.5, 2.0, 0.0]]])
        out = denoise_pipeline(PointCloud(points, Frame.CANONICAL))
        assert out is not None
        assert (np.abs(out.points[:, 0]) < 0.3).all()


class TestSelection:
    def test_largest_cluster_kept(self):
        rng = np.random.default_rng(1)
        big = blob(rng, [0.0, 2.0, 0.0], 150)
        small = blob(rng, [3.0, 2.0, 0.0], 40)
        out = denoise_pipeline(PointCloud(np.vstack([big, small]), Frame.CANONICAL))
        assert out is not None
        assert (np.abs(out.points[:, 0]) < 1.0).all()

    def test_tiny_object_rejected(self):
        rng = np.random.default_rng(2)
        out = denoise_pipeline(PointCloud(blob(rng, [0.0, 2.0, 0.0], 8), Frame.CANONICAL))
        assert out is None

    def test_pure_noise_rejected(self):
        rng = np.random.default_rng(3)
        # Spread far wider than dbscan_eps so no point gathers min_points.
        out = denoise_pipeline(PointCloud(rng.uniform(-50.0, 50.0, size=(40, 3)), Frame.CANONICAL))
        assert out is None

    def test_empty_cloud_rejected(self):
        out = denoise_pipeline(PointCloud(np.zeros((0, 3)), Frame.CANONICAL))
        assert out is None

    def test_camera_frame_rejected(self):
        with pytest.raises(FrameError):
            denoise_pipeline(PointCloud(np.zeros((1, 3)), Frame.CAMERA))

    def test_survivors_are_canonical(self):
        rng = np.random.default_rng(4)
        out = denoise_pipeline(PointCloud(blob(rng, [0.0, 2.0, 0.0], 100), Frame.CANONICAL))
        assert out is not None
        assert out.frame is Frame.CANONICAL
        assert len(out) >= DenoiseConfig().min_surviving_points
