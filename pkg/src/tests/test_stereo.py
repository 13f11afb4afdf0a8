import numpy as np
import pytest

from pyxcal.errors import DegenerateGeometryError, InsufficientDataError
from pyxcal.geom import CameraMatrix
from pyxcal.stereo import (
    Correspondence2D2D,
    ProjectiveFrame,
    cameras_from_fundamental,
    eight_point,
    estimate_fundamental_ransac,
    fundamental_from_cameras,
    ransac_iterations,
    sampson_distance,
    triangulate,
    triangulate_points,
)
from tests.conftest import random_scene_points


def project_pair(stereo_cameras, X):
    left, right = stereo_cameras
    return left.project(X), right.project(X)


def test_eight_point_exact(stereo_cameras, rng):
    X = random_scene_points(rng, 30)
    left, right = project_pair(stereo_cameras, X)
    F = eight_point(left, right)
    assert F.equals(fundamental_from_cameras(*stereo_cameras), tol=1e-6)
    assert np.allclose(sampson_distance(F, left, right), 0.0, atol=1e-6)
    assert np.allclose(F.entries @ F.epipole_left, 0.0, atol=1e-9)
    assert np.allclose(F.entries.T @ F.epipole_right, 0.0, atol=1e-9)


def test_eight_point_needs_eight_matches(stereo_cameras, rng):
    left, right = project_pair(stereo_cameras, random_scene_points(rng, 7))
    with pytest.raises(InsufficientDataError):
        eight_point(left, right)
    with pytest.raises(InsufficientDataError):
        estimate_fundamental_ransac((left, right))


@pytest.mark.parametrize("seed", range(20))
def test_ransac_rejects_outliers(stereo_cameras, seed):
    rng = np.random.default_rng(seed)
    X = random_scene_points(rng, 100)
    left, right = project_pair(stereo_cameras, X)
    outliers = rng.choice(100, size=30, replace=False)
    # The rig is rectified, so epipolar lines are rows; move outliers well off their row.
    shift = rng.uniform(20.0, 200.0, size=30) * rng.choice([-1.0, 1.0], size=30)
    right = right.copy()
    right[outliers, 1] += shift
    right[outliers, 0] += rng.uniform(-50.0, 50.0, size=30)
    inliers = np.ones(100, dtype=bool)
    inliers[outliers] = False

    F, mask = estimate_fundamental_ransac((left, right), threshold_px=1.0, seed=seed)
    assert mask[inliers].mean() >= 0.95
    assert not mask[outliers].any()
    assert F.equals(fundamental_from_cameras(*stereo_cameras), tol=1e-6)

    again, again_mask = estimate_fundamental_ransac((left, right), threshold_px=1.0, seed=seed)
    assert np.array_equal(again.entries, F.entries)
    assert np.array_equal(again_mask, mask)


def test_ransac_iterations():
    assert ransac_iterations(1.0, 8) == 1
    assert ransac_iterations(0.5, 8, 0.99) == 1177
    assert ransac_iterations(0.9, 3) < ransac_iterations(0.5, 3)


def test_triangulation_recovers_points(stereo_cameras, rng):
    X = random_scene_points(rng, 50)
    left, right = project_pair(stereo_cameras, X)
    P = triangulate_points(*stereo_cameras, left, right)
    assert np.allclose(P[:, 3], 1.0)
    assert np.allclose(P[:, :3], X, atol=1e-4)

    single = triangulate(*stereo_cameras, Correspondence2D2D(left[0], right[0]))
    assert np.allclose(single.euclidean(), X[0], atol=1e-4)


def test_triangulation_rejects_shared_centre(stereo_cameras):
    left, _ = stereo_cameras
    with pytest.raises(DegenerateGeometryError):
        triangulate_points(left, left, np.array([[800.0, 600.0]]), np.array([[800.0, 600.0]]))


def test_triangulation_rejects_points_on_the_baseline():
    K = np.array([[640.0, 0.0, 812.0], [0.0, 640.0, 612.0], [0.0, 0.0, 1.0]])
    front = CameraMatrix.from_intrinsics(K)
    behind = CameraMatrix.from_intrinsics(K, t=[0.0, 0.0, -500.0])
    X = np.array([[0.0, 0.0, 2000.0]])
    left, right = front.project(X), behind.project(X)
    assert np.allclose(left, right)
    with pytest.raises(DegenerateGeometryError):
        triangulate_points(front, behind, left, right)
    with pytest.raises(DegenerateGeometryError):
        triangulate(front, behind, (left[0], right[0]))


def test_projective_cameras_reproduce_the_images(stereo_cameras, rng):
    X = random_scene_points(rng, 40)
    left, right = project_pair(stereo_cameras, X)
    F = fundamental_from_cameras(*stereo_cameras)
    for frame in (ProjectiveFrame(), ProjectiveFrame(g=(0.1, -0.2, 0.3), gamma=2.0)):
        C_l, C_r = cameras_from_fundamental(F, frame)
        assert fundamental_from_cameras(C_l, C_r).equals(F, tol=1e-8)
        P = triangulate_points(C_l, C_r, left, right)
        assert np.allclose(C_l.project(P), left, atol=1e-5)
        assert np.allclose(C_r.project(P), right, atol=1e-5)


def test_fundamental_from_cameras_with_shared_centre():
    C = CameraMatrix(np.hstack([np.eye(3), np.zeros((3, 1))]))
    with pytest.raises(DegenerateGeometryError):
        fundamental_from_cameras(C, C)
