import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from pyxcal.errors import DegenerateDataError, PlaneBehindCameraError, RayParallelToPlaneError
from pyxcal.geom import HPlane3, HPoint2
from pyxcal.tof import (
    RangeSample,
    backproject,
    backproject_array,
    fit_plane_ransac,
    perpendicular_residuals,
    point_ranges,
    radial_residuals,
    refine_range,
    refine_ranges,
)


def tof_pixels(rng, n):
    return np.column_stack([rng.uniform(5, 170, n), rng.uniform(5, 138, n)])


def tilted_plane(angle_deg=20.0, distance=2500.0) -> HPlane3:
    normal = Rotation.from_euler("x", angle_deg, degrees=True).apply([0.0, 0.0, 1.0])
    return HPlane3.from_normal(normal, -distance)


def test_backprojection_keeps_range_and_pixel(tof_camera, rng):
    pixels = tof_pixels(rng, 50)
    ranges = rng.uniform(500, 5000, 50)
    Q = backproject_array(tof_camera, pixels, ranges)
    assert np.allclose(point_ranges(tof_camera, Q), ranges)
    assert np.allclose(tof_camera.project(Q), pixels)

    single = backproject(tof_camera, RangeSample.at(*pixels[0], ranges[0]))
    assert np.allclose(single.euclidean(), Q[0, :3])


def test_range_sample_validation():
    with pytest.raises(ValueError):
        RangeSample.at(10.0, 10.0, 0.0)
    with pytest.raises(ValueError):
        RangeSample.at(10.0, 10.0, 6000.0)
    with pytest.raises(ValueError):
        RangeSample(HPoint2([1.0, 1.0, 0.0]), 100.0)


def test_refined_points_lie_on_the_plane(tof_camera, rng):
    plane = tilted_plane()
    pixels = tof_pixels(rng, 40)
    rho, Q = refine_ranges(tof_camera, pixels, plane)
    assert np.allclose(perpendicular_residuals(plane, Q), 0.0, atol=1e-8)
    assert np.allclose(point_ranges(tof_camera, Q), rho)
    assert np.allclose(tof_camera.project(Q), pixels)

    r0, Q0 = refine_range(tof_camera, HPoint2.from_pixel(pixels[0]), plane)
    assert np.isclose(r0, rho[0])
    assert plane.contains(Q0, tol=1e-9)


def test_refine_range_failures(tof_camera):
    centre = np.array([[88.0, 72.0]])
    with pytest.raises(PlaneBehindCameraError):
        refine_ranges(tof_camera, centre, HPlane3.from_normal([0.0, 0.0, 1.0], 1000.0))
    with pytest.raises(RayParallelToPlaneError):
        refine_ranges(tof_camera, centre, HPlane3.from_normal([1.0, 0.0, 0.0], -500.0))


def test_refine_range_is_idempotent(tof_camera, rng):
    plane = tilted_plane()
    for pixel in tof_pixels(rng, 10):
        rho, Q = refine_range(tof_camera, HPoint2.from_pixel(pixel), plane)
        q = HPoint2.from_pixel(tof_camera.project(Q.coords[None, :])[0])
        again, Q_again = refine_range(tof_camera, q, plane)
        assert np.isclose(again, rho, rtol=1e-12)
        assert Q_again.equals(Q, tol=1e-12)


def test_radial_residuals(tof_camera, rng):
    plane = tilted_plane()
    pixels = tof_pixels(rng, 20)
    rho, _ = refine_ranges(tof_camera, pixels, plane)
    offsets = rng.normal(0, 20, 20)
    Q = backproject_array(tof_camera, pixels, rho + offsets)
    assert np.allclose(radial_residuals(plane, Q, tof_camera), np.abs(offsets))


@pytest.mark.parametrize("seed", range(20))
def test_plane_ransac_with_outliers(tof_camera, seed):
    rng = np.random.default_rng(seed)
    plane = tilted_plane(25.0, 2500.0)
    n = 200
    pixels = tof_pixels(rng, n)
    rho, _ = refine_ranges(tof_camera, pixels, plane)
    measured = rho + rng.normal(0, 3.0, n)
    outliers = rng.choice(n, size=60, replace=False)
    measured[outliers] += rng.uniform(50.0, 300.0, 60) * rng.choice([-1.0, 1.0], 60)
    Q = backproject_array(tof_camera, pixels, measured)

    fitted = fit_plane_ransac(Q, tof_camera, threshold_mm=15.0, seed=seed)
    normal = fitted.plane.normalized().delta
    angle = np.degrees(np.arccos(min(1.0, abs(normal @ plane.delta))))
    assert angle < 0.5
    assert not fitted.inlier_mask[outliers].any()
    assert fitted.inlier_count >= 0.95 * (n - 60)
    assert fitted.rms_radial_residual < 5.0
    # The camera is on the negative side of the fitted plane.
    assert fitted.plane.normalized().offset < 0

    again = fit_plane_ransac(Q, tof_camera, threshold_mm=15.0, seed=seed)
    assert np.array_equal(again.inlier_mask, fitted.inlier_mask)


def test_plane_ransac_degenerate_input(tof_camera):
    line = np.column_stack([np.linspace(-100, 100, 10), np.zeros(10), np.full(10, 2000.0)])
    with pytest.raises(DegenerateDataError):
        fit_plane_ransac(line, tof_camera)
    with pytest.raises(DegenerateDataError):
        fit_plane_ransac(line[:2], tof_camera)
    with pytest.raises(ValueError):
        fit_plane_ransac(line, tof_camera, threshold_mm=0.0)
