"""
Robust plane fitting under the radial noise model of a range camera, and ray-plane range
refinement.

Range noise perturbs a point along its visual ray, so the residual of a point with respect to
a plane `V` is the difference between its measured range and the range `rho_pi` at which its
ray meets `V`:

    rho_pi = (V_d^T A^-1 b - V4) / ((1 / alpha) V_d^T A^-1 q)

Perpendicular point-plane distances are available as a diagnostic.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from pyxcal.errors import (
    DegenerateDataError,
    EstimationError,
    GeometryError,
    NoConsensusError,
    PlaneBehindCameraError,
    RayParallelToPlaneError,
)
from pyxcal.geom import CameraMatrix, HPlane3, HPoint2, HPoint3, as_points3, dehomogenize
from pyxcal.optimize import LMConfig, levenberg_marquardt
from pyxcal.stereo.fundamental import ransac_iterations
from pyxcal.tof.backprojection import RangeSample, backproject, ray_directions

logger = logging.getLogger(__name__)

# Smallest |V_d . ray| for which a ray is considered to meet the plane.
_PARALLEL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FittedPlane:
    #: Plane scaled so that `|V_d| = 1`, with the camera on its negative side.
    plane: HPlane3
    inlier_mask: np.ndarray
    #: RMS radial residual of the inliers (mm).
    rms_radial_residual: float

    def __post_init__(self):
        mask = np.asarray(self.inlier_mask, dtype=bool).copy()
        mask.flags.writeable = False
        object.__setattr__(self, "inlier_mask", mask)
        if mask.sum() < 3:
            raise ValueError("a fitted plane needs at least three inliers")

    @property
    def inlier_count(self) -> int:
        return int(self.inlier_mask.sum())


def _oriented(normal: np.ndarray, offset: float, centre: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(normal)
    v = np.append(normal, offset) / n
    if v[:3] @ centre + v[3] > 0:
        v = -v
    return v


def _plane_ranges(v: np.ndarray, centre: np.ndarray, directions: np.ndarray) -> np.ndarray:
    # Range along each unit ray to the plane v; inf where the ray misses the plane.
    den = directions @ v[:3]
    num = -(v[:3] @ centre + v[3])
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = num / den
    return np.where((np.abs(den) > _PARALLEL_TOL) & (rho > 0), rho, np.inf)


def refine_ranges(camera: CameraMatrix, pixels, plane: HPlane3) -> Tuple[np.ndarray, np.ndarray]:
    """
    Range at which the ray of each pixel meets `plane`, and the corresponding `(N, 4)` points.
    """
    v = plane.normalized().coords
    centre, d = ray_directions(camera, pixels)
    den = d @ v[:3]
    if np.any(np.abs(den) < _PARALLEL_TOL):
        raise RayParallelToPlaneError("a visual ray is parallel to the plane")
    rho = -(v[:3] @ centre + v[3]) / den
    if np.any(rho <= 0):
        raise PlaneBehindCameraError("the plane lies behind the camera along a visual ray")
    Q = centre + rho[:, None] * d
    return rho, np.hstack([Q, np.ones((Q.shape[0], 1))])


def refine_range(camera: CameraMatrix, q: HPoint2, plane: HPlane3) -> Tuple[float, HPoint3]:
    """
    Closed-form range of the intersection of the ray through `q` with `plane`, and the
    back-projected point at that range, which lies on the plane.
    """
    A_inv = camera.a_inverse()
    qc = np.asarray(getattr(q, "coords", q), dtype=float)
    qc = qc / qc[2]
    v = plane.normalized().coords
    alpha = np.linalg.norm(A_inv @ qc)
    den = (v[:3] @ A_inv @ qc) / alpha
    if abs(den) < _PARALLEL_TOL:
        raise RayParallelToPlaneError("the visual ray is parallel to the plane")
    rho = float((v[:3] @ A_inv @ camera.b - v[3]) / den)
    if rho <= 0:
        raise PlaneBehindCameraError(f"the plane lies behind the camera (range {rho:.6g})")
    return rho, backproject(camera, RangeSample(HPoint2(qc), rho, max_range=np.inf))


def radial_residuals(plane: HPlane3, points, camera: CameraMatrix) -> np.ndarray:
    """
    `|rho - rho_pi|` for each point, where `rho` is its distance from the optical centre and
    `rho_pi` the range at which its ray meets the plane. Rays missing the plane give `inf`.
    """
    X = dehomogenize(as_points3(points))
    centre = camera.euclidean_centre()
    offsets = X - centre
    rho = np.linalg.norm(offsets, axis=1)
    d = offsets / rho[:, None]
    return np.abs(rho - _plane_ranges(plane.normalized().coords, centre, d))


def perpendicular_residuals(plane: HPlane3, points) -> np.ndarray:
    X = as_points3(points)
    v = plane.normalized().coords
    return np.abs(X @ v / X[:, 3])


def _plane_through(X: np.ndarray, centre: np.ndarray):
    normal = np.cross(X[1] - X[0], X[2] - X[0])
    scale = np.linalg.norm(X[1] - X[0]) * np.linalg.norm(X[2] - X[0])
    if scale == 0 or np.linalg.norm(normal) <= 1e-9 * scale:
        return None
    return _oriented(normal, -normal @ X[0], centre)


def _total_least_squares(X: np.ndarray, centre: np.ndarray) -> np.ndarray:
    mean = X.mean(axis=0)
    _, _, Vt = np.linalg.svd(X - mean)
    normal = Vt[2]
    return _oriented(normal, -normal @ mean, centre)


def _refine_radial(v0: np.ndarray, centre: np.ndarray, d: np.ndarray, rho: np.ndarray,
                   config: LMConfig) -> np.ndarray:
    # LM over a 2-parameter tangent update of the unit normal and the offset.
    n0 = v0[:3]
    e1 = np.cross(n0, [1.0, 0.0, 0.0] if abs(n0[0]) < 0.9 else [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n0, e1)

    def plane_of(x):
        n = n0 + x[0] * e1 + x[1] * e2
        n = n / np.linalg.norm(n)
        return np.append(n, x[2])

    def residuals(x):
        v = plane_of(x)
        den = d @ v[:3]
        if np.any(np.abs(den) < _PARALLEL_TOL):
            raise RayParallelToPlaneError("a visual ray is parallel to the plane")
        return rho + (v[:3] @ centre + v[3]) / den

    result = levenberg_marquardt(residuals, np.array([0.0, 0.0, v0[3]]), config)
    return _oriented(plane_of(result.x)[:3], plane_of(result.x)[3], centre)


def fit_plane_ransac(points,
                     camera: CameraMatrix,
                     threshold_mm: float = 15.0,
                     max_iters: int = 2000,
                     seed: Union[int, np.random.SeedSequence] = 0,
                     confidence: float = 0.99,
                     lm_config: LMConfig = None) -> FittedPlane:
    """
    Fit a plane to back-projected range points. Three-point samples are scored by radial
    residual; the best consensus set is refit by total least squares followed by
    Levenberg-Marquardt on the summed squared radial residuals, and the inliers are
    re-selected against the refit plane.
    """
    if threshold_mm <= 0:
        raise ValueError("threshold_mm must be positive")
    X = dehomogenize(as_points3(points))
    n = X.shape[0]
    if n < 3:
        raise DegenerateDataError(f"plane fitting needs at least three points, got {n}")
    s = np.linalg.svd(X - X.mean(axis=0), compute_uv=False)
    if s[0] == 0 or s[1] / s[0] < 1e-9:
        raise DegenerateDataError("the points are collinear")

    centre = camera.euclidean_centre()
    offsets = X - centre
    rho = np.linalg.norm(offsets, axis=1)
    d = offsets / rho[:, None]

    rng = np.random.Generator(np.random.Philox(seed))
    best_mask = None
    best_count = 0
    needed = max_iters
    i = 0
    while i < min(needed, max_iters):
        i += 1
        sample = rng.choice(n, size=3, replace=False)
        v = _plane_through(X[sample], centre)
        if v is None:
            continue
        mask = np.abs(rho - _plane_ranges(v, centre, d)) <= threshold_mm
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            needed = ransac_iterations(count / n, 3, confidence)

    if best_mask is None or best_count < 3:
        raise NoConsensusError("no plane is supported by three points")

    mask = best_mask
    v = _total_least_squares(X[mask], centre)
    for _ in range(3):
        try:
            v = _refine_radial(v, centre, d[mask], rho[mask], lm_config)
        except (EstimationError, GeometryError) as e:
            logger.debug(f"radial plane refinement skipped: {e}")
        new_mask = np.abs(rho - _plane_ranges(v, centre, d)) <= threshold_mm
        if new_mask.sum() < 3 or np.array_equal(new_mask, mask):
            break
        mask = new_mask
    mask = np.abs(rho - _plane_ranges(v, centre, d)) <= threshold_mm
    if mask.sum() < 3:
        raise NoConsensusError("the refit plane lost its consensus set")
    residuals = rho[mask] - _plane_ranges(v, centre, d[mask])
    rms = float(np.sqrt(np.mean(residuals ** 2)))
    logger.debug(f"plane RANSAC: {int(mask.sum())}/{n} inliers after {i} samples, rms {rms:.4g} mm")
    return FittedPlane(HPlane3(v), mask, rms)
