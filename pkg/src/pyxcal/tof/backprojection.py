"""
Back-projection of range samples.

A range camera reports, for pixel `q = (x, y, 1)`, the radial distance `rho` from its optical
centre to the scene along the visual ray of `q`. With `C = (A | b)` the point is

    Q_d = A^-1 ((rho / alpha) q - b),   alpha = |A^-1 q|.

>>> import numpy as np
>>> from pyxcal.geom import CameraMatrix
>>> from pyxcal.tof import RangeSample, backproject
>>> camera = CameraMatrix(np.hstack([np.diag([200.0, 200.0, 1.0]), np.zeros((3, 1))]))
>>> backproject(camera, RangeSample.at(200.0, 0.0, 1000.0)).euclidean()
array([707.10678119,   0.        , 707.10678119])
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from pyxcal.geom import CameraMatrix, HPoint2, HPoint3, as_pixels, as_points3, dehomogenize

#: Largest range a sample may report, in millimetres.
DEFAULT_MAX_RANGE_MM = 5000.0


@dataclass(frozen=True, eq=False)
class RangeSample:
    pixel: HPoint2
    range: float
    max_range: float = DEFAULT_MAX_RANGE_MM

    def __post_init__(self):
        pixel = self.pixel if isinstance(self.pixel, HPoint2) else HPoint2(np.asarray(self.pixel, dtype=float))
        if not pixel.is_finite:
            raise ValueError("range sample pixels must be finite")
        object.__setattr__(self, "pixel", HPoint2(pixel.coords / pixel.coords[2]))
        if not np.isfinite(self.range) or self.range <= 0:
            raise ValueError(f"range must be positive, got {self.range}")
        if self.range > self.max_range:
            raise ValueError(f"range {self.range} exceeds the sensor maximum {self.max_range}")

    @classmethod
    def at(cls, x: float, y: float, rho: float, max_range: float = DEFAULT_MAX_RANGE_MM) -> "RangeSample":
        return cls(HPoint2(np.array([x, y, 1.0])), float(rho), max_range)


def ray_directions(camera: CameraMatrix, pixels) -> Tuple[np.ndarray, np.ndarray]:
    """
    Optical centre `-A^-1 b` and the unit direction `A^-1 q / alpha` of each pixel's ray.
    """
    A_inv = camera.a_inverse()
    q = np.hstack([as_pixels(pixels), np.ones((len(pixels), 1))])
    d = q @ A_inv.T
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return -A_inv @ camera.b, d


def backproject_array(camera: CameraMatrix, pixels, ranges) -> np.ndarray:
    """
    Back-project `N` pixels with their ranges, returning `(N, 4)` points with `P4 = 1`.
    """
    centre, d = ray_directions(camera, pixels)
    ranges = np.asarray(ranges, dtype=float).reshape(-1, 1)
    Q = centre + ranges * d
    return np.hstack([Q, np.ones((Q.shape[0], 1))])


def backproject(camera: CameraMatrix, sample: RangeSample) -> HPoint3:
    A_inv = camera.a_inverse()
    q = sample.pixel.coords
    alpha = np.linalg.norm(A_inv @ q)
    Q = A_inv @ ((sample.range / alpha) * q - camera.b)
    return HPoint3.from_euclidean(Q)


def point_ranges(camera: CameraMatrix, points) -> np.ndarray:
    """Radial distance of each point from the optical centre."""
    return np.linalg.norm(dehomogenize(as_points3(points)) - camera.euclidean_centre(), axis=1)
