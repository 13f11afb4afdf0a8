"""
Projective 3x4 cameras.

A camera `C = (A | b)` maps a homogeneous space point `P` to the image point `C P`.
The 3x3 block `A` and the column `b` are exposed directly, since the range back-projection
and the ray-plane refinement are written in terms of them.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from pyxcal.errors import InvalidCameraError, PointAtInfinityError
from pyxcal.geom.homogeneous import HOMOGENEOUS_TOL, HPoint3, as_points3, canonical, homogeneous_distance

# Smallest admissible ratio of the third to the first singular value.
_RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CameraMatrix:
    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.shape != (3, 4):
            raise InvalidCameraError(f"a camera matrix is 3x4, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidCameraError("camera matrix entries must be finite")
        s = np.linalg.svd(m, compute_uv=False)
        if s[0] == 0 or s[2] / s[0] < _RANK_TOL:
            raise InvalidCameraError("camera matrix must have rank 3")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @classmethod
    def from_intrinsics(cls, K: np.ndarray, R: np.ndarray = None, t: np.ndarray = None) -> "CameraMatrix":
        """`K (R | t)`, with the identity pose by default."""
        R = np.eye(3) if R is None else np.asarray(R, dtype=float)
        t = np.zeros(3) if t is None else np.asarray(t, dtype=float).reshape(3)
        return cls(np.asarray(K, dtype=float) @ np.hstack([R, t[:, None]]))

    @property
    def A(self) -> np.ndarray:
        return self.entries[:, :3]

    @property
    def b(self) -> np.ndarray:
        return self.entries[:, 3]

    def a_inverse(self) -> np.ndarray:
        try:
            inv = scipy.linalg.inv(self.A)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise InvalidCameraError("the A block of the camera is singular") from e
        if not np.all(np.isfinite(inv)) or np.linalg.cond(self.A) > 1e14:
            raise InvalidCameraError("the A block of the camera is singular")
        return inv

    def centre(self) -> HPoint3:
        """The optical centre, the right null vector of the camera."""
        null = scipy.linalg.null_space(self.entries)
        return HPoint3(null[:, -1])

    def euclidean_centre(self) -> np.ndarray:
        return -self.a_inverse() @ self.b

    def project_homogeneous(self, points) -> np.ndarray:
        """Project `(N, 3|4)` points, returning `(N, 3)` homogeneous image points."""
        return as_points3(points) @ self.entries.T

    def project(self, points) -> np.ndarray:
        """Project `(N, 3|4)` points to `(N, 2)` pixels."""
        p = self.project_homogeneous(points)
        scale = np.linalg.norm(p, axis=1)
        if np.any(np.abs(p[:, 2]) <= 1e-15 * scale):
            raise PointAtInfinityError("a point projects to infinity")
        return p[:, :2] / p[:, 2:3]

    def depth(self, points) -> np.ndarray:
        """
        Signed depth of each point, positive in front of the camera (for a camera whose
        `A` block has a positive determinant).
        """
        P = as_points3(points)
        w = P @ self.entries[2]
        sign = np.sign(np.linalg.det(self.A))
        return sign * w / P[:, 3] / np.linalg.norm(self.A[2])

    def normalized(self) -> "CameraMatrix":
        """Unit Frobenius norm with canonical sign."""
        return CameraMatrix(canonical(self.entries))

    def equals(self, other: "CameraMatrix", tol: float = HOMOGENEOUS_TOL) -> bool:
        return homogeneous_distance(self.entries, other.entries) <= tol

    def __matmul__(self, other: Union[np.ndarray, "object"]) -> "CameraMatrix":
        # Composition with a 4x4 transform of space: C @ M maps points of the frame M maps from.
        matrix = getattr(other, "matrix", other)
        return CameraMatrix(self.entries @ np.asarray(matrix, dtype=float))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)
