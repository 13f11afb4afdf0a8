"""
Transformations of 3-space: projective (`Homography3`), rigid (`RigidTransform3`) and
similarity (`Similarity3`) maps, all acting on homogeneous points from the left.

>>> import numpy as np
>>> from pyxcal.geom import Homography3, HPoint3, HPlane3, apply_homography, transform_plane
>>> H = Homography3.from_translation([10.0, 0.0, 0.0])
>>> apply_homography(H, HPoint3.from_euclidean([0, 0, 0])).euclidean()
array([10.,  0.,  0.])

Planes transform with the inverse transpose, so incidence is preserved:

>>> transform_plane(H, HPlane3.from_normal([1, 0, 0], 0.0)).coords
array([  1.,   0.,   0., -10.])
"""

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.linalg
from scipy.spatial.transform import Rotation

from pyxcal.errors import DegenerateScaleError, NotInvertibleError
from pyxcal.geom.homogeneous import HOMOGENEOUS_TOL, HPlane3, HPoint3, as_points3, canonical, homogeneous_distance

#: Orthonormality tolerance for rotation matrices supplied from outside.
ROTATION_TOL = 1e-12

# Largest condition number of a unit-norm 4x4 matrix still treated as invertible.
_MAX_CONDITION = 1e14


def _check_rotation(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"a rotation is 3x3, got shape {R.shape}")
    if np.abs(R.T @ R - np.eye(3)).max() > ROTATION_TOL or np.linalg.det(R) <= 0:
        raise ValueError("matrix is not a proper rotation")
    return R


@dataclass(frozen=True, eq=False)
class Homography3:
    """
    An invertible 4x4 projective transformation, defined up to scale.
    """
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"a space homography is 4x4, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NotInvertibleError("homography entries must be finite")
        n = np.linalg.norm(m)
        if n == 0:
            raise NotInvertibleError("the zero matrix is not a homography")
        cond = np.linalg.cond(m / n)
        if not np.isfinite(cond) or cond > _MAX_CONDITION:
            raise NotInvertibleError(f"homography is singular (condition number {cond:.3g})")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Homography3":
        return cls(np.eye(4))

    @classmethod
    def from_translation(cls, t: Sequence[float]) -> "Homography3":
        m = np.eye(4)
        m[:3, 3] = t
        return cls(m)

    @property
    def inverse(self) -> "Homography3":
        return Homography3(scipy.linalg.inv(self.matrix))

    def normalized(self) -> "Homography3":
        return Homography3(canonical(self.matrix))

    def apply(self, points) -> np.ndarray:
        """Map `(N, 3|4)` points, returning `(N, 4)` homogeneous points."""
        return as_points3(points) @ self.matrix.T

    def distance(self, other: Union["Homography3", np.ndarray]) -> float:
        """Unit-norm Frobenius distance, insensitive to the overall sign."""
        return homogeneous_distance(self.matrix, getattr(other, "matrix", other))

    def equals(self, other, tol: float = HOMOGENEOUS_TOL) -> bool:
        return self.distance(other) <= tol

    def __matmul__(self, other):
        if isinstance(other, (Homography3, RigidTransform3, Similarity3)):
            return Homography3(self.matrix @ other.matrix)
        return NotImplemented

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True, eq=False)
class RigidTransform3:
    """
    Rotation followed by translation, in millimetres. `G.apply(P)` is `R P + t`.
    """
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = _check_rotation(self.rotation).copy()
        t = np.array(self.translation, dtype=float).reshape(3)
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform3":
        return cls()

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "RigidTransform3":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4) or not np.allclose(m[3], [0, 0, 0, 1], atol=1e-12):
            raise ValueError("matrix is not a Euclidean 4x4 transform")
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def from_rotvec(cls, rotvec: Sequence[float], translation: Sequence[float]) -> "RigidTransform3":
        return cls(Rotation.from_rotvec(np.array(rotvec, dtype=float)).as_matrix(), translation)

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @property
    def inverse(self) -> "RigidTransform3":
        return RigidTransform3(self.rotation.T, -self.rotation.T @ self.translation)

    @property
    def rotvec(self) -> np.ndarray:
        return Rotation.from_matrix(np.array(self.rotation)).as_rotvec()

    def rotation_angle_deg(self) -> float:
        return float(np.degrees(np.linalg.norm(self.rotvec)))

    def difference(self, other: "RigidTransform3") -> tuple:
        """Rotation angle (degrees) and translation distance (mm) between two transforms."""
        delta = self.inverse @ other
        return delta.rotation_angle_deg(), float(np.linalg.norm(self.translation - other.translation))

    def apply(self, points) -> np.ndarray:
        return as_points3(points) @ self.matrix.T

    def as_homography(self) -> Homography3:
        return Homography3(self.matrix)

    def __matmul__(self, other):
        if isinstance(other, RigidTransform3):
            return RigidTransform3(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)
        if isinstance(other, (Homography3, Similarity3)):
            return Homography3(self.matrix @ other.matrix)
        return NotImplemented


@dataclass(frozen=True, eq=False)
class Similarity3:
    """
    `S = [[s R, t], [0, 1]]`, with the rotation held as a Rodrigues vector.
    """
    scale: float = 1.0
    rotvec: np.ndarray = field(default_factory=lambda: np.zeros(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise DegenerateScaleError(f"similarity scale must be positive, got {self.scale}")
        r = np.array(self.rotvec, dtype=float).reshape(3)
        t = np.array(self.translation, dtype=float).reshape(3)
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "rotvec", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def from_rotation(cls, scale: float, rotation: np.ndarray, translation: Sequence[float]) -> "Similarity3":
        return cls(scale, Rotation.from_matrix(_check_rotation(rotation)).as_rotvec(), translation)

    @property
    def rotation(self) -> np.ndarray:
        return Rotation.from_rotvec(np.array(self.rotvec)).as_matrix()

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.scale * self.rotation
        m[:3, 3] = self.translation
        return m

    @property
    def inverse(self) -> "Similarity3":
        R_inv = self.rotation.T
        return Similarity3(1.0 / self.scale, -self.rotvec, -(R_inv @ self.translation) / self.scale)

    def as_homography(self) -> Homography3:
        return Homography3(self.matrix)

    def apply(self, points) -> np.ndarray:
        return as_points3(points) @ self.matrix.T


def apply_homography(H: Union[Homography3, np.ndarray], P: Union[HPoint3, np.ndarray]):
    """
    `Q = H P`. Returns an `HPoint3` for an `HPoint3` argument and an `(N, 4)` array otherwise.
    """
    matrix = np.asarray(getattr(H, "matrix", H), dtype=float)
    if isinstance(P, HPoint3):
        return HPoint3(matrix @ P.coords)
    return as_points3(P) @ matrix.T


def transform_plane(H: Union[Homography3, np.ndarray], U: Union[HPlane3, np.ndarray]):
    """
    `V = H^-T U`, the image of the plane `U` under the point map `H`.
    """
    matrix = np.asarray(getattr(H, "matrix", H), dtype=float)
    if not isinstance(H, Homography3):
        H = Homography3(matrix)
    inv_t = scipy.linalg.inv(H.matrix).T
    if isinstance(U, HPlane3):
        return HPlane3(inv_t @ U.coords)
    return np.atleast_2d(np.asarray(U, dtype=float)) @ inv_t.T
