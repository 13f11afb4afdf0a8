"""
Homogeneous points and planes, and the small set of linear operators built on them.

Points `P = (P_d, P4)` and planes `U = (U_d, U4)` are 4-vectors defined up to a non-zero scale.
Image points are 3-vectors. Euclidean units are millimetres, image units are pixels.
Functions accept the typed values below or plain arrays, with one point per row:

>>> from pyxcal.geom import HPoint3, wedge
>>> Q = HPoint3.from_euclidean([1.0, 2.0, 3.0])
>>> wedge(Q) @ Q.coords
array([0., 0., 0., 0., 0., 0.])
"""

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from pyxcal.errors import DegenerateScaleError, PointAtInfinityError

#: Residual norm below which two unit-normalized homogeneous vectors are declared equal.
HOMOGENEOUS_TOL = 1e-8

# Relative size of the last coordinate below which a point is treated as lying at infinity.
_INFINITY_EPS = 1e-15


def canonical(v: np.ndarray) -> np.ndarray:
    """
    Scale a homogeneous vector (or matrix) to unit norm, with the largest-magnitude entry positive.
    """
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise DegenerateScaleError("cannot normalize a zero vector")
    v = v / n
    flat = v.ravel()
    if flat[np.argmax(np.abs(flat))] < 0:
        v = -v
    return v


def homogeneous_distance(a: np.ndarray, b: np.ndarray) -> float:
    """
    Distance between two homogeneous quantities after unit normalization, minimized over the sign.
    Matrices are compared entrywise, which is the unit-norm Frobenius distance.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def homogeneous_equal(a: np.ndarray, b: np.ndarray, tol: float = HOMOGENEOUS_TOL) -> bool:
    return homogeneous_distance(a, b) <= tol


class _Homogeneous:
    coords: np.ndarray
    _size = 0

    def __post_init__(self):
        arr = np.array(self.coords, dtype=float).reshape(-1)
        if arr.shape != (self._size,):
            raise ValueError(f"{type(self).__name__} needs {self._size} coordinates, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{type(self).__name__} coordinates must be finite")
        if not np.any(arr):
            raise ValueError(f"{type(self).__name__} coordinates cannot all be zero")
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)

    def equals(self, other, tol: float = HOMOGENEOUS_TOL) -> bool:
        return homogeneous_equal(self.coords, np.asarray(getattr(other, "coords", other)), tol)

    def canonical(self):
        return type(self)(canonical(self.coords))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(f'{x:.6g}' for x in self.coords)})"


@dataclass(frozen=True, eq=False, repr=False)
class HPoint2(_Homogeneous):
    """
    Homogeneous image point `(x, y, w)`; pixels once divided by `w`.
    """
    coords: np.ndarray
    _size = 3

    @classmethod
    def from_pixel(cls, xy: Sequence[float]) -> "HPoint2":
        return cls(np.array([xy[0], xy[1], 1.0]))

    @property
    def is_finite(self) -> bool:
        return abs(self.coords[2]) > _INFINITY_EPS * np.linalg.norm(self.coords)

    def pixel(self) -> np.ndarray:
        if not self.is_finite:
            raise PointAtInfinityError(f"{self} has no pixel coordinates")
        return self.coords[:2] / self.coords[2]


@dataclass(frozen=True, eq=False, repr=False)
class HPoint3(_Homogeneous):
    """
    Homogeneous space point `(P_d, P4)`. When `P4 = 1`, `P_d` holds coordinates in millimetres.
    """
    coords: np.ndarray
    _size = 4

    @classmethod
    def from_euclidean(cls, xyz: Sequence[float]) -> "HPoint3":
        return cls(np.array([xyz[0], xyz[1], xyz[2], 1.0]))

    @property
    def delta(self) -> np.ndarray:
        return self.coords[:3]

    @property
    def w(self) -> float:
        return float(self.coords[3])

    @property
    def is_finite(self) -> bool:
        return abs(self.coords[3]) > _INFINITY_EPS * np.linalg.norm(self.coords)

    def euclidean(self) -> np.ndarray:
        if not self.is_finite:
            raise PointAtInfinityError(f"{self} is a point at infinity")
        return self.coords[:3] / self.coords[3]


@dataclass(frozen=True, eq=False, repr=False)
class HPlane3(_Homogeneous):
    """
    Homogeneous plane `(U_d, U4)`. With `|U_d| = 1`, `U_d` is the unit normal and `U4` the signed
    perpendicular distance from the origin.
    """
    coords: np.ndarray
    _size = 4

    @classmethod
    def from_normal(cls, normal: Sequence[float], offset: float) -> "HPlane3":
        return cls(np.array([normal[0], normal[1], normal[2], offset]))

    @property
    def delta(self) -> np.ndarray:
        return self.coords[:3]

    @property
    def offset(self) -> float:
        return float(self.coords[3])

    def normalized(self) -> "HPlane3":
        """Scale so that the normal has unit length."""
        n = np.linalg.norm(self.coords[:3])
        if n == 0:
            raise DegenerateScaleError("the plane at infinity has no Euclidean normal")
        return HPlane3(self.coords / n)

    def contains(self, point: Union["HPoint3", np.ndarray], tol: float = 1e-9) -> bool:
        p = np.asarray(getattr(point, "coords", point), dtype=float)
        u = self.normalized().coords
        return abs(u @ (p / p[3])) <= tol * max(1.0, np.linalg.norm(p[:3] / p[3]))


# --------------------------------------
# Array conversions.

def as_points3(points) -> np.ndarray:
    """
    Stack space points into an `(N, 4)` array. Accepts `HPoint3` sequences, `(N, 3)` Euclidean
    arrays and `(N, 4)` homogeneous arrays.
    """
    if isinstance(points, HPoint3):
        return points.coords[None, :].copy()
    if len(points) > 0 and isinstance(points[0], HPoint3):
        return np.stack([p.coords for p in points])
    arr = np.atleast_2d(np.asarray(points, dtype=float))
    if arr.shape[1] == 3:
        return np.hstack([arr, np.ones((arr.shape[0], 1))])
    if arr.shape[1] != 4:
        raise ValueError(f"expected (N, 3) or (N, 4) points, got shape {arr.shape}")
    return arr


def as_points2(points) -> np.ndarray:
    """Stack image points into an `(N, 3)` homogeneous array."""
    if isinstance(points, HPoint2):
        return points.coords[None, :].copy()
    if len(points) > 0 and isinstance(points[0], HPoint2):
        return np.stack([p.coords for p in points])
    arr = np.atleast_2d(np.asarray(points, dtype=float))
    if arr.shape[1] == 2:
        return np.hstack([arr, np.ones((arr.shape[0], 1))])
    if arr.shape[1] != 3:
        raise ValueError(f"expected (N, 2) or (N, 3) image points, got shape {arr.shape}")
    return arr


def dehomogenize(points: np.ndarray) -> np.ndarray:
    """Divide by the last coordinate, raising for points at infinity."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    last = points[:, -1]
    if np.any(np.abs(last) <= _INFINITY_EPS * np.linalg.norm(points, axis=1)):
        raise PointAtInfinityError("cannot dehomogenize a point at infinity")
    return points[:, :-1] / last[:, None]


def as_pixels(points) -> np.ndarray:
    """Inhomogeneous `(N, 2)` pixel coordinates."""
    if isinstance(points, np.ndarray) and points.ndim == 2 and points.shape[1] == 2:
        return points.astype(float)
    return dehomogenize(as_points2(points))


# --------------------------------------
# Operators.

def inhomog_distance(p: Union[HPoint2, np.ndarray], q: Union[HPoint2, np.ndarray]) -> float:
    """
    `D(p, q) = |p_d / p3 - q_d / q3|`, the pixel distance between two homogeneous image points.
    """
    p = np.asarray(getattr(p, "coords", p), dtype=float)
    q = np.asarray(getattr(q, "coords", q), dtype=float)
    a = dehomogenize(p[None, :])[0]
    b = dehomogenize(q[None, :])[0]
    return float(np.linalg.norm(a - b))


def cross_matrix(u: Sequence[float]) -> np.ndarray:
    """The antisymmetric matrix `(u)_x` with `(u)_x v = u x v`."""
    u = np.asarray(u, dtype=float).reshape(3)
    return np.array([
        [0.0, -u[2], u[1]],
        [u[2], 0.0, -u[0]],
        [-u[1], u[0], 0.0],
    ])


def wedge(Q: Union[HPoint3, np.ndarray]) -> np.ndarray:
    """
    The 6x4 operator `(Q)_^` such that `(Q)_^ P` stacks `Q4 P_d - P4 Q_d` over `Q_d x P_d`.
    It vanishes exactly when `P` and `Q` are the same projective point.
    """
    q = np.asarray(getattr(Q, "coords", Q), dtype=float).reshape(4)
    out = np.zeros((6, 4))
    out[:3, :3] = q[3] * np.eye(3)
    out[:3, 3] = -q[:3]
    out[3:, :3] = cross_matrix(q[:3])
    return out


def normalize_points(points) -> Tuple[np.ndarray, np.ndarray]:
    """
    Similarity-normalize space points so that their centroid is the origin and their mean
    distance from it is `sqrt(3)`.

    Returns the transformed `(N, 4)` points (with `P4 = 1`) and the 4x4 transform `T`.
    """
    P = as_points3(points)
    if P.shape[0] < 2:
        raise DegenerateScaleError("at least two points are needed for normalization")
    X = dehomogenize(P)
    centroid = X.mean(axis=0)
    mean_norm = np.linalg.norm(X - centroid, axis=1).mean()
    if mean_norm <= 1e-12 * max(1.0, np.linalg.norm(centroid)):
        raise DegenerateScaleError("all points are coincident")
    s = np.sqrt(3.0) / mean_norm
    T = np.eye(4)
    T[:3, :3] *= s
    T[:3, 3] = -s * centroid
    Xn = s * (X - centroid)
    return np.hstack([Xn, np.ones((Xn.shape[0], 1))]), T


def normalize_points_2d(points) -> Tuple[np.ndarray, np.ndarray]:
    """
    Image-point counterpart of `normalize_points`: centroid at the origin, mean norm `sqrt(2)`.
    """
    p = as_points2(points)
    if p.shape[0] < 2:
        raise DegenerateScaleError("at least two points are needed for normalization")
    x = dehomogenize(p)
    centroid = x.mean(axis=0)
    mean_norm = np.linalg.norm(x - centroid, axis=1).mean()
    if mean_norm <= 1e-12 * max(1.0, np.linalg.norm(centroid)):
        raise DegenerateScaleError("all points are coincident")
    s = np.sqrt(2.0) / mean_norm
    T = np.array([
        [s, 0.0, -s * centroid[0]],
        [0.0, s, -s * centroid[1]],
        [0.0, 0.0, 1.0],
    ])
    xn = s * (x - centroid)
    return np.hstack([xn, np.ones((xn.shape[0], 1))]), T
