"""
Plane-induced transfer homographies between two images of the same board.

The transfer `T` maps pixels of one image directly onto the other, without going through
3D. It is estimated from the board vertices by the normalized DLT and refined by
Levenberg-Marquardt on the symmetric transfer error.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from pyxcal.errors import DegenerateDataError, GeometryError, InsufficientDataError, NotInvertibleError
from pyxcal.geom import HOMOGENEOUS_TOL, as_points2, canonical, cross_matrix, dehomogenize, homogeneous_distance, \
    normalize_points_2d
from pyxcal.optimize import LMConfig, levenberg_marquardt, unit_norm_gauge

logger = logging.getLogger(__name__)

_MAX_CONDITION = 1e14


@dataclass(frozen=True, eq=False)
class Homography2:
    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise ValueError("a plane homography is a finite 3x3 matrix")
        if np.linalg.cond(m / np.linalg.norm(m)) > _MAX_CONDITION:
            raise NotInvertibleError("the plane homography is singular")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @classmethod
    def identity(cls) -> "Homography2":
        return cls(np.eye(3))

    @property
    def inverse(self) -> "Homography2":
        return Homography2(scipy.linalg.inv(self.entries))

    def normalized(self) -> "Homography2":
        return Homography2(canonical(self.entries))

    def apply(self, points) -> np.ndarray:
        """Transfer `(N, 2|3)` image points, returning `(N, 2)` pixels."""
        return dehomogenize(as_points2(points) @ self.entries.T)

    def distance(self, other: Union["Homography2", np.ndarray]) -> float:
        return homogeneous_distance(self.entries, getattr(other, "entries", other))

    def equals(self, other, tol: float = HOMOGENEOUS_TOL) -> bool:
        return self.distance(other) <= tol


def _collinear(points: np.ndarray, tol: float = 1e-9) -> bool:
    """Whether any three of the (normalized) points are collinear."""
    for triple in itertools.combinations(range(points.shape[0]), 3):
        m = points[list(triple)]
        if abs(np.linalg.det(m)) <= tol * np.prod(np.linalg.norm(m, axis=1)):
            return True
    return False


def _design_matrix(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    # (q)_x H p = 0 with H flattened row-major: H p = kron(I, p^T) h.
    return np.vstack([cross_matrix(q) @ np.kron(np.eye(3), p[None, :]) for p, q in zip(src, dst)])


def symmetric_transfer_residuals(H: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Forward and backward transfer residuals, `(4N,)`, in pixels."""
    try:
        H_inv = np.linalg.inv(H)
    except np.linalg.LinAlgError as e:
        raise NotInvertibleError("the plane homography is singular") from e
    forward = dehomogenize(src @ H.T) - dehomogenize(dst)
    backward = dehomogenize(dst @ H_inv.T) - dehomogenize(src)
    return np.concatenate([forward.ravel(), backward.ravel()])


def dlt_homography2(src, dst, refine: bool = True, config: LMConfig = None) -> Homography2:
    """
    Estimate `T` with `dst ~ T src` from at least four correspondences.
    """
    p = as_points2(src)
    q = as_points2(dst)
    if p.shape != q.shape:
        raise ValueError("source and destination points differ in number")
    if p.shape[0] < 4:
        raise InsufficientDataError(f"a plane homography needs four correspondences, got {p.shape[0]}")
    try:
        pn, T_src = normalize_points_2d(p)
        qn, T_dst = normalize_points_2d(q)
    except GeometryError as e:
        raise DegenerateDataError("the correspondences are degenerate") from e
    if p.shape[0] == 4 and (_collinear(pn) or _collinear(qn)):
        raise DegenerateDataError("three of the four points are collinear")

    _, s, Vt = np.linalg.svd(_design_matrix(pn, qn))
    if s[-2] / s[0] < 1e-10:
        raise DegenerateDataError("the correspondences do not determine a plane homography")
    X = canonical(Vt[-1].reshape(3, 3))

    if refine:
        T_dst_inv = scipy.linalg.inv(T_dst)

        # T = T_dst^-1 X T_src, with X the parameter matrix.
        def residuals(x):
            return symmetric_transfer_residuals(T_dst_inv @ x.reshape(3, 3) @ T_src, p, q)

        result = levenberg_marquardt(residuals, X.ravel(), config, gauge=unit_norm_gauge([9]))
        X = result.x.reshape(3, 3)
    return Homography2(canonical(scipy.linalg.solve(T_dst, X @ T_src)))
