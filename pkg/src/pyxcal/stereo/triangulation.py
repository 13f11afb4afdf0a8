"""
Linear (DLT) triangulation from two projective cameras.
"""

from typing import Union

import numpy as np

from pyxcal.errors import DegenerateGeometryError, PointAtInfinityError
from pyxcal.geom import CameraMatrix, HPoint3, as_points2, homogeneous_distance
from pyxcal.stereo.fundamental import Correspondence2D2D

# Smallest admissible ratio of the third to the first singular value of the constraint matrix.
_PARALLAX_TOL = 1e-9


def _check_centres(C_l: CameraMatrix, C_r: CameraMatrix):
    if homogeneous_distance(C_l.centre().coords, C_r.centre().coords) < 1e-12:
        raise DegenerateGeometryError("the cameras share their optical centre")


def _constraints(C_l: CameraMatrix, C_r: CameraMatrix, pl: np.ndarray, pr: np.ndarray) -> np.ndarray:
    # Four rows per point: x c3 - w c1 and y c3 - w c2 for both cameras, each scaled to unit norm.
    rows = []
    for C, p in ((C_l.entries, pl), (C_r.entries, pr)):
        rows.append(p[:, 0:1] * C[2] - p[:, 2:3] * C[0])
        rows.append(p[:, 1:2] * C[2] - p[:, 2:3] * C[1])
    M = np.stack(rows, axis=1)
    return M / np.maximum(np.linalg.norm(M, axis=2, keepdims=True), 1e-300)


def triangulate_points(C_l: CameraMatrix, C_r: CameraMatrix, left, right) -> np.ndarray:
    """
    Triangulate `N` correspondences at once, returning `(N, 4)` homogeneous points scaled so
    that `P4 = 1` wherever the point is finite.
    """
    _check_centres(C_l, C_r)
    pl = as_points2(left)
    pr = as_points2(right)
    if pl.shape != pr.shape:
        raise ValueError("left and right points differ in number")
    M = _constraints(C_l, C_r, pl, pr)
    _, s, Vt = np.linalg.svd(M)
    if np.any(s[:, 2] / s[:, 0] < _PARALLAX_TOL):
        raise DegenerateGeometryError("a point lies on the baseline and cannot be triangulated")
    P = Vt[:, -1, :]
    w = P[:, 3:4]
    finite = np.abs(w[:, 0]) > 1e-15 * np.linalg.norm(P, axis=1)
    P = np.where(finite[:, None], P / np.where(finite[:, None], w, 1.0), P)
    return P


def triangulate(C_l: CameraMatrix, C_r: CameraMatrix, m: Union[Correspondence2D2D, tuple]) -> HPoint3:
    """
    Triangulate a single correspondence: the smallest right singular vector of the stacked
    projection constraints.
    """
    if isinstance(m, Correspondence2D2D):
        left, right = m.left.coords, m.right.coords
    else:
        left, right = m
    P = triangulate_points(C_l, C_r, np.atleast_2d(left), np.atleast_2d(right))[0]
    point = HPoint3(P)
    for C in (C_l, C_r):
        if abs(C.entries[2] @ P) <= 1e-15 * np.linalg.norm(C.entries) * np.linalg.norm(P):
            raise PointAtInfinityError("the triangulated point reprojects to infinity")
    return point
