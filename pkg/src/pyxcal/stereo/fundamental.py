"""
Fundamental matrices: the normalized 8-point method, robust estimation by RANSAC, and the
conversions between a fundamental matrix and a pair of projective cameras.

>>> import numpy as np
>>> from pyxcal.geom import CameraMatrix
>>> from pyxcal.stereo import fundamental_from_cameras, cameras_from_fundamental
>>> F = fundamental_from_cameras(CameraMatrix(np.hstack([np.eye(3), np.zeros((3, 1))])),
...                              CameraMatrix(np.hstack([np.eye(3), [[1.0], [0.0], [0.0]]])))
>>> C_left, C_right = cameras_from_fundamental(F)
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from pyxcal.errors import (
    DegenerateDataError,
    DegenerateGeometryError,
    EstimationError,
    GeometryError,
    InsufficientDataError,
    InvalidFrameError,
    NoConsensusError,
)
from pyxcal.geom import (
    HOMOGENEOUS_TOL,
    CameraMatrix,
    HPoint2,
    as_points2,
    cross_matrix,
    homogeneous_distance,
    normalize_points_2d,
)

logger = logging.getLogger(__name__)

#: Sample size of the 8-point method.
MINIMAL_SAMPLE = 8


@dataclass(frozen=True, eq=False)
class FundamentalMatrix:
    """
    A rank-2 fundamental matrix with `p_r^T F p_l = 0`. The smallest singular value is set to
    zero on construction and the matrix is scaled to unit Frobenius norm.
    """
    entries: np.ndarray
    #: Right epipole, `F^T e_r = 0`.
    epipole_right: np.ndarray = field(init=False)
    #: Left epipole, `F e_l = 0`.
    epipole_left: np.ndarray = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise ValueError("a fundamental matrix is a finite 3x3 matrix")
        U, s, Vt = np.linalg.svd(m)
        if s[0] == 0 or s[1] / s[0] < 1e-12:
            raise DegenerateGeometryError("a fundamental matrix must have rank 2")
        s[2] = 0.0
        m = U @ np.diag(s) @ Vt
        m = m / np.linalg.norm(m)
        m.flags.writeable = False
        e_r = U[:, 2].copy()
        e_l = Vt[2].copy()
        e_r.flags.writeable = False
        e_l.flags.writeable = False
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "epipole_right", e_r)
        object.__setattr__(self, "epipole_left", e_l)

    def residuals(self, left, right) -> np.ndarray:
        """Algebraic residuals `p_r^T F p_l`."""
        pl = as_points2(left)
        pr = as_points2(right)
        return np.einsum("ni,ij,nj->n", pr, self.entries, pl)

    def distance(self, other: Union["FundamentalMatrix", np.ndarray]) -> float:
        return homogeneous_distance(self.entries, getattr(other, "entries", other))

    def equals(self, other, tol: float = HOMOGENEOUS_TOL) -> bool:
        return self.distance(other) <= tol


@dataclass(frozen=True)
class ProjectiveFrame:
    """
    The free parameters `(g, gamma)` of the right camera extracted from a fundamental matrix.
    """
    g: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma == 0 or not np.isfinite(self.gamma):
            raise InvalidFrameError("gamma must be non-zero")
        if len(self.g) != 3:
            raise InvalidFrameError("g must be a 3-vector")


@dataclass(frozen=True, eq=False)
class Correspondence2D2D:
    left: HPoint2
    right: HPoint2

    def __post_init__(self):
        for name in ("left", "right"):
            p = getattr(self, name)
            if not isinstance(p, HPoint2):
                p = HPoint2(np.asarray(p, dtype=float)) if len(p) == 3 else HPoint2.from_pixel(p)
                object.__setattr__(self, name, p)
            if not p.is_finite:
                raise ValueError(f"the {name} point of a correspondence must be finite")


Matches = Union[Sequence[Correspondence2D2D], Tuple[np.ndarray, np.ndarray]]


def match_arrays(matches: Matches) -> Tuple[np.ndarray, np.ndarray]:
    """`(N, 3)` left and right homogeneous points from correspondences or a pair of arrays."""
    if isinstance(matches, tuple) and len(matches) == 2 and isinstance(matches[0], np.ndarray):
        left, right = as_points2(matches[0]), as_points2(matches[1])
    elif len(matches) == 0:
        return np.zeros((0, 3)), np.zeros((0, 3))
    else:
        left = np.stack([m.left.coords for m in matches])
        right = np.stack([m.right.coords for m in matches])
    if left.shape != right.shape:
        raise ValueError("left and right points differ in number")
    return left, right


def eight_point(left, right) -> FundamentalMatrix:
    """
    Normalized 8-point estimate from at least eight correspondences.
    """
    pl = as_points2(left)
    pr = as_points2(right)
    if pl.shape[0] < MINIMAL_SAMPLE:
        raise InsufficientDataError(f"the 8-point method needs {MINIMAL_SAMPLE} matches, got {pl.shape[0]}")
    try:
        nl, Tl = normalize_points_2d(pl)
        nr, Tr = normalize_points_2d(pr)
    except GeometryError as e:
        raise DegenerateDataError("matches are degenerate") from e
    # Row k is kron(p_r, p_l), so that row . vec(F) = p_r^T F p_l with F flattened row-major.
    design = np.einsum("ni,nj->nij", nr, nl).reshape(-1, 9)
    _, s, Vt = np.linalg.svd(design)
    if s.size >= 8 and s[7] / s[0] < 1e-12:
        raise DegenerateDataError("matches do not determine a unique fundamental matrix")
    Fn = Vt[-1].reshape(3, 3)
    U, sf, Vft = np.linalg.svd(Fn)
    Fn = U @ np.diag([sf[0], sf[1], 0.0]) @ Vft
    return FundamentalMatrix(Tr.T @ Fn @ Tl)


def sampson_distance(F: Union[FundamentalMatrix, np.ndarray], left, right) -> np.ndarray:
    """
    First-order geometric distance (pixels) of each correspondence to the epipolar geometry.
    """
    m = np.asarray(getattr(F, "entries", F), dtype=float)
    pl = as_points2(left)
    pr = as_points2(right)
    pl = pl / pl[:, 2:3]
    pr = pr / pr[:, 2:3]
    Fl = pl @ m.T
    Ftr = pr @ m
    num = np.einsum("ni,ni->n", pr, Fl) ** 2
    den = Fl[:, 0] ** 2 + Fl[:, 1] ** 2 + Ftr[:, 0] ** 2 + Ftr[:, 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.sqrt(num / den)
    return np.where(den > 0, d, np.inf)


def ransac_iterations(inlier_ratio: float, sample_size: int, confidence: float = 0.99) -> int:
    """Number of samples needed to draw one outlier-free sample with the given confidence."""
    if inlier_ratio >= 1.0:
        return 1
    if inlier_ratio <= 0.0:
        return np.iinfo(np.int64).max
    p_good = inlier_ratio ** sample_size
    if p_good <= 0.0:
        return np.iinfo(np.int64).max
    return int(np.ceil(np.log(1.0 - confidence) / np.log1p(-p_good)))


def estimate_fundamental_ransac(matches: Matches,
                                threshold_px: float = 1.0,
                                max_iters: int = 2000,
                                seed: int = 0,
                                confidence: float = 0.99) -> Tuple[FundamentalMatrix, np.ndarray]:
    """
    Robust fundamental matrix estimate. Minimal 8-point samples are scored by Sampson distance;
    the best consensus set is refit with the normalized 8-point method until it stops changing.
    Sampling is driven by a counter-based generator seeded with `seed`, so results are
    reproducible.
    """
    if threshold_px <= 0:
        raise ValueError("threshold_px must be positive")
    left, right = match_arrays(matches)
    n = left.shape[0]
    if n < MINIMAL_SAMPLE:
        raise InsufficientDataError(f"RANSAC needs at least {MINIMAL_SAMPLE} matches, got {n}")

    rng = np.random.Generator(np.random.Philox(seed))
    best_mask = None
    best_count = 0
    needed = max_iters
    i = 0
    while i < min(needed, max_iters):
        i += 1
        sample = rng.choice(n, size=MINIMAL_SAMPLE, replace=False)
        try:
            F = eight_point(left[sample], right[sample])
        except (EstimationError, GeometryError):
            continue
        mask = sampson_distance(F, left, right) <= threshold_px
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            needed = ransac_iterations(count / n, MINIMAL_SAMPLE, confidence)

    if best_mask is None or best_count < MINIMAL_SAMPLE:
        raise NoConsensusError(f"no fundamental matrix is supported by {MINIMAL_SAMPLE} matches")

    mask = best_mask
    F = eight_point(left[mask], right[mask])
    for _ in range(5):
        new_mask = sampson_distance(F, left, right) <= threshold_px
        if new_mask.sum() < MINIMAL_SAMPLE or np.array_equal(new_mask, mask):
            break
        mask = new_mask
        F = eight_point(left[mask], right[mask])
    mask = sampson_distance(F, left, right) <= threshold_px
    if mask.sum() < MINIMAL_SAMPLE:
        raise NoConsensusError("the refit fundamental matrix lost its consensus set")
    logger.info(f"fundamental RANSAC: {int(mask.sum())}/{n} inliers after {i} samples")
    return F, mask


def cameras_from_fundamental(F: FundamentalMatrix, frame: ProjectiveFrame = None) -> Tuple[CameraMatrix, CameraMatrix]:
    """
    A camera pair consistent with `F`: `C_l = (I | 0)` and `C_r = ((e_r)_x F + e_r g^T | gamma e_r)`.
    """
    frame = frame or ProjectiveFrame()
    e = F.epipole_right
    g = np.asarray(frame.g, dtype=float)
    C_l = np.hstack([np.eye(3), np.zeros((3, 1))])
    C_r = np.hstack([cross_matrix(e) @ F.entries + np.outer(e, g), (frame.gamma * e)[:, None]])
    return CameraMatrix(C_l), CameraMatrix(C_r)


def fundamental_from_cameras(C_l: CameraMatrix, C_r: CameraMatrix) -> FundamentalMatrix:
    """
    `F = (e_r)_x C_r C_l^+`, where `e_r = C_r d_l` is the image of the left centre `d_l`.
    """
    d = C_l.centre().coords
    e = C_r.entries @ d
    if np.linalg.norm(e) <= 1e-12 * np.linalg.norm(C_r.entries):
        raise DegenerateGeometryError("the cameras share their optical centre")
    F = cross_matrix(e) @ C_r.entries @ scipy.linalg.pinv(C_l.entries)
    return FundamentalMatrix(F)
