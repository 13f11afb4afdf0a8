"""
Linear estimation of the space homography between the stereo reconstruction and the range
back-projection.

Every observed pair `(P_k, Q_k)` with `Q_k ~ H P_k` gives the six (dependent) linear
constraints `(Q_k)_^ H P_k = 0`, which in terms of the column-major vector `h = vec(H)` read
`(P_k^T kron (Q_k)_^) h = 0`. Stacking all pairs gives a `6N x 16` system that is solved by SVD
after both point sets have been normalized.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from pyxcal.errors import DegenerateConfigurationError, GeometryError, InsufficientDataError, PointAtInfinityError
from pyxcal.geom import CameraMatrix, Homography3, HPoint3, as_pixels, as_points3, canonical, normalize_points, wedge

logger = logging.getLogger(__name__)

#: Fewest pairs that determine a space homography.
MINIMUM_PAIRS = 5

#: Smallest admissible ratio of the second-smallest to the largest singular value of the design.
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Correspondence3D3D:
    #: The point in the stereo reconstruction frame.
    stereo_point: HPoint3
    #: The point in the range camera frame.
    tof_point: HPoint3
    board_index: int = 0
    vertex_index: int = 0

    def __post_init__(self):
        for name in ("stereo_point", "tof_point"):
            p = getattr(self, name)
            if not isinstance(p, HPoint3):
                p = HPoint3(np.asarray(p, dtype=float)) if len(p) == 4 else HPoint3.from_euclidean(p)
                object.__setattr__(self, name, p)
            if not p.is_finite:
                raise ValueError(f"the {name.replace('_', ' ')} of a correspondence must be finite")


Pairs = Union[Sequence[Correspondence3D3D], Tuple[np.ndarray, np.ndarray]]


def pair_arrays(pairs: Pairs) -> Tuple[np.ndarray, np.ndarray]:
    """`(N, 4)` stereo points and `(N, 4)` range points from correspondences or a pair of arrays."""
    if isinstance(pairs, tuple) and len(pairs) == 2 and isinstance(pairs[0], np.ndarray):
        P, Q = as_points3(pairs[0]), as_points3(pairs[1])
    elif len(pairs) == 0:
        return np.zeros((0, 4)), np.zeros((0, 4))
    else:
        P = np.stack([p.stereo_point.coords for p in pairs])
        Q = np.stack([p.tof_point.coords for p in pairs])
    if P.shape != Q.shape:
        raise ValueError("stereo and range points differ in number")
    return P, Q


def dlt_design_matrix(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """The stacked `6N x 16` system with rows `P_k^T kron (Q_k)_^`."""
    P = as_points3(P)
    Q = as_points3(Q)
    return np.vstack([np.kron(p[None, :], wedge(q)) for p, q in zip(P, Q)])


def dlt_homography3(pairs: Pairs) -> Homography3:
    """
    Direct linear estimate of `H` with `Q ~ H P`.
    """
    P, Q = pair_arrays(pairs)
    n = P.shape[0]
    if n < MINIMUM_PAIRS:
        raise InsufficientDataError(f"a space homography needs {MINIMUM_PAIRS} pairs, got {n}")
    try:
        Pn, T_P = normalize_points(P)
        Qn, T_Q = normalize_points(Q)
    except GeometryError as e:
        raise DegenerateConfigurationError(f"cannot normalize the points: {e}") from e

    design = dlt_design_matrix(Pn, Qn)
    _, s, Vt = np.linalg.svd(design, full_matrices=False)
    if s[-2] / s[0] < DEGENERACY_TOL:
        raise DegenerateConfigurationError(
            f"the points do not determine a homography (singular value ratio {s[-2] / s[0]:.3g})")
    Hn = Vt[-1].reshape(4, 4, order="F")
    H = scipy.linalg.solve(T_Q, Hn) @ T_P
    logger.debug(f"DLT on {n} pairs: algebraic residual {s[-1]:.3g}, ratio {s[-2] / s[0]:.3g}")
    return Homography3(canonical(H))


def reprojection_residuals(camera: Union[CameraMatrix, np.ndarray], tof_points, image_points) -> np.ndarray:
    """`(N, 2)` pixel differences between projected range points and observed image points."""
    entries = np.asarray(getattr(camera, "entries", camera), dtype=float)
    p = as_points3(tof_points) @ entries.T
    if np.any(np.abs(p[:, 2]) <= 1e-15 * np.linalg.norm(p, axis=1)):
        raise PointAtInfinityError("a point projects to infinity")
    return p[:, :2] / p[:, 2:3] - as_pixels(image_points)


def reprojection_error(camera: Union[CameraMatrix, np.ndarray], tof_points, image_points) -> float:
    """
    Sum of squared pixel distances between `C Q_k` and `p_k`. The RMS error is
    `sqrt(E / N)`.
    """
    Q = as_points3(tof_points)
    p = as_pixels(image_points)
    if Q.shape[0] != p.shape[0]:
        raise ValueError("point lists differ in length")
    r = reprojection_residuals(camera, Q, p)
    return float(np.sum(r ** 2))


def rms(cost: float, count: int) -> float:
    return float(np.sqrt(cost / count)) if count else 0.0
