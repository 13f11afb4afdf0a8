"""
Restricted alignment models: the 7-parameter similarity transform fitted by Procrustes and
refined by Levenberg-Marquardt, and the two-parameter inverse-disparity model, both special
cases of the space homography.

>>> import numpy as np
>>> from pyxcal.align import procrustes_similarity
>>> P = np.random.default_rng(0).normal(size=(10, 3))
>>> S = procrustes_similarity((P, 2.0 * P + [10.0, -5.0, 7.0]))
>>> round(S.scale, 6)
2.0
"""

import logging
from typing import Callable, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from pyxcal.errors import DegenerateDataError
from pyxcal.geom import CameraMatrix, Homography3, Similarity3, dehomogenize
from pyxcal.align.dlt import Pairs, pair_arrays, reprojection_error, reprojection_residuals, rms
from pyxcal.align.refine import AlignmentResult, observation_arrays
from pyxcal.optimize import LMConfig, levenberg_marquardt

logger = logging.getLogger(__name__)


def umeyama(source: np.ndarray, target: np.ndarray, with_scale: bool = True) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Least-squares `(s, R, t)` with `target ~ s R source + t` for `(N, 3)` point sets.
    The rotation is always proper: a reflection in the cross-covariance is corrected.
    """
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    if source.shape != target.shape or source.shape[0] < 3:
        raise DegenerateDataError("at least three paired points are needed")
    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    S = source - mu_s
    T = target - mu_t
    spread = np.linalg.svd(S, compute_uv=False)
    if spread[0] == 0 or spread[1] / spread[0] < 1e-9:
        raise DegenerateDataError("the points are collinear")

    covariance = T.T @ S / source.shape[0]
    U, D, Vt = np.linalg.svd(covariance)
    correction = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        correction[2, 2] = -1.0
    R = U @ correction @ Vt
    scale = 1.0
    if with_scale:
        variance = np.mean(np.sum(S ** 2, axis=1))
        scale = float(np.trace(np.diag(D) @ correction) / variance)
        if scale <= 0:
            raise DegenerateDataError("the point sets admit no positive scale")
    t = mu_t - scale * R @ mu_s
    return scale, R, t


def procrustes_similarity(pairs: Pairs) -> Similarity3:
    """
    Closed-form similarity `S` minimizing `sum |Q_k - (s R P_k + t)|^2`.
    """
    P, Q = pair_arrays(pairs)
    scale, R, t = umeyama(dehomogenize(P), dehomogenize(Q), with_scale=True)
    return Similarity3.from_rotation(scale, R, t)


def refine_similarity(S_init: Similarity3, pairs: Pairs, C_l: CameraMatrix, C_r: CameraMatrix,
                      image_left, image_right, config: LMConfig = None,
                      callback: Callable[[int, np.ndarray, float], None] = None) -> AlignmentResult:
    """
    Minimize the joint reprojection error with `H^-1` replaced by `S^-1`, over the Rodrigues
    vector, the log-scale and the translation of `S`.
    """
    _, Q, pl, pr = observation_arrays(pairs, image_left, image_right)

    def similarity_of(x) -> Similarity3:
        return Similarity3(float(np.exp(x[3])), x[:3], x[4:])

    def residuals(x):
        S_inv = similarity_of(x).inverse.matrix
        return np.concatenate([
            reprojection_residuals(C_l.entries @ S_inv, Q, pl).ravel(),
            reprojection_residuals(C_r.entries @ S_inv, Q, pr).ravel(),
        ])

    x0 = np.concatenate([S_init.rotvec, [np.log(S_init.scale)], S_init.translation])
    result = levenberg_marquardt(residuals, x0, config, callback=callback)
    S = similarity_of(result.x)
    # Re-express the rotation vector in its canonical range.
    S = Similarity3(S.scale, Rotation.from_rotvec(np.array(S.rotvec)).as_rotvec(), S.translation)
    S_inv = S.inverse.matrix
    cost_l = reprojection_error(C_l.entries @ S_inv, Q, pl)
    cost_r = reprojection_error(C_r.entries @ S_inv, Q, pr)
    n = 2 * Q.shape[0]
    logger.info(f"similarity refinement: rms {rms(result.initial_cost, n):.4g} -> {rms(result.cost, n):.4g} px "
                f"in {result.iterations} iterations")
    return AlignmentResult(homography=S.as_homography(), mode="similarity",
                           initial_error=rms(result.initial_cost, n), final_error=rms(result.cost, n),
                           initial_cost=result.initial_cost, final_cost=result.cost,
                           iterations=result.iterations, converged=result.converged, similarity=S,
                           final_cost_left=cost_l, final_cost_right=cost_r,
                           cost_history=result.cost_history, raw_parameters=7, effective_parameters=7)


def inverse_disparity_homography(c0: float, c1: float) -> Homography3:
    """
    The two-parameter depth model `Z' = Z / (c0 Z + c1)` as a space homography. It preserves
    every ray through the origin and is the identity for `(c0, c1) = (0, 1)`.
    """
    if c1 == 0:
        raise ValueError("c1 must be non-zero")
    m = np.eye(4)
    m[3, 2] = c0
    m[3, 3] = c1
    return Homography3(m)
