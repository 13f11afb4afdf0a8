"""
Levenberg-Marquardt refinement of the range-to-stereo alignment.

Joint refinement optimizes the 16 entries of `H^-1` against the reprojection error in both
colour images, leaving the stereo cameras (and hence their epipolar geometry) untouched.
Separate refinement instead optimizes each composite camera `C H^-1` independently, which
can absorb distortions a single homography cannot, at the price of a new fundamental matrix.

Parameters are expressed in the normalized frames of the point sets so that the finite
difference Jacobians are well conditioned; each matrix is kept at unit norm.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg

from pyxcal.geom import CameraMatrix, Homography3, Similarity3, as_pixels, canonical, normalize_points
from pyxcal.align.dlt import Pairs, pair_arrays, reprojection_error, reprojection_residuals, rms
from pyxcal.optimize import LMConfig, levenberg_marquardt, unit_norm_gauge

logger = logging.getLogger(__name__)

#: Refinement modes recorded in an `AlignmentResult`.
MODES = ("dlt-only", "joint", "separate", "similarity")


@dataclass
class AlignmentResult:
    homography: Homography3
    mode: str
    initial_error: float
    final_error: float
    initial_cost: float
    final_cost: float
    iterations: int
    converged: bool = True
    refined_left: Optional[CameraMatrix] = None
    refined_right: Optional[CameraMatrix] = None
    similarity: Optional[Similarity3] = None
    #: Final summed squared error in each image.
    final_cost_left: float = 0.0
    final_cost_right: float = 0.0
    cost_history: List[float] = field(default_factory=list)
    raw_parameters: int = 0
    effective_parameters: int = 0

    def camera_into(self, side: str, stereo_camera: CameraMatrix) -> CameraMatrix:
        """
        The camera that projects range points into the `side` colour image: the refined camera
        in separate mode, and `C H^-1` otherwise.
        """
        refined = self.refined_left if side == "left" else self.refined_right
        if refined is not None:
            return refined
        return stereo_camera @ self.homography.inverse


def observation_arrays(pairs: Pairs, image_left, image_right):
    P, Q = pair_arrays(pairs)
    pl = as_pixels(image_left)
    pr = as_pixels(image_right)
    if not (P.shape[0] == Q.shape[0] == pl.shape[0] == pr.shape[0]):
        raise ValueError("pairs and image points differ in number")
    return P, Q, pl, pr


def dlt_only_result(H: Homography3, pairs: Pairs, C_l: CameraMatrix, C_r: CameraMatrix,
                    image_left, image_right) -> AlignmentResult:
    """Wrap a linear estimate in an `AlignmentResult` without refining it."""
    _, Q, pl, pr = observation_arrays(pairs, image_left, image_right)
    H_inv = H.inverse.matrix
    cost_l = reprojection_error(C_l.entries @ H_inv, Q, pl)
    cost_r = reprojection_error(C_r.entries @ H_inv, Q, pr)
    cost = cost_l + cost_r
    error = rms(cost, 2 * Q.shape[0])
    return AlignmentResult(homography=H, mode="dlt-only", initial_error=error, final_error=error,
                           initial_cost=cost, final_cost=cost, iterations=0,
                           final_cost_left=cost_l, final_cost_right=cost_r, cost_history=[cost])


def refine_joint(H_init: Homography3, pairs: Pairs, C_l: CameraMatrix, C_r: CameraMatrix,
                 image_left, image_right, config: LMConfig = None,
                 callback: Callable[[int, np.ndarray, float], None] = None) -> AlignmentResult:
    """
    Minimize `E_l(C_l H^-1) + E_r(C_r H^-1)` over `H^-1` (16 parameters, 15 effective).
    """
    P, Q, pl, pr = observation_arrays(pairs, image_left, image_right)
    _, T_P = normalize_points(P)
    _, T_Q = normalize_points(Q)
    T_P_inv = scipy.linalg.inv(T_P)
    T_Q_inv = scipy.linalg.inv(T_Q)
    Ql = C_l.entries @ T_P_inv
    Qr = C_r.entries @ T_P_inv
    Qt = Q @ T_Q.T

    # H^-1 = T_P^-1 X T_Q, with X the parameter matrix.
    def residuals(x):
        X = x.reshape(4, 4)
        return np.concatenate([
            reprojection_residuals(Ql @ X, Qt, pl).ravel(),
            reprojection_residuals(Qr @ X, Qt, pr).ravel(),
        ])

    X0 = canonical(T_P @ H_init.inverse.matrix @ T_Q_inv)
    result = levenberg_marquardt(residuals, X0.ravel(), config, gauge=unit_norm_gauge([16]), callback=callback)

    H_inv = T_P_inv @ result.x.reshape(4, 4) @ T_Q
    H = Homography3(canonical(scipy.linalg.inv(H_inv)))
    cost_l = reprojection_error(C_l.entries @ H_inv, Q, pl)
    cost_r = reprojection_error(C_r.entries @ H_inv, Q, pr)
    n = 2 * Q.shape[0]
    logger.info(f"joint refinement: rms {rms(result.initial_cost, n):.4g} -> {rms(result.cost, n):.4g} px "
                f"in {result.iterations} iterations")
    return AlignmentResult(homography=H, mode="joint",
                           initial_error=rms(result.initial_cost, n), final_error=rms(result.cost, n),
                           initial_cost=result.initial_cost, final_cost=result.cost,
                           iterations=result.iterations, converged=result.converged,
                           final_cost_left=cost_l, final_cost_right=cost_r,
                           cost_history=result.cost_history, raw_parameters=16, effective_parameters=15)


def refine_camera(C_init: np.ndarray, Q: np.ndarray, image_points, config: LMConfig = None,
                  callback: Callable[[int, np.ndarray, float], None] = None):
    """
    Minimize the reprojection error of a single 3x4 camera over range points `Q`
    (12 parameters, 11 effective). Returns the refined camera and the `LMResult`.
    """
    p = as_pixels(image_points)
    _, T_Q = normalize_points(Q)
    T_Q_inv = scipy.linalg.inv(T_Q)
    Qt = Q @ T_Q.T

    # C = Y T_Q, with Y the parameter matrix.
    def residuals(x):
        return reprojection_residuals(x.reshape(3, 4), Qt, p).ravel()

    Y0 = canonical(np.asarray(C_init, dtype=float) @ T_Q_inv)
    result = levenberg_marquardt(residuals, Y0.ravel(), config, gauge=unit_norm_gauge([12]), callback=callback)
    return CameraMatrix(canonical(result.x.reshape(3, 4) @ T_Q)), result


def refine_separate(H_init: Homography3, pairs: Pairs, C_l: CameraMatrix, C_r: CameraMatrix,
                    image_left, image_right, config: LMConfig = None,
                    callback: Callable[[int, np.ndarray, float], None] = None) -> AlignmentResult:
    """
    Refine `C_l H^-1` and `C_r H^-1` as two independent cameras, starting from `H_init`
    (24 parameters, 22 effective). The returned homography is `H_init`; the refined cameras
    replace `C H^-1` when projecting range points.
    """
    _, Q, pl, pr = observation_arrays(pairs, image_left, image_right)
    H_inv = H_init.inverse.matrix
    left, left_result = refine_camera(C_l.entries @ H_inv, Q, pl, config, callback)
    right, right_result = refine_camera(C_r.entries @ H_inv, Q, pr, config, callback)

    histories = [left_result.cost_history, right_result.cost_history]
    length = max(len(h) for h in histories)
    padded = [h + [h[-1]] * (length - len(h)) for h in histories]
    history = [a + b for a, b in zip(*padded)]

    initial_cost = left_result.initial_cost + right_result.initial_cost
    final_cost = left_result.cost + right_result.cost
    n = 2 * Q.shape[0]
    logger.info(f"separate refinement: rms {rms(initial_cost, n):.4g} -> {rms(final_cost, n):.4g} px "
                f"in {left_result.iterations} + {right_result.iterations} iterations")
    return AlignmentResult(homography=H_init, mode="separate",
                           initial_error=rms(initial_cost, n), final_error=rms(final_cost, n),
                           initial_cost=initial_cost, final_cost=final_cost,
                           iterations=left_result.iterations + right_result.iterations,
                           converged=left_result.converged and right_result.converged,
                           refined_left=left, refined_right=right,
                           final_cost_left=left_result.cost, final_cost_right=right_result.cost,
                           cost_history=history, raw_parameters=24, effective_parameters=22)
