"""
The two accuracy measures of a calibrated network.

Calibration error reprojects the board vertices seen by the range camera of rig `j`, with
their ranges taken from the fitted board plane, into the colour images of rig `i`, and compares
them with the detected vertices there. It measures the calibration itself.

Total error reprojects every raw range sample inside the board hull the same way, and compares
the result with the pixel the plane-induced transfer homography maps it to. It includes the
noise of the range sensor.

Both are evaluated on boards that took no part in the calibration.
"""

import logging
from typing import Dict, Iterable, List, Mapping, Tuple

import numpy as np
from scipy.spatial import Delaunay, QhullError
from tqdm import tqdm

from pyxcal.datasets.board import BoardView
from pyxcal.errors import DatasetError, DegenerateDataError, EstimationError, GeometryError, MissingPlaneError, \
    TransferEstimationError
from pyxcal.evaluation.report import ErrorReport
from pyxcal.evaluation.transfer import Homography2, dlt_homography2
from pyxcal.geom import CameraMatrix
from pyxcal.network import SIDES, NetworkGraph
from pyxcal.optimize import LMConfig
from pyxcal.tof import backproject_array, fit_plane_ransac, refine_ranges

logger = logging.getLogger(__name__)

Views = Mapping[Tuple[int, int], BoardView]


def hull_from_vertices(vertices: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    """Mask of the pixels inside the convex hull of the detected vertices."""
    try:
        triangulation = Delaunay(np.asarray(vertices, dtype=float))
    except QhullError as e:
        raise DegenerateDataError("the vertices do not span a hull") from e
    return triangulation.find_simplex(np.asarray(pixels, dtype=float)) >= 0


def fit_board_planes(views: Iterable[BoardView], tof_cameras: Mapping[int, CameraMatrix],
                     threshold_mm: float = 15.0, max_iters: int = 2000, seed: int = 0,
                     lm_config: LMConfig = None) -> List[BoardView]:
    """
    Fit a plane to the raw hull samples of every view. Each view draws its RANSAC samples from
    its own stream, so a view's plane does not depend on which other views are fitted.
    """
    fitted = []
    for view in tqdm(list(views), desc="fitting planes", leave=False):
        camera = tof_cameras[view.rig_id]
        points = backproject_array(camera, view.hull_pixels, view.hull_ranges)
        stream = np.random.SeedSequence([seed, view.board_id, view.rig_id])
        plane = fit_plane_ransac(points, camera, threshold_mm=threshold_mm, max_iters=max_iters,
                                 seed=stream, lm_config=lm_config)
        logger.debug(f"board {view.board_id} in rig {view.rig_id}: {plane.inlier_count}/{len(points)} "
                     f"plane inliers, rms {plane.rms_radial_residual:.4g} mm")
        fitted.append(view.with_plane(plane))
    return fitted


def _paired_views(views: Views, i: int, j: int, boards: Iterable[int]):
    for b in boards:
        view_i = views.get((b, i))
        view_j = views.get((b, j))
        if view_i is None or view_j is None:
            continue
        if view_i.vertex_count != view_j.vertex_count:
            raise DatasetError(f"board {b} has {view_i.vertex_count} vertices in rig {i} "
                               f"but {view_j.vertex_count} in rig {j}")
        yield b, view_i, view_j


def calibration_error(network: NetworkGraph, views: Views, i: int, j: int, boards: Iterable[int]) -> ErrorReport:
    """
    Errors of the plane-refined range vertices of rig `j` reprojected into both colour images
    of rig `i`.
    """
    camera_j = network.rigs[j].tof_camera
    records = []
    for b, view_i, view_j in _paired_views(views, i, j, boards):
        if view_j.fitted_plane is None:
            raise MissingPlaneError(f"board {b} in rig {j} has no fitted plane")
        _, Q = refine_ranges(camera_j, view_j.tof_vertices, view_j.fitted_plane.plane)
        for side in SIDES:
            projected = network.tof_camera_into(i, j, side).project(Q)
            errors = np.linalg.norm(projected - view_i.side_vertices(side), axis=1)
            records.extend((b, k, i, j, side, "vertex", float(e)) for k, e in enumerate(errors))
    return ErrorReport.from_records(records)


def transfer_homography(source: np.ndarray, target: np.ndarray, lm_config: LMConfig = None) -> Homography2:
    try:
        return dlt_homography2(source, target, refine=True, config=lm_config)
    except (EstimationError, GeometryError) as e:
        raise TransferEstimationError(f"cannot estimate a transfer homography: {e}") from e


def total_error(network: NetworkGraph, views: Views, i: int, j: int, boards: Iterable[int],
                lm_config: LMConfig = None) -> ErrorReport:
    """
    Errors between the raw hull samples of rig `j` reprojected into the colour images of rig
    `i` and their transfers through the board's plane homography.
    """
    camera_j = network.rigs[j].tof_camera
    records = []
    for b, view_i, view_j in _paired_views(views, i, j, boards):
        if len(view_j.hull_pixels) == 0:
            continue
        Q = backproject_array(camera_j, view_j.hull_pixels, view_j.hull_ranges)
        ids = np.arange(len(Q))
        for side in SIDES:
            transfer = transfer_homography(view_j.tof_vertices, view_i.side_vertices(side), lm_config)
            projected = network.tof_camera_into(i, j, side).project(Q)
            errors = np.linalg.norm(projected - transfer.apply(view_j.hull_pixels), axis=1)
            records.extend(zip([b] * len(ids), ids.tolist(), [i] * len(ids), [j] * len(ids), [side] * len(ids),
                               list(view_j.hull_regions), errors.tolist()))
    return ErrorReport.from_records(records)


def pair_reports(network: NetworkGraph, views: Views, pairs: Iterable[Tuple[int, int]], boards: Iterable[int],
                 lm_config: LMConfig = None) -> Dict[str, Dict[Tuple[int, int], ErrorReport]]:
    """Calibration and total error reports for every requested pair of rigs."""
    boards = list(boards)
    reports = {"calibration": {}, "total": {}}
    for i, j in tqdm(list(pairs), desc="evaluating pairs", leave=False):
        reports["calibration"][(i, j)] = calibration_error(network, views, i, j, boards)
        reports["total"][(i, j)] = total_error(network, views, i, j, boards, lm_config)
    return reports
