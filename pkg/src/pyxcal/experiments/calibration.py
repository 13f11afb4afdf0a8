"""
The calibration pipeline.

For every rig: fit a plane to the range samples of each fitting board, move the board vertices
seen by the range camera onto their plane, reconstruct the same vertices from the stereo pair,
estimate the space homography between the two reconstructions by the DLT and refine it. Rigs
that share enough fitting boards are then related directly, and all other pairs of rigs by
composition.

>>> from pathlib import Path
>>> from pyxcal.datasets import BoardDataset
>>> from pyxcal.experiments import CalibrationExperiment, PipelineConfig
>>> experiment = CalibrationExperiment(BoardDataset.from_dir(Path("scene")), PipelineConfig(mode="joint"))
>>> experiment.bundle.save(Path("bundle.json"))
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

import pyxcal
from pyxcal.align import (
    AlignmentResult,
    dlt_homography3,
    dlt_only_result,
    procrustes_similarity,
    refine_joint,
    refine_separate,
    refine_similarity,
)
from pyxcal.datasets import BoardDataset, BoardView
from pyxcal.errors import ConfigError, DatasetError
from pyxcal.evaluation import fit_board_planes
from pyxcal.experiments.bundle import CalibrationBundle, EdgeRecord, RigRecord
from pyxcal.experiments.config import PipelineConfig
from pyxcal.geom import CameraMatrix, RigidTransform3
from pyxcal.network import NetworkGraph, Rig, estimate_projective, estimate_rigid
from pyxcal.stereo import cameras_from_fundamental, estimate_fundamental_ransac, triangulate_points
from pyxcal.tof import refine_ranges
from pyxcal.util import matrix_to_list

logger = logging.getLogger(__name__)


@dataclass
class RigCalibration:
    rig: Rig
    alignment: AlignmentResult
    fitting_boards: List[int]
    #: Stereo reconstruction of the vertices of each fitting board.
    stereo_points: Dict[int, np.ndarray]
    #: Range points of the same vertices, on their fitted planes.
    tof_points: Dict[int, np.ndarray]
    stereo_inliers: Optional[int] = None


def split_boards(boards: List[int], config: PipelineConfig) -> Tuple[List[int], List[int]]:
    """Fitting and evaluation boards: the last `evaluation_board_count` boards are held out."""
    boards = sorted(boards)
    if config.evaluation_boards is not None:
        held_out = sorted(set(config.evaluation_boards))
    else:
        held_out = boards[len(boards) - config.evaluation_board_count:] if config.evaluation_board_count else []
    return [b for b in boards if b not in held_out], held_out


class CalibrationExperiment:
    """
    Calibrate every rig of a dataset and the network relating them. The work happens once, the
    first time `bundle` is accessed.
    """

    def __init__(self, dataset: BoardDataset, config: PipelineConfig = None, input_hash: str = ""):
        self.dataset = dataset
        self.config = (config or PipelineConfig()).validate()
        if self.config.reference_rig not in dataset.rig_ids:
            raise ConfigError(f"reference rig {self.config.reference_rig} is not in the dataset")
        self.input_hash = input_hash
        self.fitting_boards, self.evaluation_boards = split_boards(dataset.boards, self.config)
        if not self.fitting_boards:
            raise DatasetError("no boards are left for fitting")

        # Results are cached, so that the pipeline only runs once.
        self._views: Optional[Dict[Tuple[int, int], BoardView]] = None
        self._rigs: Dict[int, RigCalibration] = {}
        self._network: Optional[NetworkGraph] = None
        self._bundle: Optional[CalibrationBundle] = None

    @property
    def fitted_views(self) -> Dict[Tuple[int, int], BoardView]:
        """Fitting views with their board planes."""
        if self._views is None:
            fitting = set(self.fitting_boards)
            views = [v for (b, _), v in sorted(self.dataset.views.items()) if b in fitting]
            ransac = self.config.ransac
            cameras = {r: self.dataset.tof_camera(r) for r in self.dataset.rig_ids}
            fitted = fit_board_planes(views, cameras, threshold_mm=ransac.threshold_mm,
                                      max_iters=ransac.max_iters, seed=ransac.seed, lm_config=self.config.lm)
            self._views = {(v.board_id, v.rig_id): v for v in fitted}
        return self._views

    def stereo_cameras(self, rig_id: int, left: np.ndarray, right: np.ndarray):
        """The stereo cameras of a rig, recovered from the vertex matches in projective mode."""
        if self.config.stereo_mode == "calibrated":
            rig = self.dataset.rig(rig_id)
            return rig.left_camera, rig.right_camera, None
        ransac = self.config.ransac
        F, mask = estimate_fundamental_ransac((left, right), threshold_px=ransac.threshold_px,
                                              max_iters=ransac.max_iters, seed=ransac.seed)
        C_l, C_r = cameras_from_fundamental(F)
        return C_l, C_r, int(mask.sum())

    def align(self, H_init, pairs, C_l: CameraMatrix, C_r: CameraMatrix, left, right) -> AlignmentResult:
        mode = self.config.mode
        lm = self.config.lm
        if mode == "dlt-only":
            return dlt_only_result(H_init, pairs, C_l, C_r, left, right)
        if mode == "joint":
            return refine_joint(H_init, pairs, C_l, C_r, left, right, lm)
        if mode == "separate":
            return refine_separate(H_init, pairs, C_l, C_r, left, right, lm)
        return refine_similarity(procrustes_similarity(pairs), pairs, C_l, C_r, left, right, lm)

    def calibrate_rig(self, rig_id: int) -> RigCalibration:
        if rig_id in self._rigs:
            return self._rigs[rig_id]
        boards = self.dataset.boards_seen_by(rig_id, self.fitting_boards)
        if not boards:
            raise DatasetError(f"rig {rig_id} sees none of the fitting boards")
        camera = self.dataset.tof_camera(rig_id)
        views = [self.fitted_views[(b, rig_id)] for b in boards]
        tof_points = {v.board_id: refine_ranges(camera, v.tof_vertices, v.fitted_plane.plane)[1] for v in views}
        left = np.vstack([v.left_vertices for v in views])
        right = np.vstack([v.right_vertices for v in views])
        C_l, C_r, inliers = self.stereo_cameras(rig_id, left, right)

        P = triangulate_points(C_l, C_r, left, right)
        Q = np.vstack([tof_points[b] for b in boards])
        H = dlt_homography3((P, Q))
        alignment = self.align(H, (P, Q), C_l, C_r, left, right)
        logger.info(f"rig {rig_id}: {alignment.mode} alignment over {len(boards)} boards, "
                    f"rms {alignment.initial_error:.4g} -> {alignment.final_error:.4g} px")

        offsets = np.cumsum([0] + [v.vertex_count for v in views])
        stereo_points = {b: P[offsets[k]:offsets[k + 1]] for k, b in enumerate(boards)}
        rig = Rig(rig_id, camera, C_l, C_r, tof_to_rgb=alignment.homography.inverse,
                  refined_left=alignment.refined_left, refined_right=alignment.refined_right)
        result = RigCalibration(rig, alignment, boards, stereo_points, tof_points, inliers)
        self._rigs[rig_id] = result
        return result

    def estimate_edge(self, i: int, j: int):
        """`G_ij` from the stereo reconstructions of the fitting boards both rigs see, if enough."""
        shared = self.dataset.shared_boards(i, j, self.fitting_boards)
        if len(shared) < self.config.min_overlap_boards:
            return None, len(shared)
        rig_i = self.calibrate_rig(i)
        rig_j = self.calibrate_rig(j)
        P_i = np.vstack([rig_i.stereo_points[b] for b in shared])
        P_j = np.vstack([rig_j.stereo_points[b] for b in shared])
        if self.config.projective_network:
            return estimate_projective((P_i, P_j)), len(shared)
        return estimate_rigid((P_i, P_j)), len(shared)

    @property
    def network(self) -> NetworkGraph:
        if self._network is None:
            rig_ids = self.dataset.rig_ids
            for r in tqdm(rig_ids, desc="calibrating rigs"):
                self.calibrate_rig(r)
            graph = NetworkGraph([self._rigs[r].rig for r in rig_ids], self.config.reference_rig)
            for i in rig_ids:
                for j in rig_ids:
                    if i >= j:
                        continue
                    G, boards = self.estimate_edge(i, j)
                    if G is None:
                        logger.info(f"rigs {i} and {j} share {boards} fitting boards, no direct edge")
                        continue
                    graph.add_edge(i, j, G, boards)
            graph.finalize()
            for i in rig_ids:
                for j in rig_ids:
                    if i < j:
                        graph.transform(i, j)
            self._network = graph
        return self._network

    def _edge_records(self) -> List[EdgeRecord]:
        graph = self.network
        records = []
        for (i, j), edge in sorted(graph.edges.items()):
            if i >= j:
                continue
            discrepancy = graph.edge_discrepancy(i, j)
            if discrepancy is not None:
                logger.info(f"edge {i}:{j} differs from its best alternative chain by {discrepancy}")
            kind = "rigid" if isinstance(edge.transform, RigidTransform3) else "projective"
            records.append(EdgeRecord(i, j, matrix_to_list(edge.transform.matrix), kind, edge.provenance,
                                      edge.boards, discrepancy))
        return records

    def _rig_record(self, rig_id: int) -> RigRecord:
        calibration = self._rigs[rig_id]
        rig, alignment = calibration.rig, calibration.alignment

        def entries(camera):
            return None if camera is None else matrix_to_list(camera.entries)

        return RigRecord(
            id=rig_id,
            tof=entries(rig.tof_camera),
            left=entries(rig.left_camera),
            right=entries(rig.right_camera),
            tof_to_rgb=matrix_to_list(rig.tof_to_rgb.matrix),
            mode=alignment.mode,
            iterations=alignment.iterations,
            converged=alignment.converged,
            initial_error=alignment.initial_error,
            final_error=alignment.final_error,
            initial_cost=alignment.initial_cost,
            final_cost=alignment.final_cost,
            raw_parameters=alignment.raw_parameters,
            effective_parameters=alignment.effective_parameters,
            refined_left=entries(rig.refined_left),
            refined_right=entries(rig.refined_right),
            stereo_inliers=calibration.stereo_inliers,
            fitting_boards=calibration.fitting_boards,
            plane_inliers=[self.fitted_views[(b, rig_id)].fitted_plane.inlier_count
                           for b in calibration.fitting_boards],
        )

    @property
    def bundle(self) -> CalibrationBundle:
        if self._bundle is None:
            edges = self._edge_records()
            self._bundle = CalibrationBundle(
                version=pyxcal.__version__,
                config=self.config,
                config_hash=self.config.digest(),
                input_hash=self.input_hash,
                reference_rig=self.config.reference_rig,
                rigs=[self._rig_record(r) for r in self.dataset.rig_ids],
                edges=edges,
                fitting_boards=self.fitting_boards,
                evaluation_boards=self.evaluation_boards,
            )
        return self._bundle
