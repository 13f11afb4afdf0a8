"""
Synthetic scenes with known ground truth.

A scene is a row of rigs looking at a common target, and a set of chequerboards placed in
front of them. Every rig sees the boards through its range camera and its stereo pair; the
generator emits the detections in the dataset format read by `BoardDataset.from_dir`, along
with the true homographies `H_i`, rig transforms `G_ij`, board planes and outlier labels.

>>> from pyxcal.datasets import NoiseConfig, SceneConfig, generate_dataset
>>> config = SceneConfig(rig_count=2, board_count=8, noise=NoiseConfig.noise_free())
>>> dataset, truth = generate_dataset(config)
>>> len(dataset.boards)
8
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from dataclasses_json import Undefined, dataclass_json
from dataclasses_json.undefined import UndefinedParameterError
from scipy.spatial.transform import Rotation
from tqdm import tqdm

from pyxcal.errors import BehindCameraError, ConfigError, EmptySceneError
from pyxcal.geom import CameraMatrix, HPoint3, Homography3, RigidTransform3, apply_homography, as_points3
from pyxcal.align.similarity import inverse_disparity_homography
from pyxcal.tof import DEFAULT_MAX_RANGE_MM, RangeSample, point_ranges, ray_directions
from pyxcal.datasets.board import BoardDataset, BoardSpec, BoardView, RigCameras
from pyxcal.util import list_to_matrix, matrix_to_list, write_json

logger = logging.getLogger(__name__)

POSE_PRESETS = ("frontal", "slanted")

#: Boards seen at more than this angle from their normal are not detected.
MAX_OBLIQUITY_DEG = 80.0

#: Attempts at placing a random board before it is dropped.
MAX_POSE_ATTEMPTS = 50

# Random streams, so that e.g. the range noise can be redrawn without moving the boards.
_POSE_STREAM, _VERTEX_STREAM, _RANGE_STREAM = 0, 1, 2


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class NoiseConfig:
    rgb_vertex_sigma_px: float = 0.1
    tof_vertex_sigma_px: float = 0.3
    range_sigma_mm: float = 10.0
    #: Fraction of hull range samples displaced by a gross error.
    outlier_rate: float = 0.05
    outlier_scale_mm: float = 300.0
    #: Range noise multiplier on black squares, which return little of the emitted signal.
    black_square_range_sigma_multiplier: float = 3.0
    #: Row-major 4x4 homography applied to every point in the range camera frame.
    depth_distortion: Optional[List[float]] = None
    #: `(c0, c1)` of an inverse-disparity depth distortion.
    inverse_disparity: Optional[List[float]] = None
    #: Seed of the range noise alone. Defaults to the scene seed.
    range_seed: Optional[int] = None

    @classmethod
    def noise_free(cls) -> "NoiseConfig":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 1.0)

    def validate(self):
        sigmas = (self.rgb_vertex_sigma_px, self.tof_vertex_sigma_px, self.range_sigma_mm,
                  self.outlier_scale_mm, self.black_square_range_sigma_multiplier)
        if any(s < 0 for s in sigmas):
            raise ConfigError("noise magnitudes must not be negative")
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise ConfigError(f"outlier_rate must lie in [0, 1], got {self.outlier_rate}")
        if self.depth_distortion is not None and self.inverse_disparity is not None:
            raise ConfigError("give either depth_distortion or inverse_disparity, not both")
        if self.depth_distortion is not None and len(self.depth_distortion) != 16:
            raise ConfigError("depth_distortion needs 16 values")
        if self.inverse_disparity is not None and len(self.inverse_disparity) != 2:
            raise ConfigError("inverse_disparity needs the two values (c0, c1)")

    def distortion(self) -> Homography3:
        if self.depth_distortion is not None:
            return Homography3(list_to_matrix(self.depth_distortion, 4, 4))
        if self.inverse_disparity is not None:
            return inverse_disparity_homography(*self.inverse_disparity)
        return Homography3.identity()


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class SceneConfig:
    rig_count: int = 3
    rgb_focal_px: float = 640.0
    rgb_image_size: List[int] = field(default_factory=lambda: [1624, 1224])
    tof_focal_px: float = 330.0
    tof_image_size: List[int] = field(default_factory=lambda: [176, 144])
    max_range_mm: float = DEFAULT_MAX_RANGE_MM
    stereo_baseline_mm: float = 170.0
    rig_spacing_mm: float = 1070.0
    #: Position of the range camera in the frame of the left colour camera.
    tof_offset_mm: List[float] = field(default_factory=lambda: [85.0, 60.0, 0.0])
    tof_rotvec: List[float] = field(default_factory=lambda: [0.01, -0.015, 0.005])
    board: BoardSpec = field(default_factory=BoardSpec)
    board_count: int = 17
    pose_preset: str = "frontal"
    #: Explicit board poses, each a rotation vector (radians) then a translation (mm), mapping
    #: board coordinates into the world. Replaces the random poses when given.
    board_poses: Optional[List[List[float]]] = None
    target_mm: List[float] = field(default_factory=lambda: [0.0, 0.0, 2500.0])
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0

    @classmethod
    def from_file(cls, path: Path) -> "SceneConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"scene configuration {path} does not exist")
        try:
            config = cls.from_dict(json.loads(path.read_text()))
        except (KeyError, ValueError, TypeError, UndefinedParameterError) as e:
            raise ConfigError(f"cannot read scene configuration {path}: {e}") from e
        config.validate()
        return config

    def validate(self):
        if self.rig_count < 1:
            raise ConfigError("a scene needs at least one rig")
        if self.board_count < 0:
            raise ConfigError("board_count must not be negative")
        if min(self.rgb_focal_px, self.tof_focal_px, self.max_range_mm, self.stereo_baseline_mm) <= 0:
            raise ConfigError("focal lengths, baseline and maximum range must be positive")
        if min(*self.rgb_image_size, *self.tof_image_size) <= 0 or len(self.rgb_image_size) != 2 \
                or len(self.tof_image_size) != 2:
            raise ConfigError("image sizes must be two positive integers")
        if self.board.columns < 2 or self.board.rows < 2 or self.board.square_mm <= 0:
            raise ConfigError("boards need at least 2x2 vertices and a positive square size")
        if self.pose_preset not in POSE_PRESETS:
            raise ConfigError(f"pose_preset must be one of {POSE_PRESETS}, got {self.pose_preset!r}")
        if self.board_poses is not None and any(len(p) != 6 for p in self.board_poses):
            raise ConfigError("each board pose needs six values")
        self.noise.validate()

    # --------------------------------------
    # Cameras.

    def rgb_intrinsics(self) -> np.ndarray:
        w, h = self.rgb_image_size
        return np.array([[self.rgb_focal_px, 0, w / 2.0], [0, self.rgb_focal_px, h / 2.0], [0, 0, 1]])

    def tof_intrinsics(self) -> np.ndarray:
        w, h = self.tof_image_size
        return np.array([[self.tof_focal_px, 0, w / 2.0], [0, self.tof_focal_px, h / 2.0], [0, 0, 1]])

    def tof_pose(self) -> RigidTransform3:
        """`M`, mapping points of the stereo frame into the undistorted range camera frame."""
        R = Rotation.from_rotvec(self.tof_rotvec).as_matrix()
        return RigidTransform3(R, -R @ np.asarray(self.tof_offset_mm, dtype=float))

    def rig_pose(self, index: int) -> RigidTransform3:
        """`T_i`, mapping world points into the frame of rig `i`. World `y` points down."""
        centre = np.array([(index - (self.rig_count - 1) / 2.0) * self.rig_spacing_mm, 0.0, 0.0])
        z = np.asarray(self.target_mm, dtype=float) - centre
        z /= np.linalg.norm(z)
        x = np.cross([0.0, 1.0, 0.0], z)
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        R = np.vstack([x, y, z])
        return RigidTransform3(R, -R @ centre)


@dataclass_json
@dataclass
class RigTruth:
    id: int
    #: `H_i`, row-major.
    homography: List[float]
    #: `T_i`, world to rig, row-major.
    rig_pose: List[float]


@dataclass_json
@dataclass
class BoardTruth:
    id: int
    #: Board to world, row-major.
    pose: List[float]
    visible_in: List[int]


@dataclass_json
@dataclass
class ViewTruth:
    board_id: int
    rig_id: int
    #: Board plane in the (distorted) range camera frame.
    plane: List[float]
    hull_size: int
    #: Hull sample indices carrying a gross range error.
    outliers: List[int]


@dataclass_json
@dataclass
class GroundTruth:
    rigs: List[RigTruth]
    boards: List[BoardTruth]
    views: List[ViewTruth]
    dropped_boards: List[int] = field(default_factory=list)

    def homography(self, rig_id: int) -> Homography3:
        rig = next(r for r in self.rigs if r.id == rig_id)
        return Homography3(list_to_matrix(rig.homography, 4, 4))

    def transform(self, i: int, j: int) -> RigidTransform3:
        """`G_ij = T_i T_j^-1`."""
        poses = {r.id: RigidTransform3.from_matrix(list_to_matrix(r.rig_pose, 4, 4)) for r in self.rigs}
        return poses[i] @ poses[j].inverse

    def view(self, board_id: int, rig_id: int) -> ViewTruth:
        return next(v for v in self.views if v.board_id == board_id and v.rig_id == rig_id)

    def outlier_mask(self, board_id: int, rig_id: int) -> np.ndarray:
        view = self.view(board_id, rig_id)
        mask = np.zeros(view.hull_size, dtype=bool)
        mask[view.outliers] = True
        return mask


def apply_depth_distortion(H_d: Homography3, Q: HPoint3, camera: CameraMatrix,
                           max_range: float = DEFAULT_MAX_RANGE_MM) -> RangeSample:
    """
    The range sample a distorting range camera reports for the point `Q`: `H_d Q` projected
    through `camera`, with its distance from the optical centre as the range.
    """
    distorted = apply_homography(H_d, Q)
    if abs(distorted.w) <= 1e-15 * np.linalg.norm(distorted.coords):
        raise BehindCameraError("the distorted point lies at infinity")
    if camera.depth(distorted.coords[None, :])[0] <= 0:
        raise BehindCameraError("the distorted point lies behind the camera")
    x, y = camera.project(distorted.coords[None, :])[0]
    return RangeSample.at(x, y, point_ranges(camera, distorted.coords[None, :])[0], max_range)


class _Scene:
    """Fixed geometry of a scene: cameras and the chain of transforms of every rig."""

    def __init__(self, config: SceneConfig):
        self.config = config
        K = config.rgb_intrinsics()
        self.left = CameraMatrix.from_intrinsics(K)
        self.right = CameraMatrix.from_intrinsics(K, np.eye(3), [-config.stereo_baseline_mm, 0.0, 0.0])
        self.tof = CameraMatrix.from_intrinsics(config.tof_intrinsics())
        self.distortion = config.noise.distortion()
        self.tof_pose = config.tof_pose()
        self.rig_poses = [config.rig_pose(i) for i in range(config.rig_count)]
        self.vertices = as_points3(config.board.vertices())

    def homography(self, rig: int) -> np.ndarray:
        return self.distortion.matrix @ self.tof_pose.matrix

    def board_to_rig(self, rig: int, pose: np.ndarray) -> np.ndarray:
        return self.rig_poses[rig].matrix @ pose

    def board_to_tof(self, rig: int, pose: np.ndarray) -> np.ndarray:
        return self.homography(rig) @ self.board_to_rig(rig, pose)

    def sees(self, rig: int, pose: np.ndarray) -> bool:
        """All vertices detected by the three cameras of the rig."""
        to_rig = self.board_to_rig(rig, pose)
        normal = to_rig[:3, 2]
        centre = to_rig[:3, 3]
        if normal @ centre <= np.cos(np.radians(MAX_OBLIQUITY_DEG)) * np.linalg.norm(centre):
            return False
        config = self.config
        P = self.vertices @ to_rig.T
        Q = self.vertices @ self.board_to_tof(rig, pose).T
        checks = ((self.left, P, config.rgb_image_size), (self.right, P, config.rgb_image_size),
                  (self.tof, Q, config.tof_image_size))
        for camera, points, (w, h) in checks:
            if np.any(points[:, 3] <= 0) or np.any(camera.depth(points) <= 0):
                return False
            p = camera.project(points)
            if np.any(p < 0) or np.any(p[:, 0] > w - 1) or np.any(p[:, 1] > h - 1):
                return False
        return bool(np.all(point_ranges(self.tof, Q) <= config.max_range_mm))

    def hull(self, rig: int, pose: np.ndarray):
        """
        Range pixels whose rays meet the board: pixels, true ranges, board coordinates and the
        board plane in the range camera frame.
        """
        w, h = self.config.tof_image_size
        xs, ys = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
        pixels = np.column_stack([xs.ravel(), ys.ravel()])
        centre, d = ray_directions(self.tof, pixels)
        L = self.board_to_tof(rig, pose)
        plane = scipy.linalg.inv(L).T @ np.array([0.0, 0.0, 1.0, 0.0])
        plane /= np.linalg.norm(plane[:3])
        den = d @ plane[:3]
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = -(plane[:3] @ centre + plane[3]) / den
        hit = np.isfinite(rho) & (rho > 0) & (rho <= self.config.max_range_mm)
        Q = np.hstack([centre + rho[hit, None] * d[hit], np.ones((int(hit.sum()), 1))])
        local = Q @ scipy.linalg.inv(L).T
        local = local[:, :3] / local[:, 3:4]
        inside = self.config.board.contains(local[:, :2])
        return pixels[hit][inside], rho[hit][inside], local[inside, :2], plane


def _random_pose(config: SceneConfig, rng: np.random.Generator, index: int) -> np.ndarray:
    target = np.asarray(config.target_mm, dtype=float)
    centre = target + [rng.uniform(-150, 150), rng.uniform(-100, 100), rng.uniform(-400, 400)]
    tilt = rng.uniform(-25, 25, size=2)
    if config.pose_preset == "slanted" and index % 3 == 2:
        tilt[1] = rng.choice([-1.0, 1.0]) * rng.uniform(61, 68)
    m = np.eye(4)
    m[:3, :3] = Rotation.from_euler("xy", tilt, degrees=True).as_matrix()
    m[:3, 3] = centre
    return m


def _explicit_pose(values: List[float]) -> np.ndarray:
    return RigidTransform3.from_rotvec(values[:3], values[3:]).matrix


def _place_boards(config: SceneConfig, scene: _Scene) -> Tuple[List[Tuple[int, np.ndarray, List[int]]], List[int]]:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, _POSE_STREAM])))
    placed, dropped = [], []
    explicit = config.board_poses is not None
    count = len(config.board_poses) if explicit else config.board_count
    for b in range(count):
        for _ in range(1 if explicit else MAX_POSE_ATTEMPTS):
            pose = _explicit_pose(config.board_poses[b]) if explicit else _random_pose(config, rng, b)
            visible = [r for r in range(config.rig_count) if scene.sees(r, pose)]
            if visible:
                placed.append((b, pose, visible))
                break
        else:
            logger.warning(f"board {b} is not visible from any rig and was dropped")
            dropped.append(b)
    return placed, dropped


def generate_dataset(config: SceneConfig) -> Tuple[BoardDataset, GroundTruth]:
    """
    Generate the board views of a scene. The result depends on the configuration alone; the
    range noise is drawn from its own stream so that `noise.range_seed` changes nothing else.
    """
    config.validate()
    scene = _Scene(config)
    noise = config.noise
    placed, dropped = _place_boards(config, scene)
    if not placed:
        raise EmptySceneError("no board is visible from any rig")

    vertex_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, _VERTEX_STREAM])))
    range_seed = config.seed if noise.range_seed is None else noise.range_seed
    range_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([range_seed, _RANGE_STREAM])))

    views, view_truths = [], []
    for board_id, pose, visible in tqdm(placed, desc="generating boards", leave=False):
        for rig in visible:
            to_rig = scene.board_to_rig(rig, pose)
            P = scene.vertices @ to_rig.T
            Q = scene.vertices @ scene.board_to_tof(rig, pose).T
            n = len(P)
            left = scene.left.project(P) + vertex_rng.normal(size=(n, 2)) * noise.rgb_vertex_sigma_px
            right = scene.right.project(P) + vertex_rng.normal(size=(n, 2)) * noise.rgb_vertex_sigma_px
            tof = scene.tof.project(Q) + vertex_rng.normal(size=(n, 2)) * noise.tof_vertex_sigma_px
            vertex_ranges = point_ranges(scene.tof, Q) + vertex_rng.normal(size=n) * noise.range_sigma_mm

            pixels, rho, local, plane = scene.hull(rig, pose)
            m = len(rho)
            regions = config.board.regions(local)
            sigma = np.where(regions == "black",
                             noise.range_sigma_mm * noise.black_square_range_sigma_multiplier,
                             noise.range_sigma_mm)
            gaussian = range_rng.normal(size=m)
            outliers = range_rng.random(m) < noise.outlier_rate
            signs = range_rng.choice([-1.0, 1.0], size=m)
            magnitudes = range_rng.uniform(0.5, 1.5, size=m) * noise.outlier_scale_mm
            ranges = rho + gaussian * sigma + np.where(outliers, signs * magnitudes, 0.0)
            ranges = np.clip(ranges, 1.0, config.max_range_mm)

            views.append(BoardView(board_id=board_id, rig_id=rig, tof_vertices=tof, left_vertices=left,
                                   right_vertices=right, hull_pixels=pixels, hull_ranges=ranges,
                                   hull_regions=regions.astype(object), tof_vertex_ranges=vertex_ranges))
            view_truths.append(ViewTruth(board_id, rig, [float(x) for x in plane], m,
                                         [int(k) for k in np.flatnonzero(outliers)]))

    rigs = [RigCameras.from_cameras(r, scene.tof, scene.left, scene.right,
                                    tof_image_size=list(config.tof_image_size),
                                    rgb_image_size=list(config.rgb_image_size),
                                    max_range_mm=config.max_range_mm)
            for r in range(config.rig_count)]
    truth = GroundTruth(
        rigs=[RigTruth(r, matrix_to_list(scene.homography(r)), matrix_to_list(scene.rig_poses[r].matrix))
              for r in range(config.rig_count)],
        boards=[BoardTruth(b, matrix_to_list(pose), visible) for b, pose, visible in placed],
        views=view_truths,
        dropped_boards=dropped,
    )
    logger.info(f"generated {len(views)} views of {len(placed)} boards in {config.rig_count} rigs")
    return BoardDataset(config.board, rigs, views), truth


def write_dataset(dataset: BoardDataset, truth: GroundTruth, config: SceneConfig, path: Path):
    """Write the dataset with the configuration and the ground truth alongside."""
    path = Path(path)
    dataset.to_dir(path)
    write_json(config.to_dict(), path / "config.json")
    write_json(truth.to_dict(), path / "ground_truth.json")
