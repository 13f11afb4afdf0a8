"""
Chequerboard datasets: detected board vertices in every camera of every rig, and the raw range
samples inside each board's hull in the range image.

On disk, a dataset is a directory holding:

- `rigs.json`: the input cameras of each rig and the board layout,
- `vertices.csv`: one row per detected vertex
  (`board_id, rig_id, camera, vertex_id, x_px, y_px, range_mm`), `camera` being one of
  `tof`, `left` or `right`,
- `ranges/rig{r}_board{b}.csv`: one row per hull pixel (`x_px, y_px, range_mm, hull_id`,
  optionally `region`).

>>> from pathlib import Path
>>> from pyxcal.datasets import BoardDataset
>>> dataset = BoardDataset.from_dir(Path("scene"))
>>> dataset.shared_boards(0, 1)
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from dataclasses_json import Undefined, dataclass_json
from dataclasses_json.undefined import UndefinedParameterError

from pyxcal.errors import DatasetError
from pyxcal.geom import CameraMatrix
from pyxcal.network import Rig
from pyxcal.tof import DEFAULT_MAX_RANGE_MM, FittedPlane
from pyxcal.util import list_to_matrix, matrix_to_list, read_csv, write_csv, write_json

logger = logging.getLogger(__name__)

CAMERAS = ("tof", "left", "right")
VERTEX_COLUMNS = ["board_id", "rig_id", "camera", "vertex_id", "x_px", "y_px", "range_mm"]
RANGE_COLUMNS = ["x_px", "y_px", "range_mm", "hull_id", "region"]

#: Hull id of range pixels outside every board.
NO_HULL = -1


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class BoardSpec:
    """
    A chequerboard with `columns x rows` inner vertices, i.e. `(columns + 1) x (rows + 1)`
    squares. Board coordinates are centred on the middle of the board, in millimetres.
    """
    columns: int = 7
    rows: int = 5
    square_mm: float = 60.0

    @property
    def vertex_count(self) -> int:
        return self.columns * self.rows

    @property
    def half_extent(self) -> Tuple[float, float]:
        return (self.columns + 1) * self.square_mm / 2.0, (self.rows + 1) * self.square_mm / 2.0

    def vertices(self) -> np.ndarray:
        """`(columns * rows, 3)` vertex coordinates on the board plane, row by row."""
        c, r = np.meshgrid(np.arange(self.columns), np.arange(self.rows))
        x = (c.ravel() - (self.columns - 1) / 2.0) * self.square_mm
        y = (r.ravel() - (self.rows - 1) / 2.0) * self.square_mm
        return np.column_stack([x, y, np.zeros_like(x)])

    def contains(self, xy: np.ndarray) -> np.ndarray:
        hx, hy = self.half_extent
        xy = np.atleast_2d(xy)
        return (np.abs(xy[:, 0]) <= hx) & (np.abs(xy[:, 1]) <= hy)

    def regions(self, xy: np.ndarray) -> np.ndarray:
        """`black` or `white` for board-plane coordinates, by square parity."""
        hx, hy = self.half_extent
        xy = np.atleast_2d(xy)
        ix = np.floor((xy[:, 0] + hx) / self.square_mm).astype(int)
        iy = np.floor((xy[:, 1] + hy) / self.square_mm).astype(int)
        return np.where((ix + iy) % 2 == 0, "black", "white")


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class RigCameras:
    """Input cameras of one rig, serialized as row-major 3x4 matrices."""
    id: int
    tof: List[float]
    left: List[float]
    right: List[float]
    tof_image_size: List[int] = field(default_factory=lambda: [176, 144])
    rgb_image_size: List[int] = field(default_factory=lambda: [1624, 1224])
    max_range_mm: float = DEFAULT_MAX_RANGE_MM

    def camera(self, name: str) -> CameraMatrix:
        return CameraMatrix(list_to_matrix(getattr(self, name), 3, 4))

    def rig(self) -> Rig:
        return Rig(self.id, self.camera("tof"), self.camera("left"), self.camera("right"))

    @classmethod
    def from_cameras(cls, rig_id: int, tof: CameraMatrix, left: CameraMatrix, right: CameraMatrix,
                     **kwargs) -> "RigCameras":
        return cls(rig_id, matrix_to_list(tof.entries), matrix_to_list(left.entries),
                   matrix_to_list(right.entries), **kwargs)


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class DatasetManifest:
    board: BoardSpec
    rigs: List[RigCameras]


@dataclass(eq=False)
class BoardView:
    """
    One board seen by one rig: its vertices in the range image and both colour images, and the
    hull of range samples it covers. Vertex arrays share the board's vertex order.
    """
    board_id: int
    rig_id: int
    tof_vertices: np.ndarray
    left_vertices: np.ndarray
    right_vertices: np.ndarray
    hull_pixels: np.ndarray
    hull_ranges: np.ndarray
    hull_regions: np.ndarray = None
    tof_vertex_ranges: np.ndarray = None
    fitted_plane: Optional[FittedPlane] = None

    def __post_init__(self):
        n = len(self.tof_vertices)
        if not (len(self.left_vertices) == len(self.right_vertices) == n):
            raise DatasetError(f"board {self.board_id} in rig {self.rig_id}: vertex counts differ between cameras")
        if len(self.hull_pixels) != len(self.hull_ranges):
            raise DatasetError(f"board {self.board_id} in rig {self.rig_id}: hull pixels and ranges differ in number")
        if self.hull_regions is None:
            self.hull_regions = np.full(len(self.hull_pixels), "unknown", dtype=object)
        if self.tof_vertex_ranges is None:
            self.tof_vertex_ranges = np.full(n, np.nan)

    @property
    def vertex_count(self) -> int:
        return len(self.tof_vertices)

    def with_plane(self, plane: FittedPlane) -> "BoardView":
        return replace(self, fitted_plane=plane)

    def with_ranges(self, ranges: np.ndarray) -> "BoardView":
        """The same view with new raw hull ranges; the fitted plane is kept."""
        return replace(self, hull_ranges=np.asarray(ranges, dtype=float))

    def side_vertices(self, side: str) -> np.ndarray:
        return self.left_vertices if side == "left" else self.right_vertices


class BoardDataset:
    """
    All board views of a scene, keyed by `(board_id, rig_id)`.
    """

    def __init__(self, board: BoardSpec, rigs: Iterable[RigCameras], views: Iterable[BoardView]):
        self.board = board
        self.rigs: Dict[int, RigCameras] = {r.id: r for r in rigs}
        self.views: Dict[Tuple[int, int], BoardView] = {}
        for view in views:
            if view.rig_id not in self.rigs:
                raise DatasetError(f"board {view.board_id} refers to unknown rig {view.rig_id}")
            self.views[(view.board_id, view.rig_id)] = view

    @property
    def boards(self) -> List[int]:
        return sorted({b for b, _ in self.views})

    @property
    def rig_ids(self) -> List[int]:
        return sorted(self.rigs)

    def view(self, board_id: int, rig_id: int) -> Optional[BoardView]:
        return self.views.get((board_id, rig_id))

    def boards_seen_by(self, rig_id: int, boards: Iterable[int] = None) -> List[int]:
        allowed = None if boards is None else set(boards)
        return sorted(b for b, r in self.views if r == rig_id and (allowed is None or b in allowed))

    def shared_boards(self, i: int, j: int, boards: Iterable[int] = None) -> List[int]:
        return sorted(set(self.boards_seen_by(i, boards)) & set(self.boards_seen_by(j, boards)))

    def rig(self, rig_id: int) -> Rig:
        return self.rigs[rig_id].rig()

    def tof_camera(self, rig_id: int) -> CameraMatrix:
        return self.rigs[rig_id].camera("tof")

    def replace_views(self, views: Iterable[BoardView]) -> "BoardDataset":
        """A copy of the dataset with some views replaced."""
        updated = dict(self.views)
        for view in views:
            updated[(view.board_id, view.rig_id)] = view
        return BoardDataset(self.board, self.rigs.values(), updated.values())

    # --------------------------------------
    # On-disk format.

    @staticmethod
    def range_path(path: Path, rig_id: int, board_id: int) -> Path:
        return path / "ranges" / f"rig{rig_id}_board{board_id}.csv"

    @classmethod
    def from_dir(cls, path: Path) -> "BoardDataset":
        """
        Load a dataset directory. Missing or malformed files raise `DatasetError` naming the file.
        """
        path = Path(path)
        if not path.is_dir():
            raise DatasetError(f"dataset directory {path} does not exist")
        manifest_path = path / "rigs.json"
        vertices_path = path / "vertices.csv"
        for required in (manifest_path, vertices_path):
            if not required.is_file():
                raise DatasetError(f"missing dataset file {required}")
        try:
            manifest = DatasetManifest.from_json(manifest_path.read_text())
        except (KeyError, ValueError, TypeError, UndefinedParameterError) as e:
            raise DatasetError(f"cannot read {manifest_path}: {e}") from e

        vertices = read_csv(vertices_path)
        missing = set(VERTEX_COLUMNS[:-1]) - set(vertices.columns)
        if missing:
            raise DatasetError(f"{vertices_path} lacks columns {sorted(missing)}")
        if "range_mm" not in vertices.columns:
            vertices["range_mm"] = np.nan
        unknown = set(vertices["camera"]) - set(CAMERAS)
        if unknown:
            raise DatasetError(f"{vertices_path} names unknown cameras {sorted(unknown)}")

        views = []
        for (board_id, rig_id), group in vertices.groupby(["board_id", "rig_id"], sort=True):
            per_camera = {}
            for camera in CAMERAS:
                rows = group[group["camera"] == camera].sort_values("vertex_id")
                if len(rows) == 0:
                    raise DatasetError(f"{vertices_path}: board {board_id} in rig {rig_id} has no {camera} vertices")
                per_camera[camera] = rows
            range_file = cls.range_path(path, int(rig_id), int(board_id))
            if not range_file.is_file():
                raise DatasetError(f"missing range file {range_file}")
            hull = _read_hull(range_file, int(board_id), per_camera["tof"][["x_px", "y_px"]].to_numpy(float))
            views.append(BoardView(
                board_id=int(board_id),
                rig_id=int(rig_id),
                tof_vertices=per_camera["tof"][["x_px", "y_px"]].to_numpy(float),
                left_vertices=per_camera["left"][["x_px", "y_px"]].to_numpy(float),
                right_vertices=per_camera["right"][["x_px", "y_px"]].to_numpy(float),
                tof_vertex_ranges=per_camera["tof"]["range_mm"].to_numpy(float),
                hull_pixels=hull[["x_px", "y_px"]].to_numpy(float),
                hull_ranges=hull["range_mm"].to_numpy(float),
                hull_regions=hull["region"].to_numpy(object),
            ))
        logger.info(f"loaded {len(views)} board views of {len(manifest.rigs)} rigs from {path}")
        return cls(manifest.board, manifest.rigs, views)

    def to_dir(self, path: Path):
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        manifest = DatasetManifest(self.board, [self.rigs[r] for r in self.rig_ids])
        write_json(manifest.to_dict(), path / "rigs.json")

        rows = []
        for (board_id, rig_id) in sorted(self.views):
            view = self.views[(board_id, rig_id)]
            for camera, points in (("tof", view.tof_vertices), ("left", view.left_vertices),
                                   ("right", view.right_vertices)):
                for k, (x, y) in enumerate(points):
                    rho = view.tof_vertex_ranges[k] if camera == "tof" else np.nan
                    rows.append((board_id, rig_id, camera, k, x, y, rho))
            write_csv(pd.DataFrame({
                "x_px": view.hull_pixels[:, 0],
                "y_px": view.hull_pixels[:, 1],
                "range_mm": view.hull_ranges,
                "hull_id": board_id,
                "region": view.hull_regions,
            }, columns=RANGE_COLUMNS), self.range_path(path, rig_id, board_id))
        write_csv(pd.DataFrame(rows, columns=VERTEX_COLUMNS), path / "vertices.csv")


def _read_hull(range_file: Path, board_id: int, tof_vertices: np.ndarray) -> pd.DataFrame:
    samples = read_csv(range_file)
    missing = {"x_px", "y_px", "range_mm"} - set(samples.columns)
    if missing:
        raise DatasetError(f"{range_file} lacks columns {sorted(missing)}")
    if "region" not in samples.columns:
        samples["region"] = "unknown"
    if "hull_id" in samples.columns:
        hull = samples[samples["hull_id"] == board_id]
    else:
        from pyxcal.evaluation.metrics import hull_from_vertices
        hull = samples[hull_from_vertices(tof_vertices, samples[["x_px", "y_px"]].to_numpy(float))]
    hull = hull[hull["range_mm"] > 0]
    if len(hull) == 0:
        raise DatasetError(f"{range_file} holds no range samples for board {board_id}")
    return hull.reset_index(drop=True)
