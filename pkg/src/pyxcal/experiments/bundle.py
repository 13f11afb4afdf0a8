"""
Calibration bundles: everything `calibrate` estimated, in a JSON file that `evaluate` reads back.

Matrices are stored row-major as lists of floats. Python writes floats with the shortest
representation that reads back to the same double, so a bundle survives a save/load cycle bit
for bit.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from dataclasses_json import dataclass_json
from dataclasses_json.undefined import UndefinedParameterError

import pyxcal
from pyxcal.errors import DatasetError
from pyxcal.experiments.config import PipelineConfig
from pyxcal.geom import CameraMatrix, Homography3, RigidTransform3
from pyxcal.network import NetworkGraph, Rig
from pyxcal.util import list_to_matrix, write_json

logger = logging.getLogger(__name__)


@dataclass_json
@dataclass
class RigRecord:
    id: int
    #: The cameras used for the calibration; projective ones in projective stereo mode.
    tof: List[float]
    left: List[float]
    right: List[float]
    #: `H_i^-1`, mapping range points into the stereo frame.
    tof_to_rgb: List[float]
    mode: str
    iterations: int = 0
    converged: bool = True
    initial_error: float = 0.0
    final_error: float = 0.0
    initial_cost: float = 0.0
    final_cost: float = 0.0
    raw_parameters: int = 0
    effective_parameters: int = 0
    refined_left: Optional[List[float]] = None
    refined_right: Optional[List[float]] = None
    #: Sampson inlier count of the fundamental matrix, in projective stereo mode.
    stereo_inliers: Optional[int] = None
    fitting_boards: List[int] = field(default_factory=list)
    plane_inliers: List[int] = field(default_factory=list)

    def rig(self) -> Rig:
        def camera(values):
            return None if values is None else CameraMatrix(list_to_matrix(values, 3, 4))

        return Rig(self.id, camera(self.tof), camera(self.left), camera(self.right),
                   tof_to_rgb=Homography3(list_to_matrix(self.tof_to_rgb, 4, 4)),
                   refined_left=camera(self.refined_left), refined_right=camera(self.refined_right))


@dataclass_json
@dataclass
class EdgeRecord:
    i: int
    j: int
    #: `G_ij`, row-major.
    transform: List[float]
    kind: str
    provenance: str
    boards: int = 0
    discrepancy: Optional[Dict[str, float]] = None

    def as_transform(self):
        m = list_to_matrix(self.transform, 4, 4)
        return RigidTransform3.from_matrix(m) if self.kind == "rigid" else Homography3(m)


@dataclass_json
@dataclass
class CalibrationBundle:
    version: str
    config: PipelineConfig
    config_hash: str
    input_hash: str
    reference_rig: int
    rigs: List[RigRecord]
    edges: List[EdgeRecord]
    fitting_boards: List[int]
    evaluation_boards: List[int]

    def save(self, path: Path):
        write_json(self.to_dict(), Path(path))

    @classmethod
    def load(cls, path: Path) -> "CalibrationBundle":
        path = Path(path)
        if not path.is_file():
            raise DatasetError(f"bundle {path} does not exist")
        try:
            data = json.loads(path.read_text())
        except ValueError as e:
            raise DatasetError(f"cannot read bundle {path}: {e}") from e
        if "version" not in data:
            raise DatasetError(f"bundle {path} has no version")
        if data["version"] != pyxcal.__version__:
            logger.warning(f"bundle {path} was written by pyxcal {data['version']}, this is {pyxcal.__version__}")
        try:
            return cls.from_dict(data)
        except (KeyError, ValueError, TypeError, UndefinedParameterError) as e:
            raise DatasetError(f"cannot read bundle {path}: {e}") from e

    def rig(self, rig_id: int) -> RigRecord:
        return next(r for r in self.rigs if r.id == rig_id)

    def to_network(self) -> NetworkGraph:
        """Rebuild the network from the direct edges; composed edges are recomputed on demand."""
        graph = NetworkGraph([r.rig() for r in self.rigs], self.reference_rig)
        for edge in self.edges:
            if edge.provenance == "direct" and edge.i < edge.j:
                graph.add_edge(edge.i, edge.j, edge.as_transform(), edge.boards)
        return graph.finalize()
