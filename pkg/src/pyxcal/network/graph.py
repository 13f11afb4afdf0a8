"""
Networks of rigs. Each rig holds a range camera and a stereo pair sharing one mounting;
the rigs are related by transforms `G_ij` that map points of rig `j` into the frame of rig `i`.
Transforms between rigs without a direct estimate are composed along the shortest chain,
for instance `G_02 = G_01 G_12`.

>>> from pyxcal.geom import RigidTransform3
>>> graph = NetworkGraph(rigs)
>>> graph.add_edge(0, 1, RigidTransform3.from_rotvec([0, 0, 0], [1070.0, 0, 0]))
>>> graph.add_edge(1, 2, RigidTransform3.from_rotvec([0, 0, 0], [1070.0, 0, 0]))
>>> graph.finalize()
>>> graph.transform(0, 2).translation
array([2140.,    0.,    0.])
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from pyxcal.errors import DisconnectedNetworkError, InvalidCameraError
from pyxcal.geom import CameraMatrix, Homography3, RigidTransform3, dehomogenize
from pyxcal.align.dlt import Pairs, dlt_homography3, pair_arrays
from pyxcal.align.similarity import umeyama

logger = logging.getLogger(__name__)

Transform = Union[RigidTransform3, Homography3]

SIDES = ("left", "right")


@dataclass(frozen=True, eq=False)
class Rig:
    id: int
    tof_camera: CameraMatrix
    left_camera: CameraMatrix
    right_camera: CameraMatrix
    #: `H_i^-1`, mapping range camera points into the stereo frame.
    tof_to_rgb: Optional[Homography3] = None
    refined_left: Optional[CameraMatrix] = None
    refined_right: Optional[CameraMatrix] = None

    def __post_init__(self):
        C = self.left_camera.entries
        if np.linalg.norm(C[:, 3]) > 1e-9 * np.linalg.norm(C[:, :3]):
            raise InvalidCameraError(f"the left camera of rig {self.id} must have the form (A | 0)")

    def stereo_camera(self, side: str) -> CameraMatrix:
        if side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {side!r}")
        return self.left_camera if side == "left" else self.right_camera

    def refined_camera(self, side: str) -> Optional[CameraMatrix]:
        return self.refined_left if side == "left" else self.refined_right

    @property
    def homography(self) -> Homography3:
        """`H_i`, mapping stereo points into the range camera frame."""
        if self.tof_to_rgb is None:
            raise ValueError(f"rig {self.id} has not been calibrated")
        return self.tof_to_rgb.inverse

    def tof_camera_into(self, side: str) -> CameraMatrix:
        """The camera projecting range points of this rig into its own `side` image."""
        refined = self.refined_camera(side)
        if refined is not None:
            return refined
        if self.tof_to_rgb is None:
            raise ValueError(f"rig {self.id} has not been calibrated")
        return self.stereo_camera(side) @ self.tof_to_rgb


@dataclass(frozen=True)
class Edge:
    transform: Transform
    provenance: str
    #: Number of boards behind a direct estimate.
    boards: int = 0


def estimate_rigid(pairs: Pairs) -> RigidTransform3:
    """
    Least-squares rigid transform `G_ij` from paired points, each pair holding a point in the
    frame of rig `i` followed by the same point in the frame of rig `j`.
    """
    points_i, points_j = pair_arrays(pairs)
    _, R, t = umeyama(dehomogenize(points_j), dehomogenize(points_i), with_scale=False)
    return RigidTransform3(R, t)


def estimate_projective(pairs: Pairs) -> Homography3:
    """Projective counterpart of `estimate_rigid`, by linear estimation."""
    points_i, points_j = pair_arrays(pairs)
    return dlt_homography3((points_j, points_i))


def cross_camera(rig_i: Rig, G_ij: Transform, side: str) -> CameraMatrix:
    """`C_ij = C_i G_ij`: projects points of rig `j` into the `side` image of rig `i`."""
    return rig_i.stereo_camera(side) @ G_ij


class NetworkGraph:
    """
    Rigs and the transforms between them. Edges are added as direct estimates, after which
    `finalize` checks that every rig can be reached from every other one.
    """

    def __init__(self, rigs: Sequence[Rig], reference_rig: int = 0):
        self.rigs: Dict[int, Rig] = {rig.id: rig for rig in rigs}
        if reference_rig not in self.rigs:
            raise ValueError(f"reference rig {reference_rig} is not in the network")
        self.reference_rig = reference_rig
        self._edges: Dict[Tuple[int, int], Edge] = {}
        #: Transforms composed along chains, memoized apart from the direct edges.
        self._composed: Dict[Tuple[int, int], Edge] = {}
        self._graph = nx.Graph()
        self._graph.add_nodes_from(self.rigs)
        self._finalized = False

    @property
    def edges(self) -> Dict[Tuple[int, int], Edge]:
        """Direct edges, together with the composed transforms computed so far."""
        return {**self._composed, **self._edges}

    @property
    def direct_edges(self) -> Dict[Tuple[int, int], Edge]:
        return dict(self._edges)

    @property
    def finalized(self) -> bool:
        return self._finalized

    def add_edge(self, i: int, j: int, G_ij: Transform, boards: int = 0):
        if self._finalized:
            raise ValueError("cannot add edges to a finalized network")
        if i == j or i not in self.rigs or j not in self.rigs:
            raise ValueError(f"invalid edge {i}:{j}")
        self._edges[(i, j)] = Edge(G_ij, "direct", boards)
        self._edges[(j, i)] = Edge(G_ij.inverse, "direct", boards)
        self._composed.clear()
        self._graph.add_edge(i, j)

    def finalize(self) -> "NetworkGraph":
        components = list(nx.connected_components(self._graph))
        if len(components) > 1:
            pairs = [(i, j) for i in self.rigs for j in self.rigs
                     if i < j and not nx.has_path(self._graph, i, j)]
            raise DisconnectedNetworkError(pairs)
        self._finalized = True
        return self

    def path(self, i: int, j: int) -> List[int]:
        """Fewest-hop chain of rigs from `i` to `j`, ties broken by the lowest intermediate ids."""
        try:
            return min(nx.all_shortest_paths(self._graph, i, j))
        except nx.NetworkXNoPath:
            raise DisconnectedNetworkError([(min(i, j), max(i, j))])

    def transform(self, i: int, j: int) -> Transform:
        return compose_transform(self, i, j)

    def edge_discrepancy(self, i: int, j: int) -> Optional[Dict[str, float]]:
        """
        Compare a direct edge with the shortest chain avoiding it. Returns None when there is
        no direct edge or no alternative chain.
        """
        edge = self._edges.get((i, j))
        if edge is None or edge.provenance != "direct":
            return None
        reduced = self._graph.copy()
        reduced.remove_edge(i, j)
        try:
            chain = min(nx.all_shortest_paths(reduced, i, j))
        except nx.NetworkXNoPath:
            return None
        composed = _chain_product(self._edges, chain)
        if isinstance(edge.transform, RigidTransform3) and isinstance(composed, RigidTransform3):
            angle, distance = edge.transform.difference(composed)
            return {"rotation_deg": angle, "translation_mm": distance}
        return {"homography_distance": Homography3(edge.transform.matrix).distance(composed.matrix)}

    def world_transform(self, i: int) -> Transform:
        """Transform from rig `i` into the frame of the reference rig."""
        return compose_transform(self, self.reference_rig, i)

    def stereo_camera(self, i: int, j: int, side: str) -> CameraMatrix:
        if i == j:
            return self.rigs[i].stereo_camera(side)
        return cross_camera(self.rigs[i], compose_transform(self, i, j), side)

    def tof_camera_into(self, i: int, j: int, side: str) -> CameraMatrix:
        """
        The camera projecting range points of rig `j` into the `side` image of rig `i`,
        `C_i G_ij H_j^-1`. Within a rig, refined cameras take precedence.
        """
        if i == j:
            return self.rigs[i].tof_camera_into(side)
        rig_j = self.rigs[j]
        if rig_j.tof_to_rgb is None:
            raise ValueError(f"rig {j} has not been calibrated")
        return self.stereo_camera(i, j, side) @ rig_j.tof_to_rgb


def _chain_product(edges: Dict[Tuple[int, int], Edge], chain: Sequence[int]) -> Transform:
    result = edges[(chain[0], chain[1])].transform
    for a, b in zip(chain[1:-1], chain[2:]):
        result = result @ edges[(a, b)].transform
    return result


def compose_transform(graph: NetworkGraph, i: int, j: int) -> Transform:
    """
    `G_ij` from the stored edges: the direct edge when there is one, otherwise the product of
    the edges along the shortest chain, memoized with provenance `composed`. The direct edges
    of a finalized network are never modified.
    """
    if i == j:
        return RigidTransform3.identity()
    edge = graph._edges.get((i, j)) or graph._composed.get((i, j))
    if edge is not None:
        return edge.transform
    chain = graph.path(i, j)
    G = _chain_product(graph._edges, chain)
    logger.debug(f"composed G_{i}{j} along {chain}")
    graph._composed[(i, j)] = Edge(G, "composed")
    graph._composed[(j, i)] = Edge(G.inverse, "composed")
    return G
