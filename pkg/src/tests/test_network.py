import numpy as np
import pytest

from pyxcal.errors import DisconnectedNetworkError
from pyxcal.geom import Homography3, RigidTransform3, dehomogenize
from pyxcal.network import NetworkGraph, Rig, compose_transform, cross_camera, estimate_projective, estimate_rigid
from tests.conftest import random_scene_points


@pytest.fixture
def rigs(stereo_cameras, tof_camera):
    left, right = stereo_cameras
    M = Homography3(RigidTransform3.from_rotvec([0.01, -0.015, 0.005], [-85.0, -60.0, 0.0]).matrix)
    return [Rig(i, tof_camera, left, right, tof_to_rgb=M.inverse) for i in range(4)]


def shift(x):
    return RigidTransform3.from_rotvec([0.0, 0.1, 0.0], [x, 0.0, 0.0])


def test_composition_along_the_shortest_chain(rigs):
    graph = NetworkGraph(rigs)
    graph.add_edge(0, 1, shift(1070.0), boards=5)
    graph.add_edge(1, 2, shift(1070.0), boards=4)
    graph.add_edge(2, 3, shift(1070.0), boards=6)
    graph.finalize()

    G_02 = graph.transform(0, 2)
    expected = shift(1070.0) @ shift(1070.0)
    assert np.allclose(G_02.matrix, expected.matrix)
    assert graph.edges[(0, 2)].provenance == "composed"
    assert graph.edges[(0, 1)].provenance == "direct"
    assert np.allclose((graph.transform(3, 0) @ graph.transform(0, 3)).matrix, np.eye(4))
    assert graph.path(0, 3) == [0, 1, 2, 3]
    assert np.allclose(graph.world_transform(0).matrix, np.eye(4))


def test_disconnected_network_names_the_pairs(rigs):
    graph = NetworkGraph(rigs)
    graph.add_edge(0, 1, shift(1070.0))
    graph.add_edge(2, 3, shift(1070.0))
    with pytest.raises(DisconnectedNetworkError) as e:
        graph.finalize()
    assert e.value.pairs == [(0, 2), (0, 3), (1, 2), (1, 3)]
    assert e.value.exit_code == 3


def test_edge_discrepancy(rigs):
    graph = NetworkGraph(rigs[:3])
    graph.add_edge(0, 1, shift(1000.0))
    graph.add_edge(1, 2, shift(1000.0))
    graph.add_edge(0, 2, RigidTransform3.from_rotvec([0.0, 0.2, 0.0], [2005.0, 0.0, 0.0]))
    graph.finalize()
    discrepancy = graph.edge_discrepancy(0, 2)
    composed = shift(1000.0) @ shift(1000.0)
    assert discrepancy["rotation_deg"] < 1e-6
    assert np.isclose(discrepancy["translation_mm"], np.linalg.norm(composed.translation - [2005.0, 0.0, 0.0]))
    assert graph.edge_discrepancy(1, 2) is not None

    chain = NetworkGraph(rigs[:3])
    chain.add_edge(0, 1, shift(1000.0))
    chain.add_edge(1, 2, shift(1000.0))
    chain.finalize()
    assert chain.edge_discrepancy(0, 1) is None


def test_cross_rig_cameras(rigs, rng):
    graph = NetworkGraph(rigs[:2])
    G_01 = shift(1070.0)
    graph.add_edge(0, 1, G_01)
    graph.finalize()

    X1 = random_scene_points(rng, 10)
    X0 = dehomogenize(G_01.apply(X1))
    assert np.allclose(graph.stereo_camera(0, 1, "left").project(X1), rigs[0].left_camera.project(X0))

    # Range points of rig 1 project where their stereo counterparts would in rig 0.
    Q1 = rigs[1].homography.apply(X1)
    assert np.allclose(graph.tof_camera_into(0, 1, "right").project(Q1), rigs[0].right_camera.project(X0))
    assert np.allclose(graph.tof_camera_into(1, 1, "left").project(Q1), rigs[1].left_camera.project(X1))


def test_estimate_rigid_and_projective(rng):
    G = RigidTransform3.from_rotvec([0.05, 0.2, -0.03], [1070.0, 20.0, -15.0])
    P_j = random_scene_points(rng, 30)
    P_i = dehomogenize(G.apply(P_j))
    rigid = estimate_rigid((P_i, P_j))
    angle, distance = G.difference(rigid)
    assert angle < 1e-6 and distance < 1e-6
    assert estimate_projective((P_i, P_j)).equals(G.as_homography(), tol=1e-7)


def test_edges_are_validated(rigs):
    graph = NetworkGraph(rigs)
    with pytest.raises(ValueError):
        graph.add_edge(0, 0, shift(0.0))
    with pytest.raises(ValueError):
        graph.add_edge(0, 9, shift(0.0))
    with pytest.raises(ValueError):
        NetworkGraph(rigs, reference_rig=9)
    graph.add_edge(0, 1, shift(1.0))
    graph.add_edge(1, 2, shift(1.0))
    graph.add_edge(2, 3, shift(1.0))
    graph.finalize()
    with pytest.raises(ValueError):
        graph.add_edge(0, 3, shift(1.0))


def test_compose_transform_and_cross_camera(rigs, rng):
    graph = NetworkGraph(rigs[:3])
    graph.add_edge(0, 1, shift(1070.0))
    graph.add_edge(1, 2, shift(-500.0))
    graph.finalize()

    assert np.allclose(compose_transform(graph, 1, 1).matrix, np.eye(4))
    G_20 = compose_transform(graph, 2, 0)
    assert np.allclose(G_20.matrix, (shift(-500.0).inverse @ shift(1070.0).inverse).matrix)
    assert graph.edges[(0, 2)].provenance == "composed"

    # Within a rig the cross camera is the rig's own camera.
    assert cross_camera(rigs[1], RigidTransform3.identity(), "right").equals(rigs[1].right_camera)
    X0 = random_scene_points(rng, 10)
    X2 = dehomogenize(G_20.apply(X0))
    assert np.allclose(cross_camera(rigs[2], G_20, "left").project(X0), rigs[2].left_camera.project(X2))


def test_composition_leaves_the_direct_edges_alone(rigs):
    graph = NetworkGraph(rigs)
    graph.add_edge(0, 1, shift(1070.0))
    graph.add_edge(1, 2, shift(1070.0))
    graph.add_edge(2, 3, shift(1070.0))
    graph.finalize()
    direct = graph.direct_edges
    assert sorted(direct) == [(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]

    G_03 = graph.transform(0, 3)
    assert graph.direct_edges.keys() == direct.keys()
    assert all(graph.direct_edges[k] is direct[k] for k in direct)
    assert graph.transform(0, 3) is G_03
    assert graph.edges[(3, 0)].provenance == "composed"
    with pytest.raises(ValueError):
        graph.add_edge(0, 3, G_03)
