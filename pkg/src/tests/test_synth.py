import json

import numpy as np
import pytest

from pyxcal.align import inverse_disparity_homography
from pyxcal.datasets import (
    BoardDataset,
    BoardSpec,
    NoiseConfig,
    SceneConfig,
    apply_depth_distortion,
    generate_dataset,
    write_dataset,
)
from pyxcal.errors import ConfigError, DatasetError, EmptySceneError
from pyxcal.geom import Homography3, HPoint3, RigidTransform3
from pyxcal.tof import backproject_array
from pyxcal.util import list_to_matrix, read_csv


def test_board_layout():
    board = BoardSpec()
    vertices = board.vertices()
    assert vertices.shape == (35, 3)
    assert np.allclose(vertices.mean(axis=0), 0.0)
    assert np.allclose(vertices[1] - vertices[0], [60.0, 0.0, 0.0])
    assert board.half_extent == (240.0, 180.0)
    assert board.contains(np.array([[239.0, -179.0], [241.0, 0.0]])).tolist() == [True, False]
    # The corner square is black, its neighbours white.
    assert board.regions(np.array([[-230.0, -170.0], [-170.0, -170.0], [-170.0, -110.0]])).tolist() == \
        ["black", "white", "black"]


def test_generation_is_deterministic():
    config = SceneConfig(rig_count=2, board_count=5, seed=4)
    a, truth_a = generate_dataset(config)
    b, truth_b = generate_dataset(config)
    assert a.boards == b.boards
    for key, view in a.views.items():
        other = b.views[key]
        assert np.array_equal(view.left_vertices, other.left_vertices)
        assert np.array_equal(view.hull_ranges, other.hull_ranges)
    assert truth_a.to_dict() == truth_b.to_dict()


def test_range_seed_only_changes_ranges():
    config = SceneConfig(rig_count=2, board_count=5, seed=4)
    reseeded = SceneConfig(rig_count=2, board_count=5, seed=4, noise=NoiseConfig(range_seed=99))
    a, _ = generate_dataset(config)
    b, _ = generate_dataset(reseeded)
    for key, view in a.views.items():
        other = b.views[key]
        assert np.array_equal(view.tof_vertices, other.tof_vertices)
        assert np.array_equal(view.hull_pixels, other.hull_pixels)
        assert not np.array_equal(view.hull_ranges, other.hull_ranges)


def test_outlier_rate():
    noise = NoiseConfig(outlier_rate=0.3)
    _, truth = generate_dataset(SceneConfig(rig_count=2, board_count=6, noise=noise, seed=8))
    samples = sum(v.hull_size for v in truth.views)
    outliers = sum(len(v.outliers) for v in truth.views)
    sigma = np.sqrt(samples * 0.3 * 0.7)
    assert abs(outliers - 0.3 * samples) < 4 * sigma


def test_ground_truth_geometry(noise_free_scene, noise_free_config):
    dataset, truth = noise_free_scene
    assert truth.homography(0).equals(Homography3(noise_free_config.tof_pose().matrix))
    G = truth.transform(0, 1)
    assert np.allclose(G.matrix, (noise_free_config.rig_pose(0) @ noise_free_config.rig_pose(1).inverse).matrix)
    view = dataset.views[sorted(dataset.views)[0]]
    plane = np.asarray(truth.view(view.board_id, view.rig_id).plane)
    camera = dataset.tof_camera(view.rig_id)
    # Noise-free hull samples lie on the true board plane.
    Q = backproject_array(camera, view.hull_pixels, view.hull_ranges)
    assert np.allclose(Q @ plane, 0.0, atol=1e-6)
    assert set(view.hull_regions) <= {"black", "white"}


def test_apply_depth_distortion(tof_camera):
    Q = HPoint3.from_euclidean([100.0, -50.0, 2500.0])
    sample = apply_depth_distortion(Homography3.identity(), Q, tof_camera)
    assert np.allclose(sample.pixel.coords[:2], tof_camera.project(Q.coords[None, :])[0])
    assert np.isclose(sample.range, np.linalg.norm(Q.euclidean()))

    # Inverse disparity only moves points along their rays.
    distorted = apply_depth_distortion(inverse_disparity_homography(1e-4, 0.97), Q, tof_camera)
    assert np.allclose(distorted.pixel.coords, sample.pixel.coords)
    assert np.isclose(distorted.range, sample.range / (1e-4 * 2500.0 + 0.97))

    from pyxcal.errors import BehindCameraError
    flip = Homography3(np.diag([1.0, 1.0, -1.0, 1.0]))
    with pytest.raises(BehindCameraError):
        apply_depth_distortion(flip, Q, tof_camera)


def test_empty_scene():
    with pytest.raises(EmptySceneError):
        generate_dataset(SceneConfig(board_count=0))


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        SceneConfig(noise=NoiseConfig(outlier_rate=1.5)).validate()
    with pytest.raises(ConfigError):
        SceneConfig(pose_preset="sideways").validate()
    with pytest.raises(ConfigError):
        NoiseConfig(depth_distortion=[1.0] * 16, inverse_disparity=[0.0, 1.0]).validate()
    path = tmp_path / "scene.json"
    path.write_text(json.dumps({"rig_count": 2, "board_colour": "red"}))
    with pytest.raises(ConfigError):
        SceneConfig.from_file(path)
    with pytest.raises(ConfigError):
        SceneConfig.from_file(tmp_path / "missing.json")


def test_slanted_boards():
    config = SceneConfig(rig_count=3, board_count=6, pose_preset="slanted", seed=2)
    _, truth = generate_dataset(config)
    for board in truth.boards:
        if board.id % 3 == 2:
            angle = RigidTransform3.from_matrix(list_to_matrix(board.pose, 4, 4)).rotation_angle_deg()
            assert angle > 60.0


def test_dataset_round_trip(tmp_path, noise_free_scene, noise_free_config):
    dataset, truth = noise_free_scene
    write_dataset(dataset, truth, noise_free_config, tmp_path / "scene")
    assert (tmp_path / "scene" / "ground_truth.json").is_file()
    loaded = BoardDataset.from_dir(tmp_path / "scene")
    assert loaded.boards == dataset.boards
    assert loaded.rig_ids == dataset.rig_ids
    for key, view in dataset.views.items():
        other = loaded.views[key]
        assert np.array_equal(other.tof_vertices, view.tof_vertices)
        assert np.array_equal(other.right_vertices, view.right_vertices)
        assert np.array_equal(other.hull_ranges, view.hull_ranges)
        assert list(other.hull_regions) == list(view.hull_regions)
    assert loaded.tof_camera(0).equals(dataset.tof_camera(0))


def test_dataset_errors_name_the_file(tmp_path, noise_free_scene, noise_free_config):
    dataset, truth = noise_free_scene
    path = tmp_path / "scene"
    dataset.to_dir(path)
    board, rig = sorted(dataset.views)[0]
    missing = BoardDataset.range_path(path, rig, board)
    missing.unlink()
    with pytest.raises(DatasetError, match=missing.name):
        BoardDataset.from_dir(path)
    with pytest.raises(DatasetError):
        BoardDataset.from_dir(tmp_path / "nowhere")


def test_hull_from_vertices_without_hull_ids(tmp_path, noise_free_scene):
    import pandas as pd
    dataset, _ = noise_free_scene
    path = tmp_path / "scene"
    dataset.to_dir(path)
    board, rig = sorted(dataset.views)[0]
    view = dataset.views[(board, rig)]
    range_file = BoardDataset.range_path(path, rig, board)
    samples = read_csv(range_file).drop(columns=["hull_id"])
    # A far-away pixel outside the board and a dropout are both discarded.
    extra = pd.DataFrame({"x_px": [0.0, view.tof_vertices[0, 0]], "y_px": [0.0, view.tof_vertices[0, 1]],
                          "range_mm": [1000.0, 0.0], "region": ["unknown", "unknown"]})
    pd.concat([samples, extra]).to_csv(range_file, index=False)
    loaded = BoardDataset.from_dir(path).views[(board, rig)]
    inside = [tuple(p) for p in loaded.hull_pixels]
    assert (0.0, 0.0) not in inside
    assert np.all(loaded.hull_ranges > 0)
    assert len(loaded.hull_pixels) <= len(view.hull_pixels)
