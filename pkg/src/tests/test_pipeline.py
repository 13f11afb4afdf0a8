import numpy as np
import pytest

from pyxcal.datasets import BoardDataset, NoiseConfig, SceneConfig, generate_dataset
from pyxcal.errors import ConfigError, ContaminationError, DisconnectedNetworkError
from pyxcal.evaluation import pair_reports
from pyxcal.experiments import (
    CalibrationBundle,
    CalibrationExperiment,
    EvaluationExperiment,
    PipelineConfig,
    parse_pairs,
    split_boards,
)


def test_split_boards():
    boards = list(range(10))
    assert split_boards(boards, PipelineConfig(evaluation_board_count=3)) == (list(range(7)), [7, 8, 9])
    assert split_boards(boards, PipelineConfig(evaluation_boards=[0, 5])) == ([1, 2, 3, 4, 6, 7, 8, 9], [0, 5])
    assert split_boards(boards, PipelineConfig(evaluation_board_count=0)) == (boards, [])


def test_config_overrides_and_validation():
    config = PipelineConfig().with_overrides(mode="separate", threshold_mm=20.0, seed=None, lambda0=0.01)
    assert config.mode == "separate"
    assert config.ransac.threshold_mm == 20.0
    assert config.ransac.seed == 0
    assert config.lm.lambda0 == 0.01
    assert PipelineConfig().ransac.threshold_mm == 15.0
    assert config.digest() != PipelineConfig().digest()

    with pytest.raises(ConfigError):
        PipelineConfig().with_overrides(colour="red")
    with pytest.raises(ConfigError):
        PipelineConfig(mode="affine").validate()
    with pytest.raises(ConfigError):
        PipelineConfig(stereo_mode="projective").validate()
    with pytest.raises(ConfigError):
        PipelineConfig(stereo_mode="projective", projective_network=True, mode="similarity").validate()
    with pytest.raises(ConfigError):
        PipelineConfig(pairs=["0-1"]).validate()
    assert parse_pairs("0:1, 1:1") == ["0:1", "1:1"]
    assert parse_pairs(None) == []


def test_exact_recovery(noise_free_scene, noise_free_calibration):
    _, truth = noise_free_scene
    bundle = noise_free_calibration.bundle
    for record in bundle.rigs:
        rig = record.rig()
        assert rig.homography.equals(truth.homography(record.id), tol=1e-6)
        assert record.final_error < 1e-4
        assert record.mode == "joint"
    network = bundle.to_network()
    for i in network.rigs:
        for j in network.rigs:
            if i == j:
                continue
            angle, distance = truth.transform(i, j).difference(network.transform(i, j))
            assert angle < 1e-6
            assert distance < 1e-4


def test_bundle_round_trip(tmp_path, noise_free_calibration):
    bundle = noise_free_calibration.bundle
    bundle.save(tmp_path / "bundle.json")
    loaded = CalibrationBundle.load(tmp_path / "bundle.json")
    assert loaded.to_dict() == bundle.to_dict()
    assert loaded.config.digest() == bundle.config_hash
    assert np.array_equal(loaded.rig(0).rig().tof_to_rgb.matrix, bundle.rig(0).rig().tof_to_rgb.matrix)
    assert any(e.provenance == "direct" for e in loaded.edges)
    assert set(loaded.evaluation_boards).isdisjoint(loaded.fitting_boards)


def test_every_mode_recovers_the_scene(noise_free_scene):
    dataset, truth = noise_free_scene
    for mode in ("dlt-only", "separate", "similarity"):
        experiment = CalibrationExperiment(dataset, PipelineConfig(mode=mode, evaluation_board_count=4))
        calibration = experiment.calibrate_rig(0)
        assert calibration.alignment.mode == mode
        assert calibration.alignment.final_error < 1e-4
        if mode == "separate":
            assert calibration.rig.refined_left is not None


def test_projective_pipeline(noise_free_scene):
    dataset, _ = noise_free_scene
    config = PipelineConfig(stereo_mode="projective", projective_network=True, evaluation_board_count=4)
    experiment = CalibrationExperiment(dataset, config)
    bundle = experiment.bundle
    assert all(e.kind == "projective" for e in bundle.edges)
    assert all(r.stereo_inliers and r.stereo_inliers > 0 for r in bundle.rigs)
    evaluation = EvaluationExperiment(dataset, bundle)
    assert evaluation.calibration_report.errors.max() < 1e-3


def test_disconnected_network(noise_free_scene):
    dataset, _ = noise_free_scene
    config = PipelineConfig(evaluation_board_count=4, min_overlap_boards=100)
    with pytest.raises(DisconnectedNetworkError) as e:
        CalibrationExperiment(dataset, config).network
    assert (0, 1) in e.value.pairs


def test_contamination(noise_free_scene, noise_free_calibration):
    dataset, _ = noise_free_scene
    bundle = noise_free_calibration.bundle
    config = bundle.config.with_overrides(evaluation_boards=[bundle.fitting_boards[0]])
    with pytest.raises(ContaminationError):
        EvaluationExperiment(dataset, bundle, config)


def test_missing_views_give_no_data_rows(tmp_path, noise_free_scene, noise_free_calibration):
    dataset, _ = noise_free_scene
    bundle = noise_free_calibration.bundle
    held_out = set(bundle.evaluation_boards)
    reduced = BoardDataset(dataset.board, dataset.rigs.values(),
                           [v for (b, r), v in dataset.views.items() if not (r == 1 and b in held_out)])
    experiment = EvaluationExperiment(reduced, bundle)
    summary = experiment.write(tmp_path / "reports")
    rows = summary[(summary["scope"] == "pair") & (summary["rig_j"] == 1)]
    assert len(rows) == 2 * len(bundle.rigs)
    assert (rows["note"] == "no data").all()
    assert (rows["count"] == 0).all()
    for name in ("calibration_errors.csv", "total_errors.csv", "summary.csv", "summary.json"):
        assert (tmp_path / "reports" / name).is_file()
    assert (tmp_path / "reports" / "histograms" / "calibration_0_0.csv").is_file()
    assert (tmp_path / "reports" / "histograms" / "total_intra.csv").is_file()


def test_noisy_scene_error_ordering(noisy_scene, noisy_calibration):
    dataset, _ = noisy_scene
    experiment = EvaluationExperiment(dataset, noisy_calibration.bundle)
    calibration = experiment.calibration_report
    total = experiment.total_report
    assert np.median(total.intra_rig().errors) > np.median(calibration.intra_rig().errors)
    assert calibration.intra_rig().summary().overflow == 0
    assert total.errors.max() > calibration.errors.max()
    assert total.summary().overflow > 0
    # Every refined rig reprojects its fitting vertices to within a pixel.
    for record in noisy_calibration.bundle.rigs:
        assert record.final_error <= record.initial_error
        assert record.final_error < 1.0


def test_default_noise_keeps_intra_rig_error_subpixel():
    dataset, _ = generate_dataset(SceneConfig())
    calibration = CalibrationExperiment(dataset, PipelineConfig())
    report = EvaluationExperiment(dataset, calibration.bundle).calibration_report.intra_rig()
    summary = report.summary()
    # 3 rigs, 2 colour images, 35 vertices and 7 evaluation boards.
    assert summary.count == 1470
    assert summary.mean < 1.0
    assert summary.median < summary.mean


def test_range_noise_only_moves_the_total_error(noisy_config, noisy_scene, noisy_calibration):
    dataset, _ = noisy_scene
    experiment = EvaluationExperiment(dataset, noisy_calibration.bundle)
    reseeded = SceneConfig.from_dict(noisy_config.to_dict())
    reseeded.noise.range_seed = 1234
    redrawn, _ = generate_dataset(reseeded)
    views = {key: view.with_ranges(redrawn.views[key].hull_ranges) for key, view in experiment.views.items()}

    before = pair_reports(experiment.network, experiment.views, experiment.pairs, experiment.boards)
    after = pair_reports(experiment.network, views, experiment.pairs, experiment.boards)
    for pair in experiment.pairs:
        assert np.array_equal(before["calibration"][pair].errors, after["calibration"][pair].errors)
    compared = [p for p in experiment.pairs if len(before["total"][p]) > 0]
    assert compared
    for pair in compared:
        assert not np.array_equal(before["total"][pair].errors, after["total"][pair].errors)


def test_inter_rig_outliers(noisy_scene, noisy_calibration):
    dataset, truth = noisy_scene
    experiment = EvaluationExperiment(dataset, noisy_calibration.bundle)
    frame = experiment.total_report.inter_rig().frame
    outlier = np.zeros(len(frame), dtype=bool)
    for (b, j), group in frame.groupby(["board_id", "rig_j"]):
        mask = truth.outlier_mask(b, j)
        outlier[group.index] = mask[group["point_id"].to_numpy()]
    assert outlier.any()
    assert np.median(frame["error_px"][outlier]) > 10.0
    assert np.median(frame["error_px"][outlier]) > 3.0 * np.median(frame["error_px"][~outlier])


@pytest.mark.parametrize("seed", range(10))
def test_black_squares_are_noisier(seed):
    noise = NoiseConfig(rgb_vertex_sigma_px=0.0, tof_vertex_sigma_px=0.0, range_sigma_mm=10.0,
                        outlier_rate=0.0, black_square_range_sigma_multiplier=3.0)
    dataset, _ = generate_dataset(SceneConfig(rig_count=1, board_count=8, noise=noise, seed=seed))
    calibration = CalibrationExperiment(dataset, PipelineConfig(evaluation_board_count=3))
    total = EvaluationExperiment(dataset, calibration.bundle).total_report
    black = total.filter(region="black").errors.mean()
    white = total.filter(region="white").errors.mean()
    assert black >= 2.0 * white


def calibrate_single_rig(mode, noise, seed):
    config = SceneConfig(rig_count=1, board_count=10, noise=noise, seed=seed)
    dataset, _ = generate_dataset(config)
    pipeline = PipelineConfig(mode=mode, evaluation_board_count=4, pairs=["0:0"])
    bundle = CalibrationExperiment(dataset, pipeline).bundle
    return bundle.rigs[0], EvaluationExperiment(dataset, bundle).calibration_report.errors.mean()


def test_homography_beats_similarity_under_depth_distortion():
    exact = NoiseConfig.noise_free()
    exact.inverse_disparity = [1e-4, 0.97]
    assert calibrate_single_rig("joint", exact, 6)[1] < 1e-5
    assert calibrate_single_rig("similarity", exact, 6)[1] > 0.1

    noisy = NoiseConfig(rgb_vertex_sigma_px=0.05, tof_vertex_sigma_px=0.05, range_sigma_mm=5.0,
                        outlier_rate=0.0, inverse_disparity=[1e-4, 0.97])
    assert calibrate_single_rig("joint", noisy, 6)[1] < 0.5 * calibrate_single_rig("similarity", noisy, 6)[1]


@pytest.mark.parametrize("seed", range(20))
def test_homography_fits_at_least_as_well_as_similarity(seed):
    noisy = NoiseConfig(rgb_vertex_sigma_px=0.05, tof_vertex_sigma_px=0.05, range_sigma_mm=5.0,
                        outlier_rate=0.0, inverse_disparity=[1e-4, 0.97])
    joint, joint_error = calibrate_single_rig("joint", noisy, seed)
    similarity, similarity_error = calibrate_single_rig("similarity", noisy, seed)
    assert joint.final_error <= similarity.final_error + 1e-9
    assert joint_error < similarity_error
