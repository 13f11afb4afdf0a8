import numpy as np
import pytest

from pyxcal.datasets import NoiseConfig, SceneConfig, generate_dataset
from pyxcal.experiments import CalibrationExperiment, PipelineConfig
from pyxcal.geom import CameraMatrix


def intrinsics(focal: float, width: int, height: int) -> np.ndarray:
    return np.array([[focal, 0.0, width / 2.0], [0.0, focal, height / 2.0], [0.0, 0.0, 1.0]])


@pytest.fixture(scope="session")
def stereo_cameras():
    K = intrinsics(640.0, 1624, 1224)
    return CameraMatrix.from_intrinsics(K), CameraMatrix.from_intrinsics(K, np.eye(3), [-170.0, 0.0, 0.0])


@pytest.fixture(scope="session")
def tof_camera():
    return CameraMatrix.from_intrinsics(intrinsics(330.0, 176, 144))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_scene_points(rng: np.random.Generator, n: int, depth=(2000.0, 3000.0)) -> np.ndarray:
    """Points in front of the cameras, spread over a volume (not coplanar)."""
    return np.column_stack([rng.uniform(-500, 500, n), rng.uniform(-400, 400, n), rng.uniform(*depth, n)])


@pytest.fixture(scope="session")
def noise_free_config():
    return SceneConfig(rig_count=3, board_count=10, noise=NoiseConfig.noise_free(), seed=3)


@pytest.fixture(scope="session")
def noise_free_scene(noise_free_config):
    return generate_dataset(noise_free_config)


@pytest.fixture(scope="session")
def noise_free_calibration(noise_free_scene):
    dataset, _ = noise_free_scene
    config = PipelineConfig(mode="joint", evaluation_board_count=4)
    return CalibrationExperiment(dataset, config)


@pytest.fixture(scope="session")
def noisy_config():
    # Range noise dominates the detection noise, so raw range samples are the noisiest input.
    noise = NoiseConfig(rgb_vertex_sigma_px=0.05, tof_vertex_sigma_px=0.05, range_sigma_mm=30.0,
                        outlier_rate=0.05, outlier_scale_mm=300.0)
    return SceneConfig(rig_count=3, board_count=12, noise=noise, seed=11)


@pytest.fixture(scope="session")
def noisy_scene(noisy_config):
    return generate_dataset(noisy_config)


@pytest.fixture(scope="session")
def noisy_calibration(noisy_scene):
    dataset, _ = noisy_scene
    return CalibrationExperiment(dataset, PipelineConfig(mode="joint", evaluation_board_count=5))
