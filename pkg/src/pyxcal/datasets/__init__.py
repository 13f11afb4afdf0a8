"""
Chequerboard datasets: the on-disk format read by the pipeline, and a generator of synthetic
scenes with known ground truth.
"""

from pyxcal.datasets.board import (
    CAMERAS,
    BoardDataset,
    BoardSpec,
    BoardView,
    RigCameras,
)
from pyxcal.datasets.synth import (
    GroundTruth,
    NoiseConfig,
    SceneConfig,
    apply_depth_distortion,
    generate_dataset,
    write_dataset,
)
