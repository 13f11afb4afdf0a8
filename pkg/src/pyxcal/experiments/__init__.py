"""
The calibration and evaluation pipelines, their configuration, and the bundle that carries a
calibration from one to the other.
"""

from pyxcal.experiments.config import PipelineConfig, RansacConfig, parse_pairs
from pyxcal.experiments.bundle import CalibrationBundle, EdgeRecord, RigRecord
from pyxcal.experiments.calibration import CalibrationExperiment, RigCalibration, split_boards
from pyxcal.experiments.evaluation import EvaluationExperiment
