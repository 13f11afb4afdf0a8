"""
Configuration of the calibration and evaluation pipeline.

Configurations are read from JSON files; unknown keys are rejected. Command-line flags
override individual values, and the result is validated before anything is computed.
"""

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional, Tuple

from dataclasses_json import Undefined, dataclass_json
from dataclasses_json.undefined import UndefinedParameterError

from pyxcal.align import MODES
from pyxcal.errors import ConfigError
from pyxcal.optimize import LMConfig
from pyxcal.util import canonical_json, content_hash

STEREO_MODES = ("calibrated", "projective")

#: Refinement modes that can be requested; `dlt-only` keeps the linear estimate.
PIPELINE_MODES = MODES


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class RansacConfig:
    threshold_mm: float = 15.0
    threshold_px: float = 1.0
    max_iters: int = 2000
    seed: int = 0


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class PipelineConfig:
    mode: str = "joint"
    #: Use the given stereo cameras, or projective cameras recovered from the fundamental matrix.
    stereo_mode: str = "calibrated"
    #: Relate rigs by space homographies instead of rigid transforms.
    projective_network: bool = False
    reference_rig: int = 0
    #: Number of boards, taken from the end of the board list, held out for evaluation.
    evaluation_board_count: int = 7
    #: Explicit evaluation boards; replaces the held-out boards recorded at calibration.
    evaluation_boards: Optional[List[int]] = None
    #: Fewest fitting boards two rigs must share to estimate a direct transform.
    min_overlap_boards: int = 3
    #: Rig pairs `"i:j"` to evaluate. All ordered pairs when empty.
    pairs: List[str] = field(default_factory=list)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    lm: LMConfig = field(default_factory=LMConfig)

    @classmethod
    def from_file(cls, path: Path) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"configuration file {path} does not exist")
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except (KeyError, ValueError, TypeError, UndefinedParameterError) as e:
            raise ConfigError(f"cannot read configuration {path}: {e}") from e

    def with_overrides(self, **overrides) -> "PipelineConfig":
        """
        A copy with the given values replaced. `None` values are ignored, and keys of the nested
        `ransac` and `lm` groups may be given directly, e.g. `threshold_mm=20`.
        """
        top = {f.name for f in fields(self)}
        groups = {"ransac": {f.name for f in fields(RansacConfig)}, "lm": {f.name for f in fields(LMConfig)}}
        config = replace(self, ransac=replace(self.ransac), lm=replace(self.lm))
        for key, value in overrides.items():
            if value is None:
                continue
            if key in top:
                setattr(config, key, value)
                continue
            for group, names in groups.items():
                if key in names:
                    setattr(getattr(config, group), key, value)
                    break
            else:
                raise ConfigError(f"unknown configuration key {key!r}")
        return config

    def validate(self) -> "PipelineConfig":
        if self.mode not in PIPELINE_MODES:
            raise ConfigError(f"mode must be one of {PIPELINE_MODES}, got {self.mode!r}")
        if self.stereo_mode not in STEREO_MODES:
            raise ConfigError(f"stereo_mode must be one of {STEREO_MODES}, got {self.stereo_mode!r}")
        if self.stereo_mode == "projective" and not self.projective_network:
            raise ConfigError("projective stereo cameras need projective_network")
        if self.stereo_mode == "projective" and self.mode == "similarity":
            raise ConfigError("a similarity cannot relate a projective reconstruction to metric ranges")
        if self.evaluation_board_count < 0 or self.min_overlap_boards < 1:
            raise ConfigError("evaluation_board_count must be >= 0 and min_overlap_boards >= 1")
        if self.ransac.threshold_mm <= 0 or self.ransac.threshold_px <= 0 or self.ransac.max_iters < 1:
            raise ConfigError("RANSAC thresholds and iterations must be positive")
        try:
            self.lm.validate()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        self.rig_pairs()
        return self

    def rig_pairs(self) -> List[Tuple[int, int]]:
        return [parse_pair(p) for p in self.pairs]

    def digest(self) -> str:
        return content_hash(canonical_json(self.to_dict()))


def parse_pair(text: str) -> Tuple[int, int]:
    try:
        i, j = text.split(":")
        return int(i), int(j)
    except ValueError:
        raise ConfigError(f"rig pairs are written i:j, got {text!r}")


def parse_pairs(text: Optional[str]) -> List[str]:
    """Split `"0:1,1:2"` into validated pair strings."""
    if not text:
        return []
    pairs = [p.strip() for p in text.split(",") if p.strip()]
    for p in pairs:
        parse_pair(p)
    return pairs
