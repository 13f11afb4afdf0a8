"""
Evaluation of a calibration bundle on the boards it held out.
"""

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from pyxcal.datasets import BoardDataset, BoardView
from pyxcal.errors import ConfigError, ContaminationError, EmptyReportError
from pyxcal.evaluation import ErrorReport, fit_board_planes, histogram_frame, pair_reports
from pyxcal.experiments.bundle import CalibrationBundle
from pyxcal.experiments.config import PipelineConfig
from pyxcal.util import write_csv, write_json

logger = logging.getLogger(__name__)

METRICS = ("calibration", "total")
SUMMARY_COLUMNS = ["metric", "scope", "rig_i", "rig_j", "mean", "median", "max", "count", "pair_error", "note"]


def _plain(value):
    if value is pd.NA:
        return None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return None if math.isnan(value) else float(value)
    return value


class EvaluationExperiment:
    """
    Calibration and total errors of every requested pair of rigs, on the evaluation boards of
    a bundle. Evaluating on a board that was used for fitting is refused.

    >>> experiment = EvaluationExperiment(dataset, CalibrationBundle.load(Path("bundle.json")))
    >>> experiment.calibration_report.intra_rig().summary().mean
    """

    def __init__(self, dataset: BoardDataset, bundle: CalibrationBundle, config: PipelineConfig = None):
        self.dataset = dataset
        self.bundle = bundle
        self.config = (config or bundle.config).validate()
        boards = self.config.evaluation_boards
        if boards is None:
            boards = bundle.evaluation_boards
        contaminated = sorted(set(boards) & set(bundle.fitting_boards))
        if contaminated:
            raise ContaminationError(f"boards {contaminated} were used to fit the calibration")
        missing = sorted(set(boards) - set(dataset.boards))
        if missing:
            logger.warning(f"evaluation boards {missing} are not in the dataset")
        self.boards: List[int] = sorted(set(boards) & set(dataset.boards))

        self.network = bundle.to_network()
        rig_ids = sorted(self.network.rigs)
        self.pairs: List[Tuple[int, int]] = self.config.rig_pairs() or [(i, j) for i in rig_ids for j in rig_ids]
        for i, j in self.pairs:
            if i not in self.network.rigs or j not in self.network.rigs:
                raise ConfigError(f"rig pair {i}:{j} is not in the bundle")

        self._views: Optional[Dict[Tuple[int, int], BoardView]] = None
        self._reports: Optional[Dict[str, Dict[Tuple[int, int], ErrorReport]]] = None

    @property
    def views(self) -> Dict[Tuple[int, int], BoardView]:
        """Evaluation views with their board planes."""
        if self._views is None:
            evaluation = set(self.boards)
            views = [v for (b, _), v in sorted(self.dataset.views.items()) if b in evaluation]
            ransac = self.config.ransac
            cameras = {r: rig.tof_camera for r, rig in self.network.rigs.items()}
            fitted = fit_board_planes(views, cameras, threshold_mm=ransac.threshold_mm, max_iters=ransac.max_iters,
                                      seed=ransac.seed, lm_config=self.config.lm)
            self._views = {(v.board_id, v.rig_id): v for v in fitted}
        return self._views

    @property
    def reports(self) -> Dict[str, Dict[Tuple[int, int], ErrorReport]]:
        if self._reports is None:
            self._reports = pair_reports(self.network, self.views, self.pairs, self.boards, self.config.lm)
        return self._reports

    @property
    def calibration_report(self) -> ErrorReport:
        return ErrorReport.concat(self.reports["calibration"].values())

    @property
    def total_report(self) -> ErrorReport:
        return ErrorReport.concat(self.reports["total"].values())

    def report(self, metric: str) -> ErrorReport:
        return self.calibration_report if metric == "calibration" else self.total_report

    def _scopes(self, metric: str):
        for (i, j), report in self.reports[metric].items():
            yield "pair", i, j, report
        combined = self.report(metric)
        yield "intra", None, None, combined.intra_rig()
        yield "inter", None, None, combined.inter_rig()

    def summary(self) -> pd.DataFrame:
        """One row per metric and pair, and per metric over all intra- and inter-rig pairs."""
        rows = []
        for metric in METRICS:
            for scope, i, j, report in self._scopes(metric):
                if len(report) == 0:
                    if scope == "pair":
                        rows.append((metric, scope, i, j, math.nan, math.nan, math.nan, 0, math.nan, "no data"))
                    continue
                s = report.summary()
                rows.append((metric, scope, i, j, s.mean, s.median, s.max, s.count, report.pair_error(), ""))
        frame = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
        for column in ("rig_i", "rig_j", "count"):
            frame[column] = frame[column].astype("Int64")
        return frame

    def histograms(self) -> Dict[str, pd.DataFrame]:
        frames = {}
        for metric in METRICS:
            for scope, i, j, report in self._scopes(metric):
                try:
                    summary = report.summary()
                except EmptyReportError:
                    continue
                name = f"{metric}_{i}_{j}" if scope == "pair" else f"{metric}_{scope}"
                frames[name] = histogram_frame(summary)
        return frames

    def write(self, out: Path, input_hash: str = "") -> pd.DataFrame:
        """Write the per-point reports, the summary table and the histograms into `out`."""
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        self.calibration_report.to_csv(out / "calibration_errors.csv")
        self.total_report.to_csv(out / "total_errors.csv")
        summary = self.summary()
        write_csv(summary, out / "summary.csv")
        records = [{k: _plain(v) for k, v in row.items()} for row in summary.to_dict(orient="records")]
        write_json({
            "config": self.config.to_dict(),
            "config_hash": self.config.digest(),
            "bundle_config_hash": self.bundle.config_hash,
            "input_hash": input_hash,
            "evaluation_boards": self.boards,
            "summary": records,
        }, out / "summary.json")
        for name, frame in self.histograms().items():
            write_csv(frame, out / "histograms" / f"{name}.csv")
        return summary
