"""
Per-point error reports and their summaries.

A report holds one row per evaluated point: the board, the point, the pair of rigs `(i, j)`
(range camera of rig `j` reprojected into the colour images of rig `i`), the image side, the
board region the point falls on, and the unsquared pixel error.

>>> from pyxcal.evaluation import ErrorReport
>>> report = ErrorReport.from_records([(0, 0, 0, 0, "left", "vertex", 1.0),
...                                    (0, 0, 0, 0, "right", "vertex", 2.0),
...                                    (0, 1, 0, 0, "left", "vertex", 6.0)])
>>> report.summary().median
2.0
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Tuple

import numpy as np
import pandas as pd
from dataclasses_json import dataclass_json

from pyxcal.errors import EmptyReportError
from pyxcal.util import read_csv, write_csv

REPORT_COLUMNS = ["board_id", "point_id", "rig_i", "rig_j", "side", "region", "error_px"]

HISTOGRAM_BIN_WIDTH = 0.1
HISTOGRAM_LIMIT = 3.0
#: Edges of the regular bins; errors above the last edge go to an overflow bin.
HISTOGRAM_EDGES = np.round(np.arange(0.0, HISTOGRAM_LIMIT + HISTOGRAM_BIN_WIDTH / 2, HISTOGRAM_BIN_WIDTH), 10)


@dataclass_json
@dataclass
class Summary:
    mean: float
    median: float
    max: float
    count: int
    #: Counts of the regular bins followed by the overflow bin.
    histogram: List[int] = field(default_factory=list)

    @property
    def overflow(self) -> int:
        return self.histogram[-1]


def histogram_counts(errors: np.ndarray) -> np.ndarray:
    errors = np.asarray(errors, dtype=float)
    counts, _ = np.histogram(errors[errors <= HISTOGRAM_LIMIT], bins=HISTOGRAM_EDGES)
    return np.append(counts, int(np.sum(errors > HISTOGRAM_LIMIT)))


def summarize(report: "ErrorReport") -> Summary:
    errors = report.errors
    if errors.size == 0:
        raise EmptyReportError("cannot summarize an empty report")
    return Summary(mean=float(np.mean(errors)),
                   median=float(np.median(errors)),
                   max=float(np.max(errors)),
                   count=int(errors.size),
                   histogram=[int(c) for c in histogram_counts(errors)])


def histogram_frame(summary: Summary) -> pd.DataFrame:
    """Plot-ready histogram: one row per bin, the overflow bin last with an infinite end."""
    starts = list(HISTOGRAM_EDGES[:-1]) + [HISTOGRAM_LIMIT]
    ends = list(HISTOGRAM_EDGES[1:]) + [np.inf]
    return pd.DataFrame({"bin_start": starts, "bin_end": ends, "count": summary.histogram})


class ErrorReport:
    """
    A table of per-point errors. Reports are immutable: filtering and concatenation return new
    reports.
    """

    def __init__(self, frame: pd.DataFrame = None):
        if frame is None:
            frame = pd.DataFrame(columns=REPORT_COLUMNS)
        missing = set(REPORT_COLUMNS) - set(frame.columns)
        if missing:
            raise ValueError(f"report frames need the columns {sorted(missing)}")
        self._frame = frame[REPORT_COLUMNS].reset_index(drop=True)

    @classmethod
    def from_records(cls, records: Iterable[Tuple]) -> "ErrorReport":
        return cls(pd.DataFrame(list(records), columns=REPORT_COLUMNS))

    @classmethod
    def read_csv(cls, path: Path) -> "ErrorReport":
        return cls(read_csv(path))

    @property
    def frame(self) -> pd.DataFrame:
        return self._frame.copy()

    @property
    def errors(self) -> np.ndarray:
        return self._frame["error_px"].to_numpy(dtype=float)

    def __len__(self):
        return len(self._frame)

    def filter(self, side: str = None, region: str = None, pair: Tuple[int, int] = None,
               board: int = None) -> "ErrorReport":
        f = self._frame
        mask = np.ones(len(f), dtype=bool)
        if side is not None:
            mask &= (f["side"] == side).to_numpy()
        if region is not None:
            mask &= (f["region"] == region).to_numpy()
        if pair is not None:
            mask &= ((f["rig_i"] == pair[0]) & (f["rig_j"] == pair[1])).to_numpy()
        if board is not None:
            mask &= (f["board_id"] == board).to_numpy()
        return ErrorReport(f[mask])

    def intra_rig(self) -> "ErrorReport":
        return ErrorReport(self._frame[self._frame["rig_i"] == self._frame["rig_j"]])

    def inter_rig(self) -> "ErrorReport":
        return ErrorReport(self._frame[self._frame["rig_i"] != self._frame["rig_j"]])

    @staticmethod
    def concat(reports: Iterable["ErrorReport"]) -> "ErrorReport":
        frames = [r._frame for r in reports if len(r) > 0]
        if not frames:
            return ErrorReport()
        return ErrorReport(pd.concat(frames, ignore_index=True))

    def pair_error(self) -> float:
        """
        Mean over boards of the average of the left and right mean errors.
        """
        if len(self) == 0:
            raise EmptyReportError("cannot compute the error of an empty report")
        per_side = self._frame.groupby(["board_id", "side"])["error_px"].mean()
        return float(per_side.groupby(level="board_id").mean().mean())

    def summary(self) -> Summary:
        return summarize(self)

    def to_csv(self, path: Path):
        write_csv(self._frame, Path(path))
