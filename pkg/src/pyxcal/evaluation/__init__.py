"""
Accuracy of a calibrated network on boards held out of the calibration.
"""

from pyxcal.datasets.board import BoardView
from pyxcal.evaluation.transfer import Homography2, dlt_homography2, symmetric_transfer_residuals
from pyxcal.evaluation.report import (
    HISTOGRAM_EDGES,
    REPORT_COLUMNS,
    ErrorReport,
    Summary,
    histogram_counts,
    histogram_frame,
    summarize,
)
from pyxcal.evaluation.metrics import (
    calibration_error,
    fit_board_planes,
    hull_from_vertices,
    pair_reports,
    total_error,
    transfer_homography,
)
