"""
Exceptions raised by pyxcal.

Every exception carries the process exit code that the command line interface uses when
the exception escapes a subcommand.
"""

from typing import Iterable, Tuple


class XcalError(Exception):
    """Base class for all pyxcal errors."""
    exit_code = 5


# --------------------------------------
# Input errors (exit 2).

class InputError(XcalError):
    exit_code = 2


class ConfigError(InputError):
    pass


class DatasetError(InputError):
    pass


class EmptySceneError(InputError):
    pass


class MissingPlaneError(InputError):
    pass


# --------------------------------------

class DisconnectedNetworkError(XcalError):
    """Raised when two rigs have no chain of overlapping boards between them."""
    exit_code = 3

    def __init__(self, pairs: Iterable[Tuple[int, int]], message: str = None):
        #: The rig pairs that could not be connected.
        self.pairs = sorted(set(pairs))
        if message is None:
            listed = ", ".join(f"{i}:{j}" for i, j in self.pairs)
            message = f"disconnected network, no path between rig pairs {listed}"
        super().__init__(message)


class ContaminationError(XcalError):
    """Raised when evaluation boards were also used for fitting."""
    exit_code = 4


# --------------------------------------
# Geometry errors (exit 5).

class GeometryError(XcalError, ValueError):
    pass


class PointAtInfinityError(GeometryError):
    pass


class DegenerateScaleError(GeometryError):
    pass


class NotInvertibleError(GeometryError):
    pass


class DegenerateGeometryError(GeometryError):
    pass


class InvalidFrameError(GeometryError):
    pass


class InvalidCameraError(GeometryError):
    pass


class RayParallelToPlaneError(GeometryError):
    pass


class PlaneBehindCameraError(GeometryError):
    pass


class BehindCameraError(GeometryError):
    pass


# --------------------------------------
# Estimation errors (exit 5).

class EstimationError(XcalError, ValueError):
    pass


class InsufficientDataError(EstimationError):
    pass


class DegenerateDataError(EstimationError):
    pass


class DegenerateConfigurationError(DegenerateDataError):
    pass


class NoConsensusError(EstimationError):
    pass


class InvalidInitializationError(EstimationError):
    pass


class TransferEstimationError(EstimationError):
    pass


class EmptyReportError(EstimationError):
    pass
