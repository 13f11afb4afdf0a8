"""
Range camera model: back-projection, plane fitting and ray-plane range refinement.
"""

from pyxcal.tof.backprojection import (
    DEFAULT_MAX_RANGE_MM,
    RangeSample,
    backproject,
    backproject_array,
    point_ranges,
    ray_directions,
)
from pyxcal.tof.plane import (
    FittedPlane,
    fit_plane_ransac,
    perpendicular_residuals,
    radial_residuals,
    refine_range,
    refine_ranges,
)
