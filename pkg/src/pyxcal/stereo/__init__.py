"""
Parallax-based reconstruction from a pair of colour cameras.
"""

from pyxcal.stereo.fundamental import (
    Correspondence2D2D,
    FundamentalMatrix,
    ProjectiveFrame,
    cameras_from_fundamental,
    eight_point,
    estimate_fundamental_ransac,
    fundamental_from_cameras,
    match_arrays,
    ransac_iterations,
    sampson_distance,
)
from pyxcal.stereo.triangulation import triangulate, triangulate_points
