"""
Homogeneous geometry shared by the rest of pyxcal.
"""

from pyxcal.geom.homogeneous import (
    HOMOGENEOUS_TOL,
    HPlane3,
    HPoint2,
    HPoint3,
    as_pixels,
    as_points2,
    as_points3,
    canonical,
    cross_matrix,
    dehomogenize,
    homogeneous_distance,
    homogeneous_equal,
    inhomog_distance,
    normalize_points,
    normalize_points_2d,
    wedge,
)
from pyxcal.geom.camera import CameraMatrix
from pyxcal.geom.transforms import (
    Homography3,
    RigidTransform3,
    Similarity3,
    apply_homography,
    transform_plane,
)
