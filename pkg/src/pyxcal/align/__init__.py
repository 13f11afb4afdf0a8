"""
Alignment of range cameras with stereo pairs through a 4x4 space homography.
"""

from pyxcal.align.dlt import (
    Correspondence3D3D,
    dlt_design_matrix,
    dlt_homography3,
    pair_arrays,
    reprojection_error,
    reprojection_residuals,
    rms,
)
from pyxcal.align.refine import (
    MODES,
    AlignmentResult,
    dlt_only_result,
    refine_camera,
    refine_joint,
    refine_separate,
)
from pyxcal.align.similarity import (
    inverse_disparity_homography,
    procrustes_similarity,
    refine_similarity,
    umeyama,
)
