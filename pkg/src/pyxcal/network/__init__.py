"""
Alignment of several rigs into one network.
"""

from pyxcal.network.graph import (
    SIDES,
    Edge,
    NetworkGraph,
    Rig,
    compose_transform,
    cross_camera,
    estimate_projective,
    estimate_rigid,
)
