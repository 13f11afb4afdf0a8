"""
pyxcal is a Python library for cross-calibrating time-of-flight and colour camera networks.
"""
__version__ = "0.1.0"
