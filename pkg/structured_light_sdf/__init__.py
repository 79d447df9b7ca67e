"""
structured-light-sdf - Neural SDF depth reconstruction for camera-projector rigs
"""

__version__ = "0.1.0"
