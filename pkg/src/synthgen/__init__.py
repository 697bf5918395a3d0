"""Config-driven synthetic image pipeline with a CPU path tracer.

Renders color, z-depth, camera-space normal and segmentation passes for
every camera keyframe and stores them in one BPC1 container per keyframe.
"""

__version__ = "0.1.0"
