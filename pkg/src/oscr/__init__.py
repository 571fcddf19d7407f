"""Occlusion-aware 3D layout toolkit.

Renders color-coded translucent box layouts from a camera, generates
occlusion-heavy synthetic scenes, builds token binding masks for the
rendered condition maps, and scores layout adherence.
"""

__version__ = "0.1.0"
