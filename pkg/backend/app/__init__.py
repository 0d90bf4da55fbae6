"""
Texinpaint Package

Diffusion-guided completion of partial UV textures and reflectance maps.
"""

__version__ = "0.1.0"
