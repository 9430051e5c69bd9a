"""Critical contours and shading invariance.

Analytic surfaces and renderings, discrete image calculus, shading
equation verification, Morse-Smale complexes with persistence, K-critical
contour detection and cross-rendering comparison.
"""

from . import critcontours, formats, imagecalc, invariance, morse, renderer, shadingeq, surfacegen

__version__ = "0.1.0"

__all__ = ["critcontours", "formats", "imagecalc", "invariance", "morse", "renderer",
           "shadingeq", "surfacegen"]
