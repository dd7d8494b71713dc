__version__ = "1.0.0"
__author__ = "fraclap developers"
__description__ = "Adaptive finite elements for the integral fractional Laplacian"
