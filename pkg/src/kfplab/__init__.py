"""Numerical laboratory for Hessian estimates of Kolmogorov-Fokker-Planck operators.

The package implements the intrinsic group geometry (anisotropic dilations,
homogeneous norm, quasi-distance), the explicit Gaussian fundamental solution of
the frozen operator and its derivatives, spherical-harmonic kernel expansions,
Hytonen-Kairema style dyadic grids, singular integrals with sparse domination,
and Muckenhoupt / variable-exponent / generalized Orlicz function-space
machinery, together with a batch experiment runner that checks the estimates
numerically at desk scale.
"""

__version__ = "0.1.0"

from .geometry import OperatorShape, Point, kolmogorov_shape, parabolic_shape, validate_shape

__all__ = [
    "OperatorShape",
    "Point",
    "kolmogorov_shape",
    "parabolic_shape",
    "validate_shape",
    "__version__",
]
