"""Approximation by SL2(O_K) orbits over the Euclidean imaginary quadratic rings."""

__version__ = "0.1.0"

from .cf import CFConstants, CFExpansion, check_hypothesis, constants, error_sandwich_check, expand  # noqa: E402
from .field import OKInt, RingSpec, extended_gcd, nearest_integer, ring, units  # noqa: E402
from .matrices import Mat2, TargetSpec, gamma_irrational, gamma_origin, gamma_rational  # noqa: E402
from .pcomplex import PComplex, PrecisionPolicy  # noqa: E402

__all__ = [
    "CFConstants", "CFExpansion", "Mat2", "OKInt", "PComplex", "PrecisionPolicy", "RingSpec", "TargetSpec",
    "check_hypothesis", "constants", "error_sandwich_check", "expand", "extended_gcd", "gamma_irrational",
    "gamma_origin", "gamma_rational", "nearest_integer", "ring", "units",
]
