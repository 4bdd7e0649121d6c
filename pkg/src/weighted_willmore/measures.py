"""Volumes of unit balls and areas of unit spheres in real dimension."""
import math

from scipy.special import gammaln


def ball_volume(d):
    """|B^d| for real ``d >= 0``."""
    if d < 0:
        raise ValueError("dimension must be non-negative")
    return math.exp(0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1.0))


def sphere_area(k):
    """|S^k|, the area of the unit ``k``-sphere sitting in R^(k+1)."""
    if k < 0:
        raise ValueError("dimension must be non-negative")
    d = k + 1.0
    return 2.0 * math.exp(0.5 * d * math.log(math.pi) - gammaln(0.5 * d))
