"""Circle arithmetic over floats and exact rationals.

Angles live in [0, 1) (units of full turns).  Exact geometry uses
``fractions.Fraction``; numerics use floats.  The default base frequency and
translation number are high-precision rational convergents of the golden-ratio
conjugate and of sqrt(2)-1, accurate to 1e-30, so that 1, omega, rho are
(effectively) rationally independent while all breakpoint arithmetic stays
exact.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

Scalar = Union[int, float, Fraction]


def mod1(x: Scalar) -> Scalar:
    """Reduce to [0, 1), preserving the numeric type."""
    if isinstance(x, Fraction):
        return x - (x.numerator // x.denominator)
    return x % 1 if isinstance(x, int) else x % 1.0


def circ_dist(a: Scalar, b: Scalar) -> Scalar:
    """Circular distance, always <= 1/2."""
    d = mod1(a - b)
    half = Fraction(1, 2) if isinstance(d, Fraction) else 0.5
    return d if d <= half else 1 - d


def signed_gap(a: Scalar, b: Scalar) -> Scalar:
    """Representative of b - a in (-1/2, 1/2]."""
    d = mod1(b - a)
    half = Fraction(1, 2) if isinstance(d, Fraction) else 0.5
    return d if d <= half else d - 1


def _convergent(coeff: int, err: Fraction) -> Fraction:
    """Continued-fraction convergent of [0; c, c, c, ...] with error < err."""
    p0, q0, p1, q1 = 0, 1, 1, coeff
    while Fraction(1, q1 * q1) >= err:
        p0, q0, p1, q1 = p1, q1, coeff * p1 + p0, coeff * q1 + q0
    return Fraction(p1, q1)


#: golden-ratio conjugate (sqrt(5)-1)/2, exact rational to 1e-30
OMEGA_GOLDEN: Fraction = _convergent(1, Fraction(1, 10**30))

#: sqrt(2)-1, exact rational to 1e-30
RHO_SILVER: Fraction = _convergent(2, Fraction(1, 10**30))


def as_fraction(x: Scalar, max_den: int = 10**18) -> Fraction:
    """Coerce a scalar to Fraction (floats via limit_denominator)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(max_den)


def arc_contains(lo: Scalar, hi: Scalar, x: Scalar) -> bool:
    """Whether the closed circle arc [lo, hi] (hi may exceed 1) contains x."""
    span = hi - lo
    if span >= 1:
        return True
    t = mod1(x - lo)
    return t <= span


def arc_intersection(a: tuple, b: tuple):
    """Intersection of two closed circle arcs (lo, hi), hi <= lo+1.

    Returns a list of (lo, hi) pieces (0, 1 or 2 of them).
    """
    out = []
    alo, ahi = a
    blo, bhi = b
    if ahi - alo >= 1:
        return [b]
    if bhi - blo >= 1:
        return [a]
    # unroll b twice against a held fixed
    for shift in (-1, 0, 1):
        lo = max(alo, blo + shift)
        hi = min(ahi, bhi + shift)
        if lo <= hi:
            out.append((lo, hi))
    # merge duplicates produced by the unrolling
    dedup = []
    for piece in out:
        if not any(mod1(piece[0] - q[0]) == 0 and piece[1] - piece[0] == q[1] - q[0] for q in dedup):
            dedup.append(piece)
    return dedup
