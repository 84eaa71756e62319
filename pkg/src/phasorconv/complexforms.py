"""Scalar complex arithmetic in two representations, with exact operation costs.

A complex value is either a ``CRect`` (real + imaginary parts) or a ``CPhasor``
(magnitude and angle).  Multiplying two rectangular values takes 4 real
multiplications and 2 additions; multiplying two phasors takes 1 multiplication
and 1 addition.  Every operation here optionally charges its real-arithmetic
cost to a caller-owned ``OpCost`` accumulator so that cost claims can be checked
against actual execution, not estimated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "CRect",
    "CPhasor",
    "OpCost",
    "TO_PHASOR_COST",
    "TO_RECTANGULAR_COST",
    "MUL_RECT_COST",
    "MUL_PHASOR_COST",
    "RECT_REDUCE_COST",
    "to_phasor",
    "to_rectangular",
    "mul_rect",
    "mul_phasor",
    "conj_rect",
    "conj_phasor",
    "normalize_angle",
]

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CRect:
    """Complex scalar as real and imaginary parts."""

    re: float
    im: float


@dataclass(frozen=True)
class CPhasor:
    """Complex scalar as magnitude >= 0 and angle in radians, angle in (-pi, pi].

    A zero magnitude always carries angle 0 (canonical zero).
    """

    mag: float
    ang: float


@dataclass
class OpCost:
    """Counts of real arithmetic operations.

    ``trig`` covers sin/cos/atan2 evaluations.  Counts are plain integers and
    accumulation is in-place; share one instance per logical ledger, never
    across threads.
    """

    mul: int = 0
    add: int = 0
    div: int = 0
    sqrt: int = 0
    trig: int = 0

    def accumulate(self, other: "OpCost", times: int = 1) -> None:
        self.mul += other.mul * times
        self.add += other.add * times
        self.div += other.div * times
        self.sqrt += other.sqrt * times
        self.trig += other.trig * times

    def __add__(self, other: "OpCost") -> "OpCost":
        return OpCost(
            self.mul + other.mul,
            self.add + other.add,
            self.div + other.div,
            self.sqrt + other.sqrt,
            self.trig + other.trig,
        )

    def scaled(self, times: int) -> "OpCost":
        return OpCost(
            self.mul * times,
            self.add * times,
            self.div * times,
            self.sqrt * times,
            self.trig * times,
        )

    def total(self) -> int:
        return self.mul + self.add + self.div + self.sqrt + self.trig

    def as_dict(self) -> dict:
        return {
            "mul": self.mul,
            "add": self.add,
            "div": self.div,
            "sqrt": self.sqrt,
            "trig": self.trig,
        }


# Per-call costs of the scalar operations below.  The vectorized spectrum code
# charges these same constants once per element, so scalar and slab paths stay
# in exact agreement.
TO_PHASOR_COST = OpCost(mul=2, add=1, sqrt=1, trig=1)
TO_RECTANGULAR_COST = OpCost(mul=2, trig=2)
MUL_RECT_COST = OpCost(mul=4, add=2)
MUL_PHASOR_COST = OpCost(mul=1, add=1)
# Accumulating one extra complex term into a rectangular sum: 2 real additions.
RECT_REDUCE_COST = OpCost(add=2)


def normalize_angle(ang: float) -> float:
    """Wrap an angle to (-pi, pi].  Congruent mod 2*pi with the input."""
    wrapped = math.remainder(ang, _TWO_PI)
    if wrapped <= -math.pi:
        wrapped += _TWO_PI
    return wrapped


def to_phasor(z: CRect, cost: OpCost | None = None) -> CPhasor:
    """Convert rectangular to polar form.

    The charge (2 mul, 1 add, 1 sqrt, 1 trig) reflects direct evaluation of
    sqrt(re^2 + im^2); ``hypot`` computes the same quantity without overflow.
    """
    if cost is not None:
        cost.accumulate(TO_PHASOR_COST)
    mag = math.hypot(z.re, z.im)
    if mag == 0.0:
        return CPhasor(0.0, 0.0)
    ang = math.atan2(z.im, z.re)
    if ang <= -math.pi:  # atan2(-0.0, x<0) returns -pi; keep the half-open range
        ang = math.pi
    return CPhasor(mag, ang)


def to_rectangular(z: CPhasor, cost: OpCost | None = None) -> CRect:
    """Convert polar to rectangular form: (mag*cos(ang), mag*sin(ang))."""
    if cost is not None:
        cost.accumulate(TO_RECTANGULAR_COST)
    return CRect(z.mag * math.cos(z.ang), z.mag * math.sin(z.ang))


def mul_rect(z1: CRect, z2: CRect, cost: OpCost | None = None) -> CRect:
    """Rectangular product: (a1*a2 - b1*b2) + j(a1*b2 + a2*b1)."""
    if cost is not None:
        cost.accumulate(MUL_RECT_COST)
    return CRect(z1.re * z2.re - z1.im * z2.im, z1.re * z2.im + z2.re * z1.im)


def mul_phasor(z1: CPhasor, z2: CPhasor, cost: OpCost | None = None) -> CPhasor:
    """Phasor product: magnitudes multiply, angles add.

    Only the multiply and the add are charged; the angle wrap that keeps the
    result in (-pi, pi] is bookkeeping, tracked separately by the flop ledger's
    wrap counter in the slab pipeline.
    """
    if cost is not None:
        cost.accumulate(MUL_PHASOR_COST)
    mag = z1.mag * z2.mag
    if mag == 0.0:
        return CPhasor(0.0, 0.0)
    return CPhasor(mag, normalize_angle(z1.ang + z2.ang))


def conj_rect(z: CRect) -> CRect:
    """Complex conjugate in rectangular form (negated imaginary part)."""
    return CRect(z.re, -z.im)


def conj_phasor(z: CPhasor) -> CPhasor:
    """Complex conjugate in polar form (negated, re-wrapped angle)."""
    if z.mag == 0.0:
        return CPhasor(0.0, 0.0)
    return CPhasor(z.mag, normalize_angle(-z.ang))
