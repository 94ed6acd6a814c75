"""Exact dyadic time arithmetic on the multi-scale lattice.

Every lattice time is ``t = m * 2**-n``.  Times are kept as an integer
numerator and a level in normal form (``n == 0`` or ``m`` odd), so equality,
ordering and addition never touch floating point.
"""
from __future__ import annotations

import functools
from fractions import Fraction
from typing import NamedTuple


@functools.total_ordering
class DyadicTime:
    """Non-negative dyadic rational ``numerator * 2**-level`` in normal form."""

    __slots__ = ("numerator", "level")

    def __init__(self, numerator: int, level: int = 0):
        if numerator < 0 or level < 0:
            raise ValueError(f"dyadic time needs m >= 0 and n >= 0, got ({numerator}, {level})")
        if numerator == 0:
            level = 0
        else:
            shift = min((numerator & -numerator).bit_length() - 1, level)
            numerator >>= shift
            level -= shift
        object.__setattr__(self, "numerator", numerator)
        object.__setattr__(self, "level", level)

    def __setattr__(self, name, value):
        raise AttributeError("DyadicTime is immutable")

    def __reduce__(self):
        return (DyadicTime, (self.numerator, self.level))

    @classmethod
    def from_fraction(cls, value) -> "DyadicTime":
        """Build from anything :class:`fractions.Fraction` accepts ("2.625", "21/8", 0.5)."""
        q = Fraction(value)
        den = q.denominator
        if den & (den - 1):
            raise ValueError(f"{value!r} is not a dyadic rational")
        if q < 0:
            raise ValueError(f"negative time {value!r}")
        return cls(q.numerator, den.bit_length() - 1)

    def ticks(self, level: int) -> int:
        """Return ``t * 2**level``; raises if ``t`` is not on that scale's grid."""
        if level < self.level:
            raise ValueError(f"time {self} is not a multiple of 2^-{level}")
        return self.numerator << (level - self.level)

    def is_multiple_of(self, level: int) -> bool:
        return self.level <= level

    def floor(self) -> int:
        return self.numerator >> self.level

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.level)

    def _aligned(self, other: "DyadicTime") -> tuple[int, int, int]:
        lvl = max(self.level, other.level)
        return self.numerator << (lvl - self.level), other.numerator << (lvl - other.level), lvl

    def __add__(self, other: "DyadicTime") -> "DyadicTime":
        if not isinstance(other, DyadicTime):
            return NotImplemented
        a, b, lvl = self._aligned(other)
        return DyadicTime(a + b, lvl)

    def __sub__(self, other: "DyadicTime") -> "DyadicTime":
        if not isinstance(other, DyadicTime):
            return NotImplemented
        a, b, lvl = self._aligned(other)
        return DyadicTime(a - b, lvl)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DyadicTime):
            return NotImplemented
        return self.numerator == other.numerator and self.level == other.level

    def __lt__(self, other: "DyadicTime") -> bool:
        if not isinstance(other, DyadicTime):
            return NotImplemented
        a, b, _ = self._aligned(other)
        return a < b

    def __hash__(self) -> int:
        return hash((self.numerator, self.level))

    def __float__(self) -> float:
        return self.numerator / (1 << self.level)

    def __repr__(self) -> str:
        return f"DyadicTime({self.numerator}, {self.level})"

    def __str__(self) -> str:
        if self.level == 0:
            return str(self.numerator)
        return f"{self.numerator}/{1 << self.level}"


def dyadic(m: int, n: int = 0) -> DyadicTime:
    """Normal-form constructor for ``m * 2**-n``."""
    return DyadicTime(m, n)


def tau(n: int) -> DyadicTime:
    """Turn-over time ``2**-n`` of scale ``n``."""
    return DyadicTime(1, n)


ZERO = DyadicTime(0, 0)


def time_decompose(t: DyadicTime) -> tuple[int, list[int]]:
    """Split ``t`` into ``i + tau(n_1) + ... + tau(n_c)`` with ``n_1 < ... < n_c``.

    The scales are the positions of the set bits of the fractional part,
    which makes the decomposition unique.
    """
    i = t.floor()
    frac = t.numerator - (i << t.level)
    scales = [t.level - k for k in range(t.level - 1, -1, -1) if (frac >> k) & 1]
    return i, scales


class LatticePoint(NamedTuple):
    """A lattice node ``(n, t)``; ``n = 0`` is the boundary row."""

    scale: int
    time: DyadicTime

    @classmethod
    def make(cls, scale: int, time) -> "LatticePoint":
        if not isinstance(time, DyadicTime):
            time = DyadicTime.from_fraction(time)
        if scale < 0:
            raise ValueError(f"negative scale {scale}")
        if time.level > scale:
            raise ValueError(f"time {time} is not on the grid of scale {scale}")
        return cls(scale, time)

    @property
    def index(self) -> int:
        """``t / tau(n)`` as an integer."""
        return self.time.ticks(self.scale)

    @property
    def parity(self) -> str:
        return "odd" if self.index & 1 else "even"
