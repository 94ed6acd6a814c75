"""Weak-solution residuals and the Cantor-set encoding of bit states."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from .dyadic import DyadicTime, LatticePoint
from .model import ModelSpec, ProblemSpec, Space, State, local_update


class NothingCheckable(ValueError):
    """The supplied window contains no point whose stencil is fully defined."""


@dataclass(frozen=True)
class Violation:
    point: LatticePoint
    expected: int
    found: int
    reason: str = "update"


def _stencil(point: LatticePoint) -> list[LatticePoint] | None:
    n, t = point
    one = DyadicTime(1, n)
    prev = t - one
    deps = [LatticePoint(n, prev), LatticePoint(n + 1, prev)]
    if point.parity == "even":
        prev2 = prev - one
        deps += [LatticePoint(n - 1, prev2), LatticePoint(n, prev2)]
    return deps


def residual_check(model: ModelSpec, field: Mapping[LatticePoint, int], problem: ProblemSpec,
                   max_scale: int | None = None) -> list[Violation]:
    """Points of ``field`` that break the update rule, initial or boundary conditions.

    Only points whose whole stencil lies in the field are checked, and only
    scales ``<= max_scale`` when given (so a regularized row is not held to
    the dynamics).  Raises :class:`NothingCheckable` when no point qualifies.
    """
    out = []
    checked = 0
    for p, v in field.items():
        n, t = p
        if max_scale is not None and n > max_scale:
            continue
        if n == 0:
            if t.level == 0:
                checked += 1
                if v != problem.b(t.numerator):
                    out.append(Violation(p, problem.b(t.numerator), v, "boundary"))
            continue
        if t.numerator == 0:
            checked += 1
            if v != problem.initial[n]:
                out.append(Violation(p, problem.initial[n], v, "initial"))
            continue
        deps = _stencil(p)
        vals = [field.get(d) for d in deps]
        if any(x is None for x in vals):
            continue
        checked += 1
        expected = local_update(model, p.parity, *vals)
        if expected != v:
            out.append(Violation(p, expected, v))
    if not checked:
        raise NothingCheckable("no point of the window has its full stencil")
    out.sort(key=lambda x: (x.point.time, x.point.scale))
    return out


def cantor_encode(a: State, depth: int | None = None) -> Fraction:
    """``x = sum_n c_n 3**-n`` with ``c_n = 2 a_n``.

    With ``depth`` the expansion stops after that many digits; without it the
    value is exact, a tail of ones past the prefix contributing ``3**-len``.
    """
    if depth is None:
        vals = a.values
        x = _digits_value(vals)
        if a.tail:
            x += Fraction(1, 3 ** len(vals))
        return x
    return _digits_value(a.prefix(depth))


def _digits_value(vals: Sequence[int]) -> Fraction:
    num = 0
    for v in vals:
        if v not in (0, 1):
            raise ValueError(f"Cantor encoding needs bit components, got {v!r}")
        num = 3 * num + 2 * v
    return Fraction(num, 3 ** len(vals))


def cantor_decode(digits: Sequence[int]) -> State:
    """Inverse of :func:`cantor_encode` on a finite ternary digit list."""
    out = []
    for d in digits:
        if d == 1:
            raise ValueError("ternary digit 1 is not in the Cantor set")
        if d not in (0, 2):
            raise ValueError(f"ternary digit must be 0 or 2, got {d!r}")
        out.append(d // 2)
    return State(tuple(out))


def cantor_grid(depth: int) -> Iterator[State]:
    """All zero-tail bit states of the given depth, in increasing Cantor order."""
    for k in range(1 << depth):
        yield State(tuple((k >> (depth - 1 - j)) & 1 for j in range(depth)))


def require_bit(model_or_space) -> None:
    space = getattr(model_or_space, "space", model_or_space)
    if space is not Space.BIT:
        raise ValueError("operation is defined for bit models only")
