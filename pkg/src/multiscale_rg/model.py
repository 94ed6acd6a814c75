"""State spaces, ideal models, states and problems.

Values are plain Python ints interpreted through the model's space:

* ``Space.BIT``: 0 or 1, the group law is XOR.
* ``Space.PHASE``: a 64-bit fixed-point fraction ``u = v / 2**64`` of the
  circle, the group law is addition mod ``2**64``.  Multiplying by an integer
  coefficient is exact, so the expanding circle model runs without rounding.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

PHASE_BITS = 64
PHASE_MOD = 1 << PHASE_BITS
PHASE_MASK = PHASE_MOD - 1


class Space(enum.Enum):
    BIT = "bit"
    PHASE = "phase"

    def add(self, x: int, y: int) -> int:
        if self is Space.BIT:
            return x ^ y
        return (x + y) & PHASE_MASK

    def neg(self, x: int) -> int:
        if self is Space.BIT:
            return x
        return (-x) & PHASE_MASK

    def check(self, x: int) -> int:
        if self is Space.BIT:
            if x not in (0, 1):
                raise ValueError(f"bit value must be 0 or 1, got {x!r}")
        elif not 0 <= x < PHASE_MOD:
            raise ValueError(f"phase value must lie in [0, 2^64), got {x!r}")
        return x


def phase(x) -> int:
    """Fixed-point phase of ``x mod 1``; ``x`` must be a multiple of ``2**-64``."""
    q = Fraction(x) * PHASE_MOD
    if q.denominator != 1:
        raise ValueError(f"{x!r} is not representable with 64 fractional bits")
    return int(q) & PHASE_MASK


def phase_value(v: int) -> Fraction:
    """Exact fraction in [0, 1) represented by a fixed-point phase."""
    return Fraction(v, PHASE_MOD)


@dataclass(frozen=True)
class ModelSpec:
    """An ideal lattice model: state space plus couplings ``f`` and ``g``.

    For bit models ``f_table``/``g_table`` hold ``(h(0,0), h(0,1), h(1,0), h(1,1))``.
    For phase models they hold integer pairs ``(alpha, beta)`` meaning
    ``h(u, u') = alpha*u + beta*u' mod 1``.
    """

    space: Space
    f_table: tuple[int, ...]
    g_table: tuple[int, ...]
    name: str = "custom"

    def __post_init__(self):
        if self.space is Space.BIT:
            for tab in (self.f_table, self.g_table):
                if len(tab) != 4 or any(v not in (0, 1) for v in tab):
                    raise ValueError(f"bit tables need 4 entries in {{0,1}}, got {tab!r}")
        else:
            for tab in (self.f_table, self.g_table):
                if len(tab) != 2 or not all(isinstance(v, int) for v in tab):
                    raise ValueError(f"phase couplings need two integers, got {tab!r}")

    @classmethod
    def bit(cls, f: Sequence[int], g: Sequence[int], name: str = "custom") -> "ModelSpec":
        return cls(Space.BIT, tuple(int(v) for v in f), tuple(int(v) for v in g), name)

    @classmethod
    def phase(cls, f: Sequence[int], g: Sequence[int], name: str = "custom") -> "ModelSpec":
        return cls(Space.PHASE, tuple(int(v) for v in f), tuple(int(v) for v in g), name)

    def _apply(self, tab: tuple[int, ...], x: int, y: int) -> int:
        if self.space is Space.BIT:
            return tab[(x << 1) | y]
        return (tab[0] * x + tab[1] * y) & PHASE_MASK

    def f(self, x: int, y: int) -> int:
        return self._apply(self.f_table, x, y)

    def g(self, x: int, y: int) -> int:
        return self._apply(self.g_table, x, y)

    def add(self, x: int, y: int) -> int:
        return self.space.add(x, y)

    @property
    def zero_is_stationary(self) -> bool:
        return self.f(0, 0) == 0 and self.g(0, 0) == 0

    def to_dict(self) -> dict:
        return {"space": self.space.value, "f": list(self.f_table), "g": list(self.g_table), "name": self.name}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(Space(d["space"]), tuple(d["f"]), tuple(d["g"]), d.get("name", "custom"))


# f(1,0) = g(0,1) = g(1,0) = g(1,1) = 1, all other entries 0
MODEL_A = ModelSpec.bit(f=(0, 0, 1, 0), g=(0, 1, 1, 1), name="A")
# f(1,1) = g(0,1) = g(1,0) = 1, all other entries 0
MODEL_B = ModelSpec.bit(f=(0, 0, 0, 1), g=(0, 1, 1, 0), name="B")
# f(u,u') = 2u + 2u' mod 1, g = 0
PHASE_MODEL = ModelSpec.phase(f=(2, 2), g=(0, 0), name="phase")

BUILTIN_MODELS = {"A": MODEL_A, "B": MODEL_B, "phase": PHASE_MODEL}


def local_update(model: ModelSpec, parity: str, u_n: int, u_next: int,
                 u_prev2: int = 0, u_self2: int = 0) -> int:
    """One lattice update.

    ``u_n, u_next`` are the values one turn-over time earlier at scales n and
    n+1; ``u_prev2, u_self2`` the values two turn-over times earlier at scales
    n-1 and n.  Odd points use ``f`` only, even points add ``g``.
    """
    v = model.f(u_n, u_next)
    if parity == "even":
        v = model.add(v, model.g(u_prev2, u_self2))
    elif parity != "odd":
        raise ValueError(f"parity must be 'odd' or 'even', got {parity!r}")
    return v


@dataclass(frozen=True)
class State:
    """A sequence ``(a_1, a_2, ...)``: explicit prefix followed by a constant tail.

    The prefix is stored with trailing tail-valued entries stripped, so two
    states describing the same sequence compare and hash equal.
    """

    values: tuple[int, ...] = ()
    tail: int = 0

    def __post_init__(self):
        vals = tuple(self.values)
        end = len(vals)
        while end and vals[end - 1] == self.tail:
            end -= 1
        object.__setattr__(self, "values", vals[:end])

    @classmethod
    def of(cls, *values: int, tail: int = 0) -> "State":
        return cls(tuple(values), tail)

    @property
    def depth(self) -> int:
        return len(self.values)

    def __getitem__(self, n: int) -> int:
        """Component ``a_n`` (1-based)."""
        if n < 1:
            raise IndexError(f"components are 1-based, got {n}")
        return self.values[n - 1] if n <= len(self.values) else self.tail

    def prefix(self, d: int) -> tuple[int, ...]:
        vals = self.values[:d]
        return vals + (self.tail,) * (d - len(vals))

    def shift_up(self, k: int = 1) -> "State":
        """sigma_+^k: drop the first k components."""
        return State(self.values[k:], self.tail)

    def shift_down(self) -> "State":
        """sigma_-: prepend a zero component."""
        return State((0,) + self.values, self.tail)

    def __iter__(self):
        raise TypeError("State is an infinite sequence; use prefix(d)")

    def __repr__(self) -> str:
        body = ", ".join(map(str, self.values))
        return f"State(({body}), tail={self.tail})"


def add_states(space: Space, a: State, b: State) -> State:
    d = max(a.depth, b.depth)
    pa, pb = a.prefix(d), b.prefix(d)
    return State(tuple(space.add(x, y) for x, y in zip(pa, pb)), space.add(a.tail, b.tail))


def coupling(model: ModelSpec, a: State) -> State:
    """xi(a) = (f(a_1, a_2), g(a_1, a_2), 0, 0, ...)."""
    return State((model.f(a[1], a[2]), model.g(a[1], a[2])))


def boundary_shift(model: ModelSpec, b: int, a: State) -> State:
    """beta_b(a) = (g(b, a_1), 0, 0, ...)."""
    return State((model.g(b, a[1]),))


@dataclass(frozen=True)
class ProblemSpec:
    """Initial state, boundary sequence (zero tail) and model of the ideal system."""

    model: ModelSpec
    initial: State = field(default_factory=State)
    boundary: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "boundary", tuple(self.boundary))
        space = self.model.space
        for v in self.initial.prefix(self.initial.depth) + (self.initial.tail,):
            space.check(v)
        for v in self.boundary:
            space.check(v)

    def b(self, t: int) -> int:
        return self.boundary[t] if t < len(self.boundary) else 0

    @property
    def n_max0(self) -> int | None:
        """Largest n with a_n = 1 (0 if none); None when the tail is nonzero."""
        if self.initial.tail:
            return None
        return self.initial.depth

    @property
    def t_bc(self) -> int | None:
        """First integer t with b_t != 0, or None (infinite)."""
        for t, v in enumerate(self.boundary):
            if v:
                return t
        return None


def bits(values: Iterable[int]) -> State:
    return State(tuple(int(v) for v in values))
