"""Deterministic regularized solutions, flow maps and blowup analysis."""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping

from . import engine
from .dyadic import DyadicTime, LatticePoint, tau, time_decompose
from .model import (ModelSpec, ProblemSpec, Space, State, add_states,
                    boundary_shift)


class RegularizationError(ValueError):
    """A regularization cannot produce the values a run asks for."""


@dataclass(frozen=True)
class Cutoff:
    """All scales below the regularization scale are frozen at zero."""

    def describe(self) -> dict:
        return {"kind": "cutoff"}


@dataclass(frozen=True)
class ConstAt:
    """Scale N+1 pinned to ``value`` at every time, deeper scales zero."""

    value: int = 1

    def describe(self) -> dict:
        return {"kind": "const", "value": self.value}


@dataclass(frozen=True, eq=False)
class MapReg:
    """Regularized scales evolve by a finite-depth map once per ``tau(N)``.

    ``table`` maps depth-``depth`` tuples ``(u_{N+1}, ..., u_{N+depth})`` to
    their values one step ``tau(N)`` later; deeper scales are zero.  Initial
    values of the regularized scales come from the initial state.  On the
    odd ticks of scale N+1 the value is held from the previous step.
    """

    table: Mapping[tuple[int, ...], tuple[int, ...]]
    depth: int

    def __post_init__(self):
        for k, v in self.table.items():
            if len(k) != self.depth or len(v) != self.depth:
                raise RegularizationError(
                    f"MapReg entries must have length {self.depth}: {k!r} -> {v!r}")

    def step(self, u: tuple[int, ...]) -> tuple[int, ...]:
        try:
            return tuple(self.table[u])
        except KeyError:
            raise RegularizationError(f"MapReg table has no entry for {u!r}") from None

    def describe(self) -> dict:
        return {"kind": "map", "depth": self.depth,
                "table": [[list(k), list(v)] for k, v in sorted(self.table.items())]}


@dataclass(frozen=True)
class Pinned:
    """Scale N+1 equals ``value`` at the listed times and zero elsewhere."""

    times: frozenset[DyadicTime]
    value: int = 1

    def describe(self) -> dict:
        return {"kind": "pinned", "value": self.value,
                "times": [[t.numerator, t.level] for t in sorted(self.times)]}


RegSpec = Cutoff | ConstAt | MapReg | Pinned


def _map_reg_states(reg: MapReg, start: tuple[int, ...]) -> Callable[[int], tuple[int, ...]]:
    states = [start]

    def at(k: int) -> tuple[int, ...]:
        while len(states) <= k:
            states.append(reg.step(states[-1]))
        return states[k]

    return at


def _reg_iter(reg, lanes, N: int, a: State, state_at=None) -> Iterator:
    K = N + 1
    if isinstance(reg, Cutoff):
        return engine.repeat_value(lanes.zero)
    if isinstance(reg, ConstAt):
        return engine.repeat_value(lanes.const(reg.value))
    if isinstance(reg, MapReg):
        return engine.from_function(lambda s: lanes.const(state_at(s >> 1)[0]))
    if isinstance(reg, Pinned):
        pinned = {t.ticks(K) for t in reg.times}
        on, off = lanes.const(reg.value), lanes.zero
        return engine.from_function(lambda s: on if s in pinned else off)
    raise TypeError(f"unknown regularization {reg!r}")


class Solution:
    """Materialized regularized field for scales ``0..N+1`` on ``[0, horizon]``.

    ``rows[n][m]`` is ``u_n(m * 2**-n)``; row 0 holds the boundary at integer
    times and row ``N+1`` the regularized scale.
    """

    def __init__(self, problem: ProblemSpec, N: int, reg, horizon: DyadicTime,
                 rows: list[list[int]], deep: Callable[[int], tuple[int, ...]] | None = None):
        self.problem = problem
        self.level = N
        self.reg = reg
        self.horizon = horizon
        self.rows = rows
        self._deep = deep

    @property
    def model(self) -> ModelSpec:
        return self.problem.model

    @property
    def max_scale(self) -> int:
        return self.level + 1

    def value(self, n: int, t) -> int:
        if not isinstance(t, DyadicTime):
            t = DyadicTime.from_fraction(t)
        if n > self.max_scale:
            return self._deep_value(n, t)
        m = t.ticks(n)
        row = self.rows[n]
        if m >= len(row):
            raise KeyError(f"({n}, {t}) lies beyond the horizon {self.horizon}")
        return row[m]

    def _deep_value(self, n: int, t: DyadicTime) -> int:
        if self._deep is None:
            return 0
        k = t.ticks(self.level) if t.level <= self.level else t.ticks(self.level + 1) >> 1
        return self._deep(k)[n - self.level - 1]

    def __getitem__(self, point) -> int:
        n, t = point
        return self.value(n, t)

    def times(self, n: int) -> list[DyadicTime]:
        return [DyadicTime(m, n) for m in range(len(self.rows[n]))]

    def points(self, max_scale: int | None = None):
        top = self.max_scale if max_scale is None else min(max_scale, self.max_scale)
        for n in range(top + 1):
            for m, v in enumerate(self.rows[n]):
                yield LatticePoint(n, DyadicTime(m, n)), v

    def to_field(self, max_scale: int | None = None, t_max: DyadicTime | None = None,
                 strict: bool = False) -> dict[LatticePoint, int]:
        """Lattice values as a dict, optionally clipped to ``t <= t_max`` (``<`` if strict)."""
        out = {}
        for p, v in self.points(max_scale):
            if t_max is not None and (p.time > t_max or (strict and p.time == t_max)):
                continue
            out[p] = v
        return out

    def state_at(self, t) -> State:
        """``(u_{n_c}(t), u_{n_c+1}(t), ...)`` up to the regularized scale."""
        if not isinstance(t, DyadicTime):
            t = DyadicTime.from_fraction(t)
        start = state_start(t)
        if start > self.max_scale:
            raise ValueError(f"time {t} is finer than the materialized scales")
        vals = tuple(self.value(n, t) for n in range(start, self.max_scale + 1))
        if self._deep is not None and t.level <= self.level:
            vals += self._deep(t.ticks(self.level))[1:]
        return State(vals)

    def n_max(self, t) -> int:
        """Largest scale with a nonzero value at time t (0 if none)."""
        if not isinstance(t, DyadicTime):
            t = DyadicTime.from_fraction(t)
        best = 0
        for n in range(max(t.level, 1), self.max_scale + 1):
            if self.value(n, t):
                best = n
        return best


def state_start(t: DyadicTime) -> int:
    """Scale of the first component of the state at time ``t`` (1 at integer times)."""
    return t.level if t.level else 1


def _initial_lanes(lanes, problem: ProblemSpec, N: int):
    return [lanes.const(problem.initial[n]) for n in range(1, N + 1)]


def _boundary_lanes(lanes, problem: ProblemSpec, horizon: DyadicTime):
    return [lanes.const(problem.b(t)) for t in range(horizon.floor() + 1)]


def _check_horizon(horizon: DyadicTime, N: int) -> DyadicTime:
    if not isinstance(horizon, DyadicTime):
        horizon = DyadicTime.from_fraction(horizon)
    if horizon.level > N + 1:
        raise ValueError(f"horizon {horizon} is not on the grid of scale {N + 1}")
    return horizon


def solve_regularized(problem: ProblemSpec, N: int, reg=Cutoff(), horizon=DyadicTime(1, 1)) -> Solution:
    """Regularized solution at level ``N`` on ``[0, horizon]``.

    Every lattice value is computed exactly once, in time order along the
    dependency DAG of the update rule.
    """
    if N < 1:
        raise ValueError(f"regularization level must be >= 1, got {N}")
    horizon = _check_horizon(horizon, N)
    lanes = engine.lanes_for(problem.model, 1)
    deep = None
    if isinstance(reg, MapReg):
        deep = _map_reg_states(reg, problem.initial.shift_up(N).prefix(reg.depth))
    reg_values = _reg_iter(reg, lanes, N, problem.initial, deep)
    res = engine.sweep(lanes, N, horizon.ticks(N + 1), _initial_lanes(lanes, problem, N),
                       _boundary_lanes(lanes, problem, horizon), reg_values, keep_rows=True)
    rows = res.rows
    if problem.model.space is Space.PHASE:
        rows = [[int(v[0]) for v in row] for row in rows]
    return Solution(problem, N, reg, horizon, rows, deep)


class FlowMap:
    """A map on states that depends only on the first ``depth`` components.

    Evaluations are memoized by that prefix; concurrent fills are idempotent.
    """

    def __init__(self, fn: Callable[[tuple[int, ...]], State], depth: int, provenance, space: Space = Space.BIT):
        self._fn = fn
        self.depth = depth
        self.provenance = provenance
        self.space = space
        self._memo: dict[tuple[int, ...], State] = {}

    def __call__(self, a: State) -> State:
        key = a.prefix(self.depth)
        out = self._memo.get(key)
        if out is None:
            out = self._fn(key)
            self._memo[key] = out
        return out

    def __repr__(self) -> str:
        return f"FlowMap(depth={self.depth}, provenance={self.provenance!r})"


def _flow_depth(N: int, reg) -> int:
    if isinstance(reg, Pinned):
        raise RegularizationError("flow maps need a time-invariant regularization")
    return N + reg.depth if isinstance(reg, MapReg) else N


def _run_from(model: ModelSpec, N: int, reg, key: tuple[int, ...], b0: int, horizon: DyadicTime) -> State:
    problem = ProblemSpec(model, State(key), (b0,))
    sol = solve_regularized(problem, N, reg, horizon)
    return sol.state_at(horizon)


@functools.lru_cache(maxsize=None)
def flow_psi(model: ModelSpec, N: int, reg=Cutoff()) -> FlowMap:
    """Half-time map ``a -> u^(N)(1/2)``; boundary conditions never enter."""
    if N < 1:
        raise ValueError(f"regularization level must be >= 1, got {N}")
    depth = _flow_depth(N, reg)
    return FlowMap(lambda key: _run_from(model, N, reg, key, 0, tau(1)), depth,
                   ("psi", model.name, N, reg), model.space)


@functools.lru_cache(maxsize=None)
def flow_phi(model: ModelSpec, N: int, reg=Cutoff(), b: int = 0) -> FlowMap:
    """Unit-time map ``a -> u^(N)(1)`` under boundary value ``b_0 = b`` (direct simulation)."""
    depth = _flow_depth(N, reg)
    return FlowMap(lambda key: _run_from(model, N, reg, key, b, DyadicTime(1)), depth,
                   ("phi", model.name, N, reg, b), model.space)


def compose_phi(model: ModelSpec, psi: FlowMap, b: int) -> Callable[[State], State]:
    """``psi o psi + beta_b``."""
    return lambda a: add_states(model.space, psi(psi(a)), boundary_shift(model, b, a))


def eval_fractional(problem: ProblemSpec, N: int, reg=Cutoff(), t=DyadicTime(1, 1)) -> State:
    """State ``(u_{n_c}(t), u_{n_c+1}(t), ...)`` assembled from flow maps.

    Integer steps use ``psi o psi + beta_b``; each fractional scale ``n_k``
    applies ``psi^(N-n_k+1)`` after shifting away the scales that do not
    exist at that time.
    """
    if not isinstance(t, DyadicTime):
        t = DyadicTime.from_fraction(t)
    i, scales = time_decompose(t)
    if scales and scales[-1] > N:
        raise ValueError(f"time {t} needs scale {scales[-1]} > N = {N}")
    model = problem.model
    psi = flow_psi(model, N, reg)
    u = problem.initial
    for j in range(i):
        u = compose_phi(model, psi, problem.b(j))(u)
    prev = 1
    for n in scales:
        u = flow_psi(model, N - n + 1, reg)(u.shift_up(n - prev))
        prev = n
    return u


# --- strong solutions and blowup -------------------------------------------

GLOBAL_STRONG = "global_strong"
BLOWUP = "blowup"
HORIZON_REACHED = "horizon_reached"


@dataclass
class BlowupReport:
    outcome: str
    n_max0: int
    t_bc: int | None
    T: DyadicTime | None = None
    trace: dict[tuple[int, DyadicTime], int] = field(default_factory=dict)
    field: Solution | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "n_max0": self.n_max0,
            "t_bc": self.t_bc,
            "T": None if self.T is None else [self.T.numerator, self.T.level],
            "trace": [[n, t.numerator, t.level, v] for (n, t), v in sorted(
                self.trace.items(), key=lambda kv: (kv[0][0], kv[0][1]))],
            "note": self.note,
        }


def blowup_time(n_max0: int, t_bc: int | None) -> DyadicTime | None:
    """Closed-form blowup time when g(1,0) = 1."""
    if n_max0 == 0:
        return None if t_bc is None else DyadicTime(t_bc + 2)
    return DyadicTime(2, n_max0)


def solve_strong(problem: ProblemSpec, horizon, trace_depth: int = 12) -> BlowupReport:
    """Classify the strong solution of a bit problem and build its staircase."""
    model = problem.model
    if model.space is not Space.BIT:
        raise ValueError("strong solutions are defined for bit models only")
    n0 = problem.n_max0
    if n0 is None:
        raise ValueError("initial state must have finitely many nonzero components")
    if not isinstance(horizon, DyadicTime):
        horizon = DyadicTime.from_fraction(horizon)
    t_bc = problem.t_bc
    base = max(n0, 1)
    if not model.zero_is_stationary:
        return BlowupReport(HORIZON_REACHED, n0, t_bc,
                            note="f(0,0) or g(0,0) is nonzero; no closed form applies")
    if model.g(1, 0) == 0:
        sol = solve_regularized(problem, base, Cutoff(), _grid(horizon, base + 1))
        return BlowupReport(GLOBAL_STRONG, n0, t_bc, field=sol)
    T = blowup_time(n0, t_bc)
    if T is None or T > horizon:
        sol = solve_regularized(problem, base, Cutoff(), _grid(horizon, base + 1))
        return BlowupReport(HORIZON_REACHED, n0, t_bc, T=T, field=sol,
                            note="blowup time lies beyond the horizon")
    trace = {}
    f10 = model.f(1, 0)
    for n in range(base, base + trace_depth):
        trace[(n, T - DyadicTime(2, n))] = 1
        trace[(n, T - tau(n))] = f10
    sol = solve_regularized(problem, base + trace_depth, Cutoff(), T)
    return BlowupReport(BLOWUP, n0, t_bc, T=T, trace=trace, field=sol)


def _grid(t: DyadicTime, level: int) -> DyadicTime:
    # round down onto the grid of the given scale
    if t.level <= level:
        return t
    return DyadicTime(t.numerator >> (t.level - level), level)


def nonuniqueness_witness(problem: ProblemSpec, N: int, horizon=None) -> tuple[Solution, Solution]:
    """Two regularized solutions that agree up to the blowup time and split after it.

    The first uses the zero cutoff; the second additionally pins scale N+1 to
    one at times T and T + tau(N).
    """
    if problem.model.space is not Space.BIT or problem.model.g(1, 0) != 1:
        raise ValueError("non-uniqueness witnesses need a bit model with g(1,0) = 1")
    n0 = problem.n_max0
    if n0 is None:
        raise ValueError("initial state must have finitely many nonzero components")
    T = blowup_time(n0, problem.t_bc)
    if T is None:
        raise ValueError("problem has no finite-time blowup")
    if N <= n0 + 1:
        raise ValueError(f"N must exceed n_max(0) + 1 = {n0 + 1}")
    if horizon is None:
        horizon = T + DyadicTime(1, n0 + 1)
    first = solve_regularized(problem, N, Cutoff(), horizon)
    second = solve_regularized(problem, N, Pinned(frozenset({T, T + tau(N)})), horizon)
    return first, second


def first_disagreement(s1: Solution, s2: Solution, max_scale: int | None = None):
    """Earliest (time, scale) point where two solutions differ, or None."""
    top = min(s1.max_scale, s2.max_scale) if max_scale is None else max_scale
    best = None
    for n in range(top + 1):
        r1, r2 = s1.rows[n], s2.rows[n]
        for m in range(min(len(r1), len(r2))):
            if r1[m] != r2[m]:
                p = LatticePoint(n, DyadicTime(m, n))
                if best is None or (p.time, p.scale) < (best.time, best.scale):
                    best = p
                break
    return best


__all__ = [
    "Cutoff", "ConstAt", "MapReg", "Pinned", "RegularizationError", "Solution",
    "solve_regularized", "FlowMap", "flow_psi", "flow_phi", "compose_phi",
    "eval_fractional", "state_start", "BlowupReport", "solve_strong", "blowup_time",
    "nonuniqueness_witness", "first_disagreement", "GLOBAL_STRONG", "BLOWUP", "HORIZON_REACHED",
]
