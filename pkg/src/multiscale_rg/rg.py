"""The deterministic RG operator on flow maps and the model-A fixed point."""
from __future__ import annotations

import random
from fractions import Fraction
from typing import Mapping

from .lattice import cantor_encode, cantor_grid, require_bit
from .model import MODEL_A, ModelSpec, Space, State, add_states, coupling
from .solver import FlowMap


def rg_apply(psi: FlowMap, model: ModelSpec) -> FlowMap:
    """``a -> sigma_-(psi(psi(sigma_+ a))) + xi(a)``, one level finer than ``psi``."""
    space = model.space

    def fn(key: tuple[int, ...]) -> State:
        a = State(key)
        inner = psi(psi(a.shift_up(1))).shift_down()
        return add_states(space, inner, coupling(model, a))

    return FlowMap(fn, psi.depth + 1, ("rg", model.name, psi.provenance), space)


def rg_iterate(initial: FlowMap, model: ModelSpec, k: int) -> FlowMap:
    """``k``-fold RG image of ``initial``; each level keeps its own memo."""
    if k < 0:
        raise ValueError(f"iteration count must be >= 0, got {k}")
    psi = initial
    for _ in range(k):
        psi = rg_apply(psi, model)
    return psi


def table_map(table: Mapping[tuple[int, ...], tuple[int, ...]], depth: int,
              space: Space = Space.BIT, name: str = "table") -> FlowMap:
    """Flow map given by an explicit table on depth-``depth`` prefixes."""
    frozen = {tuple(k): State(tuple(v)) for k, v in table.items()}
    return FlowMap(lambda key: frozen[key], depth, ("table", name), space)


def constant_map(value: State, space: Space = Space.BIT) -> FlowMap:
    return FlowMap(lambda key: value, 0, ("constant", value), space)


def random_table_map(rng: random.Random, depth: int, out_depth: int | None = None) -> FlowMap:
    """Random bit map of the given input depth; outputs have ``out_depth`` components."""
    out_depth = depth if out_depth is None else out_depth
    table = {}
    for s in cantor_grid(depth):
        key = s.prefix(depth)
        table[key] = tuple(rng.getrandbits(1) for _ in range(out_depth))
    return table_map(table, depth, name=f"random{depth}")


def fixed_point_A(a: State) -> State:
    """Closed-form attractor of the model-A RG.

    Component 1 is ``f(a1, a2)``, component 2 is ``g(a1, a2)`` and component
    ``n >= 3`` is 1 exactly when one of ``a2..an`` is nonzero.
    """
    for v in a.values + (a.tail,):
        if v not in (0, 1):
            raise ValueError("fixed_point_A is defined on bit states")
    head = (MODEL_A.f(a[1], a[2]), MODEL_A.g(a[1], a[2]))
    k0 = next((k for k in range(2, a.depth + 1) if a[k]), None)
    if k0 is None and a.tail:
        k0 = max(a.depth + 1, 2)
    if k0 is None:
        return State(head)
    start = max(k0, 3)
    return State(head + (0,) * (start - 3), tail=1)


def fixed_point_map(depth: int) -> FlowMap:
    """:func:`fixed_point_A` seen through depth-``depth`` zero-tail prefixes."""
    return FlowMap(lambda key: fixed_point_A(State(key)), depth, ("fixed_point_A",), Space.BIT)


def _first_difference(x: State, y: State) -> int | None:
    if x == y:
        return None
    for i in range(1, max(x.depth, y.depth) + 2):
        if x[i] != y[i]:
            return i
    return None


def convergence_metric(psi1: FlowMap, psi2: FlowMap, depth: int) -> tuple[Fraction, int | None]:
    """Sup Cantor distance between two maps on the depth grid, and the first differing component."""
    require_bit(psi1)
    require_bit(psi2)
    dist = Fraction(0)
    first = None
    for a in cantor_grid(depth):
        y1, y2 = psi1(a), psi2(a)
        d = abs(cantor_encode(y1) - cantor_encode(y2))
        dist = max(dist, d)
        i = _first_difference(y1, y2)
        if i is not None and (first is None or i < first):
            first = i
    return dist, first


def map_table_export(psi: FlowMap, depth: int) -> list[tuple[Fraction, Fraction]]:
    """``(x_in, x_out)`` for every depth-``depth`` Cantor grid point, sorted by ``x_in``."""
    require_bit(psi)
    return [(cantor_encode(a), cantor_encode(psi(a))) for a in cantor_grid(depth)]


def approach_third(psi: FlowMap, k_max: int | None = None) -> tuple[list[tuple[Fraction, Fraction]], Fraction]:
    """Outputs along ``x_k = 0.0 2^k 0...`` (ternary) which increase to ``1/3``, and the output at ``1/3``."""
    require_bit(psi)
    k_max = psi.depth if k_max is None else k_max
    below = []
    for k in range(1, k_max + 1):
        a = State((0,) + (1,) * k)
        below.append((cantor_encode(a), cantor_encode(psi(a))))
    at = cantor_encode(psi(State((0,), tail=1)))
    return below, at


def jump_at_third(psi: FlowMap) -> tuple[Fraction, Fraction]:
    """Input and output gaps between ``1/3`` and the closest grid point below it that ``psi`` resolves.

    ``psi`` reads ``depth`` components, so ``(0, 1, ..., 1, 0)`` with
    ``depth - 2`` ones is the last approximant it can tell apart from ``1/3``.
    The input gap is ``3**-(depth-1)``; a map continuous at ``1/3`` has an
    output gap of comparable size, a jump keeps it bounded away from zero.
    """
    require_bit(psi)
    if psi.depth < 3:
        raise ValueError("jump diagnostic needs a map of depth >= 3")
    a = State((0,) + (1,) * (psi.depth - 2))
    third = State((0,), tail=1)
    return (cantor_encode(third) - cantor_encode(a),
            abs(cantor_encode(psi(third)) - cantor_encode(psi(a))))
