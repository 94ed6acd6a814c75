"""Lane-parallel sweep of the regularized lattice equations.

A *lane* is one independent realization.  Bit models pack lanes into the
bits of a Python int (bit ``j`` is lane ``j``), so one XOR/AND acts on every
realization at once.  Phase models hold lanes in ``uint64`` arrays, whose
wrapping arithmetic is exactly the circle group in 64-bit fixed point.

The sweep walks time in ticks of the finest materialized scale ``K = N + 1``.
At tick ``s`` the scales ``n`` with ``2**(K-n) | s`` are updated, finest
first.  Each scale keeps a ring of its last four values, which covers every
dependency of the update rule; full rows are kept only on request.
"""
from __future__ import annotations

from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .model import PHASE_MASK, ModelSpec, Space


def _anf(table: Sequence[int], mask: int) -> Callable[[int, int], int]:
    # algebraic normal form: h = c0 ^ c1 x ^ c2 y ^ c3 xy
    t00, t01, t10, t11 = table
    terms = []
    if t00 ^ t01 ^ t10 ^ t11:
        terms.append("(x & y)")
    if t00 ^ t10:
        terms.append("x")
    if t00 ^ t01:
        terms.append("y")
    if t00:
        terms.append("m")
    expr = " ^ ".join(terms) or "0"
    return eval(f"lambda x, y: {expr}", {"m": mask})  # noqa: S307 - expression built from four bits


class BitLanes:
    """Bit-sliced lanes: a lane vector is an int whose bit j is lane j."""

    def __init__(self, model: ModelSpec, width: int):
        self.width = width
        self.mask = (1 << width) - 1
        self.f = _anf(model.f_table, self.mask)
        self.g = _anf(model.g_table, self.mask)
        self.g_is_zero = not any(model.g_table)
        self.zero = 0

    @staticmethod
    def add(x: int, y: int) -> int:
        return x ^ y

    def const(self, v: int) -> int:
        return self.mask if v else 0

    def pack(self, column: Sequence[int]) -> int:
        arr = np.asarray(column, dtype=np.uint8)
        if not arr.any():
            return 0
        return int.from_bytes(np.packbits(arr, bitorder="little").tobytes(), "little")

    def unpack(self, v: int) -> np.ndarray:
        nbytes = (self.width + 7) // 8
        raw = np.frombuffer(v.to_bytes(nbytes, "little"), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[: self.width]

    def ones(self, v: int) -> int:
        return v.bit_count()


class PhaseLanes:
    """Phase lanes as ``uint64`` arrays; products and sums wrap mod 2**64."""

    def __init__(self, model: ModelSpec, width: int):
        self.width = width
        self.f = self._linear(*model.f_table)
        self.g = self._linear(*model.g_table)
        self.g_is_zero = not any(model.g_table)
        self.zero = np.zeros(width, dtype=np.uint64)

    @staticmethod
    def _linear(alpha: int, beta: int):
        a = np.uint64(alpha & PHASE_MASK)
        b = np.uint64(beta & PHASE_MASK)
        if alpha and beta:
            return lambda x, y: x * a + y * b
        if alpha:
            return lambda x, y: x * a
        if beta:
            return lambda x, y: y * b
        return lambda x, y: np.zeros_like(x)

    @staticmethod
    def add(x, y):
        return x + y

    def const(self, v: int) -> np.ndarray:
        return np.full(self.width, v, dtype=np.uint64)

    def pack(self, column: Sequence[int]) -> np.ndarray:
        return np.asarray(column, dtype=np.uint64).reshape(self.width)

    def unpack(self, v) -> np.ndarray:
        return np.asarray(v, dtype=np.uint64)


def lanes_for(model: ModelSpec, width: int):
    if model.space is Space.BIT:
        return BitLanes(model, width)
    return PhaseLanes(model, width)


class SweepResult:
    """Outcome of :func:`sweep`.

    ``rows[n][m]`` is the lane value at ``(n, m * 2**-n)`` when rows were kept;
    ``recorded`` maps requested ``(n, m)`` pairs to lane values; ``final`` holds
    the values at the last tick for scales ``1..K`` (index 0 unused).
    """

    def __init__(self, rows, recorded, final):
        self.rows = rows
        self.recorded = recorded
        self.final = final


def sweep(lanes, N: int, ticks: int, initial: Sequence, boundary: Sequence,
          reg_values: Iterator, keep_rows: bool = False,
          record: dict[int, set[int]] | None = None) -> SweepResult:
    """Run the lattice equations for scales ``1..N`` over ``ticks`` steps of ``2**-(N+1)``.

    ``initial[n-1]`` is the lane value of ``a_n``; ``boundary[t]`` the lane value
    of ``b_t`` for every integer ``t`` up to the horizon; ``reg_values`` yields
    the scale-``N+1`` lane values at indices ``0, 1, ..., ticks``.
    """
    K = N + 1
    f, g, add = lanes.f, lanes.g, lanes.add
    use_g = not lanes.g_is_zero
    zero = lanes.zero
    hist = [[zero, zero, zero, zero] for _ in range(K + 1)]
    for n in range(1, N + 1):
        hist[n][0] = initial[n - 1]
    hK = hist[K]
    hK[0] = next(reg_values)
    rows = None
    if keep_rows:
        rows = [list(boundary[: (ticks >> K) + 1])]
        rows += [[initial[n - 1]] for n in range(1, N + 1)]
        rows.append([hK[0]])
    recorded = {}
    if record:
        for n, ms in record.items():
            if 0 in ms:
                if n == 0:
                    recorded[(0, 0)] = boundary[0]
                elif n <= N:
                    recorded[(n, 0)] = initial[n - 1]
                elif n == K:
                    recorded[(K, 0)] = hK[0]
    rec = [record.get(n, ()) if record else () for n in range(K + 1)]
    rec_scales = [n for n in range(K + 1) if rec[n]]
    rec_max = max(rec_scales) if rec_scales else -1
    if record:
        for m in range(1, (ticks >> K) + 1):
            if m in rec[0]:
                recorded[(0, m)] = boundary[m]

    for s in range(1, ticks + 1):
        xs = next(reg_values)
        hK[s & 3] = xs
        if keep_rows:
            rows[K].append(xs)
        if s in rec[K]:
            recorded[(K, s)] = xs
        nmin = K - ((s & -s).bit_length() - 1)
        if nmin < 1:
            nmin = 1
        m = s
        for n in range(N, nmin - 1, -1):
            m >>= 1
            h = hist[n]
            v = f(h[(m - 1) & 3], hist[n + 1][(2 * m - 2) & 3])
            if use_g and not m & 1:
                j = (m >> 1) - 1
                lo = boundary[j] if n == 1 else hist[n - 1][j & 3]
                v = add(v, g(lo, h[(m - 2) & 3]))
            h[m & 3] = v
            if keep_rows:
                rows[n].append(v)
            if n <= rec_max and m in rec[n]:
                recorded[(n, m)] = v

    final = [None] + [hist[n][(ticks >> (K - n)) & 3] for n in range(1, K + 1)]
    return SweepResult(rows, recorded, final)


def repeat_value(v) -> Iterator:
    while True:
        yield v


def from_function(fn: Callable[[int], object]) -> Iterator:
    s = 0
    while True:
        yield fn(s)
        s += 1


def chain_values(values: Iterable) -> Iterator:
    yield from values
