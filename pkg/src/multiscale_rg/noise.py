"""Small-scale noise: distributions and a counter-based random stream.

The noise value ``x_m`` at index ``m`` is a pure function of ``(seed, lane, m)``
computed with the Philox counter-based generator, so any index can be read
without generating its predecessors and results never depend on how lanes
are batched.

Two derivations are used:

* fair coins: bit ``j % 64`` of word ``m`` of the Philox stream keyed by
  ``(seed, COIN_TAG | j // 64)``; 64 lanes come out of one word;
* everything else: word ``m`` of the stream keyed by ``(seed, WORD_TAG | j)``
  is a uniform 64-bit integer, mapped through the distribution.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .model import PHASE_MOD, Space, phase

COIN_TAG = 1 << 56
WORD_TAG = 2 << 56
SEED_MASK = (1 << 64) - 1
_BUDGET = 1 << 21  # words generated per refill, summed over streams


@dataclass(frozen=True)
class Bernoulli:
    p: Fraction = Fraction(1, 2)

    def __post_init__(self):
        p = Fraction(self.p)
        if not 0 <= p <= 1:
            raise ValueError(f"Bernoulli probability must lie in [0, 1], got {self.p}")
        object.__setattr__(self, "p", p)

    space = Space.BIT

    @property
    def degenerate(self) -> int | None:
        if self.p == 0:
            return 0
        if self.p == 1:
            return 1
        return None

    def describe(self) -> dict:
        return {"kind": "bernoulli", "p": str(self.p)}


@dataclass(frozen=True)
class UniformCircle:
    space = Space.PHASE
    degenerate = None

    def describe(self) -> dict:
        return {"kind": "uniform"}


@dataclass(frozen=True)
class DiscretePhase:
    """Atoms ``(value, probability)`` on the circle; values are fractions of a turn."""

    atoms: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        atoms = tuple((Fraction(v) % 1, Fraction(p)) for v, p in self.atoms)
        if not atoms:
            raise ValueError("DiscretePhase needs at least one atom")
        if any(p < 0 for _, p in atoms) or sum(p for _, p in atoms) != 1:
            raise ValueError("DiscretePhase probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "atoms", atoms)

    space = Space.PHASE

    @property
    def degenerate(self) -> int | None:
        live = [v for v, p in self.atoms if p]
        return phase(live[0]) if len(set(live)) == 1 else None

    def describe(self) -> dict:
        return {"kind": "discrete", "atoms": [[str(v), str(p)] for v, p in self.atoms]}


NoiseSpec = Bernoulli | UniformCircle | DiscretePhase


def noise_from_dict(d: dict) -> NoiseSpec:
    kind = d.get("kind", "bernoulli")
    if kind == "bernoulli":
        return Bernoulli(Fraction(str(d.get("p", "1/2"))))
    if kind == "uniform":
        return UniformCircle()
    if kind == "discrete":
        return DiscretePhase(tuple((Fraction(str(v)), Fraction(str(p))) for v, p in d["atoms"]))
    raise ValueError(f"unknown noise kind {kind!r}")


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic 64-bit child seed for a labelled sub-computation."""
    ss = np.random.SeedSequence([seed & SEED_MASK, *path])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _words(seed: int, tag_index: int, start: int, count: int) -> np.ndarray:
    """Words ``start .. start+count-1`` of the Philox stream for one key."""
    block, skip = divmod(start, 4)
    key = np.array([seed & SEED_MASK, tag_index], dtype=np.uint64)
    gen = np.random.Philox(counter=block, key=key)
    return gen.random_raw(count + skip)[skip:]


def _thresholds(spec) -> np.ndarray | None:
    if isinstance(spec, Bernoulli):
        return None
    if isinstance(spec, DiscretePhase):
        cum, out = Fraction(0), []
        for _, p in spec.atoms[:-1]:
            cum += p
            out.append(min(int(cum * PHASE_MOD), PHASE_MOD - 1))
        return np.array(out, dtype=np.uint64)
    return None


def _map_words(spec, w: np.ndarray) -> np.ndarray:
    """Uniform 64-bit words -> noise values (bits as uint8, phases as uint64)."""
    if isinstance(spec, UniformCircle):
        return w
    if isinstance(spec, Bernoulli):
        cut = int(spec.p * PHASE_MOD)
        return (w < np.uint64(cut)).astype(np.uint8)
    values = np.array([phase(v) for v, _ in spec.atoms], dtype=np.uint64)
    idx = np.searchsorted(_thresholds(spec), w, side="right")
    return values[idx]


def _is_coin(spec) -> bool:
    return isinstance(spec, Bernoulli) and spec.p == Fraction(1, 2)


class NoiseStream:
    """Random-access view ``m -> x_m`` of one lane."""

    def __init__(self, spec: NoiseSpec, seed: int, lane: int = 0):
        self.spec = spec
        self.seed = seed & SEED_MASK
        self.lane = lane

    def value(self, m: int) -> int:
        return int(self.values(m, 1)[0])

    def __getitem__(self, m: int) -> int:
        return self.value(m)

    def values(self, start: int, count: int) -> np.ndarray:
        spec = self.spec
        if spec.degenerate is not None:
            dt = np.uint8 if spec.space is Space.BIT else np.uint64
            return np.full(count, spec.degenerate, dtype=dt)
        if _is_coin(spec):
            w = _words(self.seed, COIN_TAG | (self.lane >> 6), start, count)
            return ((w >> np.uint64(self.lane & 63)) & np.uint64(1)).astype(np.uint8)
        return _map_words(spec, _words(self.seed, WORD_TAG | self.lane, start, count))


def _chunks(streams: int) -> Iterator[int]:
    # refills start small and double, so short sweeps stay cheap
    cap = max(64, _BUDGET // streams) & ~3
    size = min(256, cap)
    while True:
        yield size
        size = min(2 * size, cap)


def lane_values(spec: NoiseSpec, seed: int, lo: int, hi: int, lanes, odd: bool = True) -> Iterator:
    """Yield lane vectors ``x_0, x_1, ...`` for lanes ``lo..hi-1``.

    Bit lanes come out as packed ints, phase lanes as uint64 arrays.  With
    ``odd=False`` odd indices yield zero instead of a draw; the lattice
    dynamics only ever read even indices of the regularized scale.
    """
    seed &= SEED_MASK
    width = hi - lo
    deg = spec.degenerate
    if deg is not None:
        v = lanes.const(deg) if spec.space is Space.BIT else np.full(width, deg, dtype=np.uint64)
        while True:
            yield v
    zero = lanes.zero
    start = 0
    if spec.space is Space.BIT and _is_coin(spec):
        w0, w1 = lo >> 6, (hi - 1 >> 6) + 1
        shift, mask = lo & 63, (1 << width) - 1
        sizes = _chunks(w1 - w0)
        while True:
            chunk = next(sizes)
            block = np.stack([_words(seed, COIN_TAG | w, start, chunk) for w in range(w0, w1)], axis=1)
            raw = np.ascontiguousarray(block).view(np.uint8)
            for s in range(chunk):
                if not odd and (start + s) & 1:
                    yield zero
                    continue
                v = int.from_bytes(raw[s].tobytes(), "little")
                yield (v >> shift) & mask
            start += chunk
    sizes = _chunks(width)
    while True:
        chunk = next(sizes)
        block = np.stack([_words(seed, WORD_TAG | j, start, chunk) for j in range(lo, hi)], axis=1)
        vals = _map_words(spec, block)
        if spec.space is Space.BIT:
            packed = np.packbits(vals, axis=1, bitorder="little")
            for s in range(chunk):
                if not odd and (start + s) & 1:
                    yield zero
                    continue
                yield int.from_bytes(packed[s].tobytes(), "little")
        else:
            for s in range(chunk):
                if not odd and (start + s) & 1:
                    yield zero
                    continue
                yield vals[s]
        start += chunk
