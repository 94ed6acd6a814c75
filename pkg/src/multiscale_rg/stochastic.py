"""Stochastic regularization, kernel samplers and Monte Carlo statistics.

Kernels are never stored as measures.  A :class:`KernelSampler` draws
states from ``Psi(.|a)``; composing kernels means feeding one sampler's
draws into another with independent randomness.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats

from . import engine
from .dyadic import DyadicTime, LatticePoint, tau, time_decompose
from .model import (PHASE_MOD, PHASE_MODEL, ModelSpec, ProblemSpec, Space,
                    State, phase_value)
from .noise import (NoiseSpec, NoiseStream, UniformCircle,
                    derive_seed, lane_values)
from .solver import FlowMap, Solution

LANE_ALIGN = 64


@dataclass(frozen=True)
class StochasticReg:
    """Scale N+1 carries the noise ``x_{t / tau(N+1)}``; deeper scales are zero."""

    spec: NoiseSpec
    seed: int
    lane: int = 0

    def describe(self) -> dict:
        return {"kind": "stochastic", "noise": self.spec.describe(), "seed": self.seed, "lane": self.lane}


def _check_noise(model: ModelSpec, spec: NoiseSpec) -> None:
    if spec.space is not model.space:
        raise ValueError(f"noise {spec!r} does not live in the {model.space.value} space")


def sample_solution(problem: ProblemSpec, N: int, noise: NoiseStream, horizon) -> Solution:
    """Stochastically regularized solution driven by one lane of a noise stream."""
    if N < 1:
        raise ValueError(f"regularization level must be >= 1, got {N}")
    if not isinstance(horizon, DyadicTime):
        horizon = DyadicTime.from_fraction(horizon)
    if horizon.level > N + 1:
        raise ValueError(f"horizon {horizon} is not on the grid of scale {N + 1}")
    model = problem.model
    _check_noise(model, noise.spec)
    lanes = engine.lanes_for(model, 1)
    initial = [lanes.const(problem.initial[n]) for n in range(1, N + 1)]
    boundary = [lanes.const(problem.b(t)) for t in range(horizon.floor() + 1)]
    reg = lane_values(noise.spec, noise.seed, noise.lane, noise.lane + 1, lanes)
    res = engine.sweep(lanes, N, horizon.ticks(N + 1), initial, boundary, reg, keep_rows=True)
    rows = res.rows
    if model.space is Space.PHASE:
        rows = [[int(v[0]) for v in row] for row in rows]
    return Solution(problem, N, StochasticReg(noise.spec, noise.seed, noise.lane), horizon, rows)


# --- kernel samplers ---------------------------------------------------------
#
# Samplers move batches as uint64 matrices: row j is lane j, column k-1 is
# component k, and components past the last column are zero.

BatchFn = Callable[[np.ndarray, int, int], np.ndarray]


def _seed_of(rng) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 1 << 63))
    return int(rng) & ((1 << 64) - 1)


def to_matrix(states: Sequence[State], depth: int) -> np.ndarray:
    return np.array([a.prefix(depth) for a in states], dtype=np.uint64).reshape(len(states), depth)


def from_matrix(m: np.ndarray) -> list[State]:
    return [State(tuple(row)) for row in m.tolist()]


def _columns(m: np.ndarray, d: int) -> np.ndarray:
    if m.shape[1] >= d:
        return m[:, :d]
    return np.concatenate([m, np.zeros((m.shape[0], d - m.shape[1]), dtype=np.uint64)], axis=1)


def _vector_coupling(model: ModelSpec, table: tuple[int, ...], x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if model.space is Space.BIT:
        return np.array(table, dtype=np.uint64)[(x << np.uint64(1)) | y]
    alpha, beta = (np.uint64(c & ((1 << 64) - 1)) for c in table)
    return x * alpha + y * beta


def _vector_add(space: Space, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x ^ y if space is Space.BIT else x + y


class KernelSampler:
    """Seeded realization of a probability kernel on states.

    ``draw_many(inputs, seed, lane_offset)`` returns one independent draw per
    input.  Lane ``j`` of a call uses randomness indexed by ``lane_offset + j``,
    so splitting a batch never changes any draw.
    """

    def __init__(self, model: ModelSpec, depth: int, provenance, batch_fn: BatchFn):
        self.model = model
        self.depth = depth
        self.provenance = provenance
        self._batch = batch_fn

    @property
    def space(self) -> Space:
        return self.model.space

    def draw_matrix(self, inputs: np.ndarray, seed, lane_offset: int = 0) -> np.ndarray:
        return self._batch(inputs, _seed_of(seed), lane_offset)

    def draw_many(self, inputs: Sequence[State], seed, lane_offset: int = 0) -> list[State]:
        if not inputs:
            return []
        return from_matrix(self.draw_matrix(to_matrix(inputs, self.depth), seed, lane_offset))

    def draw(self, a: State, rng) -> State:
        return self.draw_many([a], rng)[0]

    def sample(self, a: State, count: int, seed) -> "EmpiricalKernel":
        m = np.tile(to_matrix([a], self.depth), (count, 1))
        return EmpiricalKernel(a, self.draw_matrix(m, seed), self.space)

    def __repr__(self) -> str:
        return f"KernelSampler(depth={self.depth}, provenance={self.provenance!r})"


def sampler_at(model: ModelSpec, N: int, spec: NoiseSpec, t=tau(1), boundary: Sequence[int] = ()) -> KernelSampler:
    """Kernel ``a -> law of (u_{n_c}(t), u_{n_c+1}(t), ...)`` under stochastic regularization."""
    if N < 1:
        raise ValueError(f"regularization level must be >= 1, got {N}")
    _check_noise(model, spec)
    if not isinstance(t, DyadicTime):
        t = DyadicTime.from_fraction(t)
    _, scales = time_decompose(t)
    start = scales[-1] if scales else 1
    K = N + 1
    if start > K or t.level > K:
        raise ValueError(f"time {t} is finer than scale {K}")
    ticks = t.ticks(K)
    bvals = [boundary[i] if i < len(boundary) else 0 for i in range(t.floor() + 1)]

    def batch(inputs, seed, lo):
        width = inputs.shape[0]
        cols = _columns(inputs, N)
        lanes = engine.lanes_for(model, width)
        initial = [lanes.pack(cols[:, n]) for n in range(N)]
        bound = [lanes.const(b) for b in bvals]
        reg = lane_values(spec, seed, lo, lo + width, lanes)
        res = engine.sweep(lanes, N, ticks, initial, bound, reg)
        return np.stack([lanes.unpack(v) for v in res.final[start:]], axis=1).astype(np.uint64)

    return KernelSampler(model, N, ("sample", model.name, N, spec, t), batch)


def sampler_psi(model: ModelSpec, N: int, spec: NoiseSpec) -> KernelSampler:
    """Half-time kernel ``Psi^(N)``."""
    return sampler_at(model, N, spec, tau(1))


def sampler_from_map(psi: FlowMap, model: ModelSpec) -> KernelSampler:
    """Dirac kernel of a deterministic map."""
    def batch(inputs, seed, lo):
        outs = [psi(State(tuple(row))) for row in _columns(inputs, psi.depth).tolist()]
        return to_matrix(outs, max([o.depth for o in outs] + [1]))

    return KernelSampler(model, psi.depth, ("dirac", psi.provenance), batch)


def precompose_shift(sampler: KernelSampler, k: int) -> KernelSampler:
    """``a -> S(sigma_+^k a)``."""
    def batch(inputs, seed, lo):
        return sampler.draw_matrix(_columns(inputs, sampler.depth + k)[:, k:], seed, lo)

    return KernelSampler(sampler.model, sampler.depth + k, ("shift", k, sampler.provenance), batch)


def stochastic_rg_apply(sampler: KernelSampler, model: ModelSpec) -> KernelSampler:
    """``(Sigma_- o S o S o Sigma_+) * Xi`` with independent inner draws.

    The two applications of ``S`` receive distinct derived seeds; reusing one
    stream for both would correlate the halves and break kernel composition.
    """
    space = model.space

    def batch(inputs, seed, lo):
        a = _columns(inputs, max(sampler.depth + 1, 2))
        first = sampler.draw_matrix(a[:, 1:], derive_seed(seed, 1), lo)
        second = sampler.draw_matrix(first, derive_seed(seed, 2), lo)
        out = np.zeros((a.shape[0], max(second.shape[1] + 1, 2)), dtype=np.uint64)
        out[:, 1:second.shape[1] + 1] = second
        out[:, 0] = _vector_add(space, out[:, 0], _vector_coupling(model, model.f_table, a[:, 0], a[:, 1]))
        out[:, 1] = _vector_add(space, out[:, 1], _vector_coupling(model, model.g_table, a[:, 0], a[:, 1]))
        return out

    return KernelSampler(model, sampler.depth + 1, ("rg", model.name, sampler.provenance), batch)


def stochastic_rg_iterate(sampler: KernelSampler, model: ModelSpec, k: int) -> KernelSampler:
    for _ in range(k):
        sampler = stochastic_rg_apply(sampler, model)
    return sampler


class EmpiricalKernel:
    """Bag of draws from ``Psi(.|a)`` for one input ``a``, one row per draw."""

    def __init__(self, a: State, data, space: Space = Space.BIT):
        if not isinstance(data, np.ndarray):
            data = to_matrix(list(data), max([s.depth for s in data] + [1]))
        if data.shape[0] < 1:
            raise ValueError("an empirical kernel needs at least one sample")
        self.a = a
        self.data = data
        self.space = space

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def samples(self) -> list[State]:
        return from_matrix(self.data)

    def component(self, k: int) -> np.ndarray:
        if k > self.data.shape[1]:
            return np.zeros(self.count, dtype=np.uint64)
        return self.data[:, k - 1]

    def values(self, k: int) -> np.ndarray:
        """Component ``k`` as floats in [0, 1)."""
        c = self.component(k)
        return c.astype(float) if self.space is Space.BIT else c.astype(float) / PHASE_MOD

    def mean(self, k: int) -> float:
        return float(self.values(k).mean())

    def variance(self, k: int) -> float:
        return float(self.values(k).var())

    def is_constant(self, k: int) -> bool:
        c = self.component(k)
        return bool((c == c[0]).all())

    def histogram(self, k: int, bins: int = 16) -> np.ndarray:
        return np.histogram(self.values(k), bins=bins, range=(0.0, 1.0))[0]

    def ks_uniform(self, k: int) -> float:
        return float(stats.kstest(self.values(k), "uniform").statistic)


# --- two-sample tests ----------------------------------------------------------

@dataclass
class TwoSampleReport:
    pvalues: list[float]
    statistics: list[float]
    alpha: float
    counts: tuple[int, int]

    @property
    def threshold(self) -> float:
        return self.alpha / len(self.pvalues)

    @property
    def rejected(self) -> list[bool]:
        return [p < self.threshold for p in self.pvalues]

    @property
    def any_rejected(self) -> bool:
        return any(self.rejected)

    @property
    def max_discrepancy(self) -> float:
        return max(self.statistics)


def compare_samples(x: EmpiricalKernel, y: EmpiricalKernel, components: int, alpha: float = 0.01) -> TwoSampleReport:
    """Per-component two-sample tests (Fisher exact for bits, KS for phases)."""
    pv, st = [], []
    for k in range(1, components + 1):
        if x.space is Space.BIT:
            c1, c2 = int(x.component(k).sum()), int(y.component(k).sum())
            table = [[c1, x.count - c1], [c2, y.count - c2]]
            p = 1.0 if c1 + c2 in (0, x.count + y.count) else float(stats.fisher_exact(table).pvalue)
            pv.append(p)
            st.append(abs(c1 / x.count - c2 / y.count))
        else:
            r = stats.ks_2samp(x.values(k), y.values(k))
            pv.append(float(r.pvalue))
            st.append(float(r.statistic))
    return TwoSampleReport(pv, st, alpha, (x.count, y.count))


def two_sample_kernel_test(s1: KernelSampler, s2: KernelSampler, a: State, samples: int,
                           components: int, seed: int = 0, alpha: float = 0.01) -> TwoSampleReport:
    """Compare ``s1(.|a)`` and ``s2(.|a)`` on the first ``components`` marginals (Bonferroni)."""
    if s1.space is not s2.space:
        raise ValueError("samplers act on different spaces")
    x = s1.sample(a, samples, derive_seed(seed, 1))
    y = s2.sample(a, samples, derive_seed(seed, 2))
    return compare_samples(x, y, components, alpha)


# --- expectations --------------------------------------------------------------

@dataclass(frozen=True)
class Expectation:
    N: int
    point: LatticePoint
    mean: float
    ci: float
    samples: int


def _batch_sums(args):
    problem, N, spec, seed, lo, hi, horizon, record = args
    model = problem.model
    width = hi - lo
    lanes = engine.lanes_for(model, width)
    initial = [lanes.const(problem.initial[n]) for n in range(1, N + 1)]
    boundary = [lanes.const(problem.b(t)) for t in range(horizon.floor() + 1)]
    reg = lane_values(spec, seed, lo, hi, lanes, odd=False)
    res = engine.sweep(lanes, N, horizon.ticks(N + 1), initial, boundary, reg, record=record)
    out = {}
    for key, v in res.recorded.items():
        if model.space is Space.BIT:
            c = v.bit_count()
            out[key] = (float(c), float(c))
        else:
            x = v.astype(float) / PHASE_MOD
            out[key] = (float(x.sum()), float((x * x).sum()))
    return out


def estimate_expectations(problem: ProblemSpec, noise_spec: NoiseSpec, N_list: Sequence[int],
                          points: Sequence[LatticePoint], samples: int, seed: int,
                          batch: int = 4096, workers: int | None = None) -> list[Expectation]:
    """Means of ``u_n^(N)(t)`` over independent noise realizations, with 95% normal CIs.

    Realization ``j`` at level ``N`` always uses lane ``j`` of the stream
    seeded by ``derive_seed(seed, N)``, so results do not depend on
    ``batch`` or ``workers``.
    """
    if samples < 2:
        raise ValueError("at least two samples are needed for a confidence interval")
    _check_noise(problem.model, noise_spec)
    batch = max(LANE_ALIGN, batch - batch % LANE_ALIGN)
    points = [p if isinstance(p, LatticePoint) else LatticePoint.make(*p) for p in points]
    tasks, layout = [], []
    for N in N_list:
        record: dict[int, set[int]] = {}
        horizon = DyadicTime(0)
        for p in points:
            if p.scale < 1 or p.scale > N or p.time.level > p.scale:
                raise ValueError(f"point {p} is not a lattice point of scales 1..{N}")
            record.setdefault(p.scale, set()).add(p.index)
            horizon = max(horizon, p.time)
        sN = derive_seed(seed, N)
        for lo in range(0, samples, batch):
            tasks.append((problem, N, noise_spec, sN, lo, min(lo + batch, samples), horizon, record))
        layout.append(N)
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_batch_sums, tasks))
    else:
        parts = [_batch_sums(t) for t in tasks]
    totals: dict[tuple[int, int, int], list[float]] = {}
    for task, part in zip(tasks, parts):
        N = task[1]
        for (n, m), (s1, s2) in part.items():
            acc = totals.setdefault((N, n, m), [0.0, 0.0])
            acc[0] += s1
            acc[1] += s2
    out = []
    for N in layout:
        for p in points:
            s1, s2 = totals[(N, p.scale, p.index)]
            mean = s1 / samples
            var = max(s2 / samples - mean * mean, 0.0) * samples / (samples - 1)
            out.append(Expectation(N, p, mean, 1.96 * math.sqrt(var / samples), samples))
    return out


# --- convergence fits ----------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceFit:
    limit: float
    exponent: float
    residual: float
    points: int


def _loglin(ns: np.ndarray, ms: np.ndarray, L: float):
    y = np.log(np.abs(ms - L))
    A = np.vstack([ns, np.ones_like(ns)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = float(((y - y.mean()) ** 2).sum())
    badness = float((resid ** 2).sum()) / ss if ss > 0 else 0.0
    return badness, float(coef[0]), float(np.sqrt((resid ** 2).mean()))


def fit_convergence(series: Sequence[tuple[int, float]], tail: int | None = None) -> ConvergenceFit:
    """Fit ``mean(N) ~ limit + C exp(exponent * N)``.

    For a trial limit ``L`` the points ``(N, log|mean - L|)`` get a
    least-squares line; ``L`` is chosen to maximize that line's R^2, with a
    log-spaced scan on either side of the data followed by bounded Brent
    refinement.  Only the last ``tail`` points are used when given.
    """
    data = sorted(series)
    if tail is not None:
        data = data[-tail:]
    if len(data) < 4:
        raise ValueError("a convergence fit needs at least 4 points")
    ns = np.array([n for n, _ in data], dtype=float)
    ms = np.array([m for _, m in data], dtype=float)
    span = float(ms.max() - ms.min())
    if span == 0:
        return ConvergenceFit(float(ms[0]), float("-inf"), 0.0, len(data))
    best = None
    for side in (-1.0, 1.0):
        edge = ms.min() if side < 0 else ms.max()
        offsets = np.logspace(np.log10(span * 1e-4), np.log10(span * 1e3), 141)
        scores = [_loglin(ns, ms, edge + side * d)[0] for d in offsets]
        i = int(np.argmin(scores))
        lo = offsets[max(i - 1, 0)]
        hi = offsets[min(i + 1, len(offsets) - 1)]
        r = optimize.minimize_scalar(lambda d: _loglin(ns, ms, edge + side * d)[0],
                                     bounds=(lo, hi), method="bounded")
        d = float(r.x) if r.fun <= scores[i] else float(offsets[i])
        score, slope, rms = _loglin(ns, ms, edge + side * d)
        if best is None or score < best[0]:
            best = (score, edge + side * d, slope, rms)
    _, L, slope, rms = best
    return ConvergenceFit(L, slope, rms, len(data))


# --- circle model analytics ----------------------------------------------------

@dataclass
class PhaseCoefficients:
    """Exact expansion ``u_n^(N)(1/2) = sum c_v v  (mod 1)`` over initial values and noise.

    ``rows[n]`` maps ``("a", k)`` and ``("x", m)`` to integer coefficients;
    ``p[n]`` is the coefficient of ``x_0``.
    """

    N: int
    rows: dict[int, dict[tuple[str, int], int]] = field(default_factory=dict)

    @property
    def p(self) -> dict[int, int]:
        return {n: row.get(("x", 0), 0) for n, row in self.rows.items()}

    def evaluate(self, n: int, a: State, x: Callable[[int], int]) -> int:
        """Fixed-point value of row ``n`` for initial state ``a`` and noise ``x``."""
        total = 0
        for (kind, k), c in self.rows[n].items():
            total += c * (a[k] if kind == "a" else x(k))
        return total % PHASE_MOD


def _phase_row(N: int, n: int, f: tuple[int, int]) -> dict[tuple[str, int], int]:
    # adjoint sweep over the dependency cone of u_n(1/2): weights flow from
    # the root to the leaves, each edge multiplying by its coupling coefficient
    K = N + 1
    alpha, beta = f
    root = (n, 1 << (n - 1))
    nodes, stack = {root}, [root]
    while stack:
        k, m = stack.pop()
        if m == 0 or k == K:
            continue
        for child in ((k, m - 1), (k + 1, 2 * m - 2)):
            if child not in nodes:
                nodes.add(child)
                stack.append(child)
    order = sorted(nodes, key=lambda p: p[1] << (K - p[0]), reverse=True)
    w = {root: 1}
    row: dict[tuple[str, int], int] = {}
    for k, m in order:
        c = w.pop((k, m), 0)
        if not c:
            continue
        if k == K:
            row[("x", m)] = row.get(("x", m), 0) + c
        elif m == 0:
            row[("a", k)] = row.get(("a", k), 0) + c
        else:
            for child, coef in (((k, m - 1), alpha), ((k + 1, 2 * m - 2), beta)):
                if coef:
                    w[child] = w.get(child, 0) + coef * c
    return {key: c for key, c in row.items() if c}


def phase_coefficients(N: int, rows: Sequence[int] | None = None, model: ModelSpec = PHASE_MODEL) -> PhaseCoefficients:
    """Exact integer coefficients of ``u_n^(N)(1/2)`` for the linear circle model."""
    if not 1 <= N <= 64:
        raise ValueError(f"N must lie in 1..64, got {N}")
    if model.space is not Space.PHASE or any(model.g_table):
        raise ValueError("coefficient expansion needs a phase model with g = 0")
    rows = range(1, N + 1) if rows is None else rows
    out = PhaseCoefficients(N)
    for n in rows:
        if not 1 <= n <= N:
            raise ValueError(f"row {n} outside 1..{N}")
        out.rows[n] = _phase_row(N, n, model.f_table)
    return out


@dataclass(frozen=True)
class ComponentReport:
    component: int
    scale: int
    dirac: bool
    value: int | None
    ks: float | None
    expected_dirac: bool
    expected_value: int | None

    def to_dict(self) -> dict:
        return {
            "component": self.component, "scale": self.scale, "dirac": self.dirac,
            "value": None if self.value is None else str(phase_value(self.value)),
            "ks": self.ks, "expected_dirac": self.expected_dirac,
            "expected_value": None if self.expected_value is None else str(phase_value(self.expected_value)),
        }


def limit_kernel_check(a: State, N: int, t, samples: int, noise: NoiseSpec = UniformCircle(),
                       seed: int = 0, components: int | None = None,
                       model: ModelSpec = PHASE_MODEL) -> list[ComponentReport]:
    """Dirac-or-uniform classification of each component of ``u^(N)(t)`` for the circle model."""
    if model.space is not Space.PHASE:
        raise ValueError("limit kernel check is defined for the circle model")
    if not isinstance(t, DyadicTime):
        t = DyadicTime.from_fraction(t)
    sampler = sampler_at(model, N, noise, t)
    emp = sampler.sample(a, samples, seed)
    _, scales = time_decompose(t)
    start = scales[-1] if scales else 1
    total = N + 2 - start
    components = total if components is None else min(components, total)
    out = []
    for k in range(1, components + 1):
        n = start + k - 1
        expected = k == 1 and t == tau(n) and n + 1 <= N
        exp_val = model.f(a[n], a[n + 1]) if expected else None
        if emp.is_constant(k):
            out.append(ComponentReport(k, n, True, int(emp.component(k)[0]), None, expected, exp_val))
        else:
            out.append(ComponentReport(k, n, False, None, emp.ks_uniform(k), expected, exp_val))
    return out


def noise_realization_map(model: ModelSpec, N: int, spec: NoiseSpec, seed: int, lane: int = 0) -> FlowMap:
    """``a -> u^(N)(1/2)`` for one fixed noise realization shared by every input."""
    _check_noise(model, spec)
    K = N + 1
    ticks = 1 << N
    single = engine.lanes_for(model, 1)

    def evaluate_many(keys: list[tuple[int, ...]]) -> list[State]:
        width = len(keys)
        lanes = engine.lanes_for(model, width)
        cols = np.array(keys, dtype=np.uint64).reshape(width, N)
        initial = [lanes.pack(cols[:, n]) for n in range(N)]
        src = lane_values(spec, seed, lane, lane + 1, single)
        if model.space is Space.BIT:
            reg = (lanes.const(v & 1) for v in src)
        else:
            reg = (np.full(width, v[0], dtype=np.uint64) for v in src)
        res = engine.sweep(lanes, N, ticks, initial, [lanes.zero], reg)
        mat = np.stack([lanes.unpack(v) for v in res.final[1:K + 1]], axis=1).astype(np.uint64)
        return from_matrix(mat)

    fm = FlowMap(lambda key: evaluate_many([key])[0], N, ("realization", model.name, N, spec, seed, lane), model.space)
    fm.evaluate_many = evaluate_many
    return fm
