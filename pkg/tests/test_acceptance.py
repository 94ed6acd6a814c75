"""Acceptance criteria 1-12, each at its stated tolerance and time budget.

Every test records a pass/fail line that is printed in the terminal summary.
"""
import functools
import random
import time
from fractions import Fraction

import pytest

import conftest
from multiscale_rg.dyadic import DyadicTime, LatticePoint, tau
from multiscale_rg.lattice import cantor_grid, residual_check
from multiscale_rg.model import MODEL_A, MODEL_B, PHASE_MODEL, ProblemSpec, State, phase
from multiscale_rg.noise import Bernoulli, UniformCircle
from multiscale_rg.rg import (convergence_metric, fixed_point_A, jump_at_third, random_table_map,
                              rg_apply, rg_iterate)
from multiscale_rg.solver import (BLOWUP, ConstAt, Cutoff, eval_fractional, first_disagreement,
                                  flow_psi, nonuniqueness_witness, solve_regularized, solve_strong,
                                  state_start)
from multiscale_rg.stochastic import (compare_samples, estimate_expectations, fit_convergence,
                                      limit_kernel_check, phase_coefficients, sampler_psi,
                                      stochastic_rg_apply, stochastic_rg_iterate)
from multiscale_rg.verify import check_staircase

COIN = Bernoulli()


def criterion(k: int, title: str, budget: float):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            ok = False
            try:
                fn(*args, **kwargs)
                secs = time.perf_counter() - t0
                assert secs < budget, f"took {secs:.1f}s, budget {budget}s"
                ok = True
            finally:
                conftest.CRITERIA[k] = (title, ok, time.perf_counter() - t0)
        return run
    return wrap


@criterion(1, "blowup times T = 1 (model A) and T = 1/2 (model B)", 1.0)
def test_c01_blowup_times():
    a = solve_strong(ProblemSpec(MODEL_A, State.of(1), (1, 0)), DyadicTime(2))
    b = solve_strong(ProblemSpec(MODEL_B, State.of(0, 1), (1,)), DyadicTime(2))
    assert a.outcome == BLOWUP and a.T == DyadicTime(1)
    assert b.outcome == BLOWUP and b.T == DyadicTime(1, 1)


@criterion(2, "closed-form staircase matches brute force on 200 model-B problems", 10.0)
def test_c02_staircase():
    r = check_staircase(200, random.Random(2), max_n0=6)
    assert r.passed, r.counterexample
    assert r.checked == 200


@criterion(3, "RG recursion equals finer simulation, exhaustive, N = 1..8", 60.0)
def test_c03_rg_recursion():
    checked = 0
    for model in (MODEL_A, MODEL_B):
        for reg in (Cutoff(), ConstAt(1)):
            for N in range(1, 9):
                lifted = rg_apply(flow_psi(model, N, reg), model)
                direct = flow_psi(model, N + 1, reg)
                for a in cantor_grid(N + 1):
                    assert lifted(a) == direct(a), (model.name, reg, N, a)
                    checked += 1
    assert checked == 4 * sum(2 ** (N + 1) for N in range(1, 9))


@criterion(4, "model-A iterates match the fixed point in k-2 components, k = 4..10", 60.0)
def test_c04_attractor():
    rng = random.Random(4)
    starts = [flow_psi(MODEL_A, 1, Cutoff())]
    starts += [random_table_map(rng, rng.randint(1, 3), rng.randint(1, 3)) for _ in range(50)]
    for psi1 in starts:
        for k in range(4, 11):
            psi = rg_iterate(psi1, MODEL_A, k)
            for a in cantor_grid(k):
                assert psi(a).prefix(k - 2) == fixed_point_A(a).prefix(k - 2)


@criterion(5, "model-B limit depends on regularization; jump at x = 1/3", 60.0)
def test_c05_regularization_sensitivity():
    cut10 = rg_iterate(flow_psi(MODEL_B, 1, Cutoff()), MODEL_B, 9)
    const10 = rg_iterate(flow_psi(MODEL_B, 1, ConstAt(1)), MODEL_B, 9)
    assert any(cut10(a) != const10(a) for a in cantor_grid(8))
    const15 = rg_iterate(const10, MODEL_B, 5)
    cut15 = rg_iterate(cut10, MODEL_B, 5)
    gap_in, gap_out = jump_at_third(const15)
    # input points 3^-14 apart, outputs stay at least 1/9 apart
    assert gap_in == Fraction(1, 3**14)
    assert gap_out >= Fraction(1, 9)
    assert jump_at_third(cut15)[1] == 0
    # under the cutoff the iterates settle instead
    dist, _ = convergence_metric(cut10, cut15, 8)
    assert dist < Fraction(1, 3**5)


@criterion(6, "composed stochastic kernels match direct simulation, N = 1..5", 300.0)
def test_c06_stochastic_rg():
    rng = random.Random(6)
    reports = []
    for model in (MODEL_A, MODEL_B):
        for N in range(1, 6):
            composed = stochastic_rg_apply(sampler_psi(model, N, COIN), model)
            direct = sampler_psi(model, N + 1, COIN)
            grid = list(cantor_grid(N + 1))
            inputs = grid if len(grid) <= 8 else rng.sample(grid, 8)
            for i, a in enumerate(inputs):
                seed = 1000 * N + i + (0 if model is MODEL_A else 500000)
                x = composed.sample(a, 10**4, 2 * seed)
                y = direct.sample(a, 10**4, 2 * seed + 1)
                reports.append(compare_samples(x, y, N + 2))
    pvalues = [p for r in reports for p in r.pvalues]
    cut = 0.01 / len(pvalues)
    assert min(pvalues) >= cut, (min(pvalues), cut)


@criterion(7, "model-A stochastic iterate 8 collapses onto the fixed point", 60.0)
def test_c07_stochastic_collapse():
    psi = stochastic_rg_iterate(sampler_psi(MODEL_A, 1, COIN), MODEL_A, 7)
    assert psi.depth == 8
    grid = list(cantor_grid(8))
    want = [fixed_point_A(a).prefix(6) for a in grid]
    for rep in range(100):
        for y, w in zip(psi.draw_many(grid, 70 + rep), want):
            assert y.prefix(6) == w


# Five post-blowup variables, chosen on a pilot run with a different seed as
# the scale-5 points with the largest drift between N = 6 and N = 20.
TRACKED = [LatticePoint.make(5, DyadicTime.from_fraction(t))
           for t in ("29/32", "33/32", "37/32", "39/32", "45/32")]


@pytest.mark.slow
@criterion(8, "model-B spontaneous stochasticity: deterministic before T, -0.32 <= k <= -0.12", 600.0)
def test_c08_spontaneous_stochasticity():
    problem = ProblemSpec(MODEL_B, State.of(0, 1), (1, 0))
    half = DyadicTime(1, 1)
    N_top, seed, samples = 20, 31, 10**4
    # deterministic region: t <= 1/2 on scales n <= N - 1
    det = [LatticePoint(n, DyadicTime(m, n)) for n in range(1, 15) for m in range(half.ticks(n) + 1)]
    det += [LatticePoint(n, DyadicTime(m, 10)) for n in range(15, N_top) for m in range(half.ticks(10) + 1)]
    est = estimate_expectations(problem, COIN, [N_top], det + TRACKED, samples, seed)
    reference = solve_regularized(problem, N_top, Cutoff(), half)
    for e in est[:len(det)]:
        assert e.mean in (0.0, 1.0), e
        assert e.mean == reference[e.point.scale, e.point.time]
    post = [e.mean for e in est[len(det):]]
    assert any(0.1 <= m <= 0.9 for m in post), post
    series = estimate_expectations(problem, COIN, range(6, N_top + 1), TRACKED, samples, seed + 1)
    for p in TRACKED:
        fit = fit_convergence([(e.N, e.mean) for e in series if e.point == p])
        assert -0.32 <= fit.exponent <= -0.12, (p, fit)


@criterion(9, "circle model: component 1 is a Dirac mass, 2..5 uniform (KS < 0.05)", 120.0)
def test_c09_circle_limit_kernel():
    a = State(tuple(phase(Fraction(k, 64)) for k in (11, 50, 7, 33, 60, 2)))
    rep = limit_kernel_check(a, 12, tau(1), 10**4, UniformCircle(), seed=9, components=5)
    assert rep[0].dirac and rep[0].value == PHASE_MODEL.f(a[1], a[2])
    assert rep[0].value == phase(Fraction(2 * (11 + 50), 64))
    for r in rep[1:5]:
        assert not r.dirac and r.ks < 0.05, r


@pytest.mark.xfail(strict=True, reason="p_N / p_(N-1) = 1 / (1 - 2^(1 - M/2)) with M = 2^(N-1), "
                   "so the ratio at n = N-1 is below 2 for every N; the growth is asymptotic in N")
@criterion(10, "noise coefficients: p_2 grows past 1e6 by N = 40, ratios > 2 at N = 12", 30.0)
def test_c10_coefficient_growth():
    p2 = [phase_coefficients(N, rows=[2]).p[2] for N in range(2, 41)]
    assert all(x <= y for x, y in zip(p2, p2[1:]))
    assert p2[-1] > 10**6
    p = phase_coefficients(12).p
    # p_1 = 0 for every N >= 2, so ratios start at n = 2
    assert p[1] == 0
    assert all(p[n + 1] > 2 * p[n] for n in range(2, 12))


def test_c10_parts_that_hold():
    """Everything in criterion 10 except the ratio at n = N - 1, plus its exact value."""
    p2 = [phase_coefficients(N, rows=[2]).p[2] for N in range(2, 41)]
    assert all(x < y for x, y in zip(p2, p2[1:])) and p2[-1] > 10**6
    for N in (6, 9, 12):
        p = phase_coefficients(N).p
        assert all(p[n + 1] > 2 * p[n] for n in range(2, N - 1))
        # scale N sees x_0 once per step; scale N-1 only through scale N
        M = 1 << (N - 1)
        assert p[N] == 2**M
        assert p[N - 1] == 2 ** (M // 2 + 1) * (2 ** (M // 2 - 1) - 1)


@criterion(11, "flow-map composition equals direct simulation at every t <= 3, N <= 6", 60.0)
def test_c11_fractional_times():
    rng = random.Random(11)
    for model in (MODEL_A, MODEL_B):
        for _ in range(50):
            problem = ProblemSpec(model, State(tuple(rng.getrandbits(1) for _ in range(7))),
                                  tuple(rng.getrandbits(1) for _ in range(3)))
            for N in range(1, 7):
                sol = solve_regularized(problem, N, Cutoff(), DyadicTime(3))
                for m in range((3 << N) + 1):
                    t = DyadicTime(m, N)
                    depth = N + 1 - state_start(t)
                    assert eval_fractional(problem, N, Cutoff(), t).prefix(depth) == sol.state_at(t).prefix(depth)


@criterion(12, "weak-solution witnesses split after T with the predicted 0/1 values, N = 6..12", 30.0)
def test_c12_nonuniqueness():
    problem = ProblemSpec(MODEL_B, State.of(0, 1), (1, 0))
    T = solve_strong(problem, DyadicTime(2)).T
    for N in range(6, 13):
        s1, s2 = nonuniqueness_witness(problem, N)
        for s in (s1, s2):
            assert residual_check(MODEL_B, s.to_field(N), problem, N) == []
        first = first_disagreement(s1, s2, N)
        assert first is not None and first.time > T
        assert s1.to_field(N, T) == s2.to_field(N, T)
        for n in range(problem.n_max0 + 2, N):
            t = T + DyadicTime(2, n)
            assert (s1[n, t], s2[n, t]) == (0, 1)
