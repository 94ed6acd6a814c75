import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import bit_rules, oracle_field
from multiscale_rg.dyadic import DyadicTime, LatticePoint, tau
from multiscale_rg.lattice import cantor_grid
from multiscale_rg.model import MODEL_A, MODEL_B, PHASE_MODEL, ProblemSpec, State, phase
from multiscale_rg.noise import Bernoulli, DiscretePhase, NoiseStream, UniformCircle, derive_seed
from multiscale_rg.rg import fixed_point_A
from multiscale_rg.solver import ConstAt, Cutoff, flow_psi
from multiscale_rg.stochastic import (EmpiricalKernel, compare_samples, estimate_expectations,
                                      fit_convergence, limit_kernel_check, noise_realization_map,
                                      phase_coefficients, sample_solution, sampler_at,
                                      sampler_from_map, sampler_psi, stochastic_rg_apply,
                                      stochastic_rg_iterate, to_matrix, two_sample_kernel_test)

COIN = Bernoulli()


def test_sampled_solution_matches_oracle():
    problem = ProblemSpec(MODEL_B, State.of(0, 1), (1, 0))
    noise = NoiseStream(COIN, 17, 5)
    N = 5
    sol = sample_solution(problem, N, noise, DyadicTime(3, 1))
    xs = noise.values(0, 200)
    f, g, add = bit_rules(MODEL_B.f_table, MODEL_B.g_table)
    want = oracle_field(f, g, add, [0, 1], [1, 0], N, lambda m: int(xs[m]), 3 << N)
    for (n, m), v in want.items():
        assert sol.rows[n][m] == v


def test_kernel_draws_follow_their_lanes():
    N = 4
    grid = list(cantor_grid(N))
    sampler = sampler_psi(MODEL_B, N, COIN)
    draws = sampler.draw_many(grid, 99, lane_offset=10)
    for j in (0, 7, 15):
        sol = sample_solution(ProblemSpec(MODEL_B, grid[j]), N, NoiseStream(COIN, 99, 10 + j), tau(1))
        assert draws[j].prefix(N + 1) == sol.state_at(tau(1)).prefix(N + 1)
    tail = sampler.draw_many(grid[5:], 99, lane_offset=15)
    assert tail == draws[5:]


@pytest.mark.parametrize("p, reg", [(Fraction(0), Cutoff()), (Fraction(1), ConstAt(1))])
def test_degenerate_noise_is_deterministic(p, reg):
    sampler = sampler_psi(MODEL_A, 4, Bernoulli(p))
    grid = list(cantor_grid(4))
    assert sampler.draw_many(grid, 0) == [flow_psi(MODEL_A, 4, reg)(a) for a in grid]


def test_dirac_sampler():
    psi = flow_psi(MODEL_B, 3)
    s = sampler_from_map(psi, MODEL_B)
    grid = list(cantor_grid(3))
    assert s.draw_many(grid, 1) == [psi(a) for a in grid]


def test_composed_kernel_matches_direct_simulation():
    composed = stochastic_rg_apply(sampler_psi(MODEL_B, 2, COIN), MODEL_B)
    direct = sampler_psi(MODEL_B, 3, COIN)
    reports = [two_sample_kernel_test(composed, direct, a, 4000, 4, seed=i)
               for i, a in enumerate(cantor_grid(3))]
    alpha = 0.01 / len(reports)
    assert not any(p < alpha / 4 for r in reports for p in r.pvalues)


def test_model_a_collapses_onto_fixed_point():
    psi = stochastic_rg_iterate(sampler_psi(MODEL_A, 1, COIN), MODEL_A, 5)
    grid = list(cantor_grid(6))
    for rep in range(3):
        for a, y in zip(grid, psi.draw_many(grid, rep)):
            assert y.prefix(4) == fixed_point_A(a).prefix(4)


def test_empirical_kernel_and_reports():
    k = EmpiricalKernel(State.of(1), to_matrix([State.of(1, 0), State.of(1, 1)], 2))
    assert k.count == 2 and k.is_constant(1) and not k.is_constant(2)
    assert k.mean(2) == 0.5 and k.component(5).tolist() == [0, 0]
    same = compare_samples(k, k, 2)
    assert same.pvalues == [1.0, 1.0] and not same.any_rejected
    assert same.threshold == 0.005
    with pytest.raises(ValueError):
        EmpiricalKernel(State.of(), np.zeros((0, 1), dtype=np.uint64))


# --- expectations and fits ------------------------------------------------------

PROBLEM_B = ProblemSpec(MODEL_B, State.of(0, 1), (1, 0))
POINTS = [LatticePoint.make(3, "3/4"), LatticePoint.make(4, "11/16")]


def test_expectations_equal_explicit_averages():
    est = estimate_expectations(PROBLEM_B, COIN, [6], POINTS, 70, seed=4, batch=64)
    sols = [sample_solution(PROBLEM_B, 6, NoiseStream(COIN, derive_seed(4, 6), j), DyadicTime(1))
            for j in range(70)]
    for e in est:
        vals = [s[e.point.scale, e.point.time] for s in sols]
        assert e.mean == pytest.approx(sum(vals) / 70, abs=1e-12)
        sd = np.std(vals, ddof=1)
        assert e.ci == pytest.approx(1.96 * sd / math.sqrt(70), abs=1e-12)


def test_expectations_do_not_depend_on_partitioning():
    one = estimate_expectations(PROBLEM_B, COIN, [5, 7], POINTS, 300, seed=1, batch=4096)
    many = estimate_expectations(PROBLEM_B, COIN, [5, 7], POINTS, 300, seed=1, batch=64, workers=2)
    assert [(e.mean, e.ci) for e in one] == [(e.mean, e.ci) for e in many]


def test_degenerate_noise_has_zero_width():
    est = estimate_expectations(PROBLEM_B, Bernoulli(Fraction(0)), [6], POINTS, 50, seed=0)
    assert all(e.ci == 0 for e in est)
    assert all(e.mean in (0.0, 1.0) for e in est)
    with pytest.raises(ValueError):
        estimate_expectations(PROBLEM_B, COIN, [6], POINTS, 1, seed=0)
    with pytest.raises(ValueError):
        estimate_expectations(PROBLEM_B, COIN, [3], POINTS, 10, seed=0)


def test_fit_recovers_synthetic_rate():
    series = [(n, 0.4 + 0.3 * math.exp(-0.22 * n)) for n in range(6, 21)]
    fit = fit_convergence(series)
    assert fit.exponent == pytest.approx(-0.22, abs=1e-3)
    assert fit.limit == pytest.approx(0.4, abs=1e-3)
    below = fit_convergence([(n, 0.4 - 0.3 * math.exp(-0.5 * n)) for n in range(6, 21)], tail=8)
    assert below.exponent == pytest.approx(-0.5, abs=1e-3) and below.points == 8
    flat = fit_convergence([(n, 0.5) for n in range(5)])
    assert flat.exponent == float("-inf")
    with pytest.raises(ValueError):
        fit_convergence([(1, 0.1), (2, 0.2), (3, 0.3)])


# --- circle model ---------------------------------------------------------------

def _x0_response(N):
    # unit impulse x_0 = 1 in exact integer arithmetic, nothing else
    field = oracle_field(lambda x, y: 2 * x + 2 * y, lambda x, y: 0, lambda x, y: x + y,
                         [], [], N, lambda m: int(m == 0), 1 << N)
    return {n: field[n, 1 << (n - 1)] for n in range(1, N + 1)}


@pytest.mark.parametrize("N", range(2, 9))
def test_noise_coefficients_match_impulse_response(N):
    assert phase_coefficients(N).p == _x0_response(N)


def test_coefficient_examples():
    assert phase_coefficients(2).p == {1: 0, 2: 4}
    assert phase_coefficients(40, rows=[2]).p[2] == 2**40


def test_coefficients_evaluate_like_simulation():
    N = 5
    a = State(tuple(phase(Fraction(k, 16)) for k in (3, 7, 1, 9, 12)))
    noise = NoiseStream(UniformCircle(), 8, 2)
    sol = sample_solution(ProblemSpec(PHASE_MODEL, a), N, noise, tau(1))
    coeffs = phase_coefficients(N)
    for n in range(1, N + 1):
        assert coeffs.evaluate(n, a, noise.value) == sol.value(n, tau(1))


def test_limit_kernel_report():
    a = State(tuple(phase(Fraction(k, 8)) for k in (1, 3, 5)))
    rep = limit_kernel_check(a, 8, tau(1), 3000, seed=3, components=4)
    assert rep[0].dirac and rep[0].value == phase(Fraction(1))
    assert all(not r.dirac and r.ks < 0.05 for r in rep[1:])
    zero = limit_kernel_check(State(), 6, tau(1), 50, DiscretePhase(((0, 1),)))
    assert all(r.dirac and r.value == 0 for r in zero)
    with pytest.raises(ValueError):
        limit_kernel_check(State(), 4, tau(1), 10, COIN, model=MODEL_A)


def test_realization_map_shares_one_noise_path():
    N = 5
    fm = noise_realization_map(MODEL_B, N, COIN, seed=12, lane=3)
    grid = list(cantor_grid(N))
    outs = fm.evaluate_many([a.prefix(N) for a in grid])
    for a, y in list(zip(grid, outs))[::7]:
        sol = sample_solution(ProblemSpec(MODEL_B, a), N, NoiseStream(COIN, 12, 3), tau(1))
        assert y.prefix(N + 1) == sol.state_at(tau(1)).prefix(N + 1)
        assert fm(a) == y


def test_noise_space_must_match():
    with pytest.raises(ValueError):
        sampler_at(MODEL_A, 3, UniformCircle())
