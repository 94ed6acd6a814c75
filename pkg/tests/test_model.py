from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from multiscale_rg.model import (MODEL_A, MODEL_B, PHASE_MODEL, ModelSpec, ProblemSpec, Space,
                                 State, add_states, bits, boundary_shift, coupling, local_update,
                                 phase, phase_value)

bit_lists = st.lists(st.integers(0, 1), max_size=12)


def test_builtin_tables():
    assert [MODEL_A.f(x, y) for x in (0, 1) for y in (0, 1)] == [0, 0, 1, 0]
    assert [MODEL_A.g(x, y) for x in (0, 1) for y in (0, 1)] == [0, 1, 1, 1]
    assert [MODEL_B.f(x, y) for x in (0, 1) for y in (0, 1)] == [0, 0, 0, 1]
    assert [MODEL_B.g(x, y) for x in (0, 1) for y in (0, 1)] == [0, 1, 1, 0]
    assert MODEL_A.zero_is_stationary and MODEL_B.zero_is_stationary


def test_phase_model_doubles():
    x, y = phase(Fraction(3, 8)), phase(Fraction(1, 4))
    assert phase_value(PHASE_MODEL.f(x, y)) == Fraction(1, 4)
    assert PHASE_MODEL.g(x, y) == 0


def test_model_round_trip():
    assert ModelSpec.from_dict(MODEL_B.to_dict()) == MODEL_B
    with pytest.raises(ValueError):
        ModelSpec.bit((0, 1), (0, 0, 0, 0))


@given(bit_lists, st.integers(0, 1))
def test_state_equality_ignores_padding(vals, tail):
    s = State(tuple(vals), tail)
    assert State(tuple(vals) + (tail,) * 3, tail) == s
    assert s.prefix(len(vals) + 2)[: len(vals)] == tuple(vals)
    assert s[len(vals) + 5] == tail


@given(bit_lists)
def test_shifts(vals):
    s = bits(vals)
    assert s.shift_down().shift_up() == s
    for k in range(1, 4):
        assert s.shift_up(k)[1] == s[k + 1]


def test_state_is_not_iterable():
    with pytest.raises(TypeError):
        list(State.of(1, 0))
    with pytest.raises(IndexError):
        State.of(1)[0]


@given(bit_lists, bit_lists)
def test_bitwise_addition_is_xor(x, y):
    s = add_states(Space.BIT, bits(x), bits(y))
    for n in range(1, 14):
        assert s[n] == bits(x)[n] ^ bits(y)[n]


def test_coupling_terms():
    a = State.of(1, 0, 1)
    assert coupling(MODEL_A, a) == State.of(1, 1)
    assert boundary_shift(MODEL_B, 1, a) == State.of(0)
    assert boundary_shift(MODEL_B, 1, State.of(0, 1)) == State.of(1)


def test_local_update_parity():
    assert local_update(MODEL_A, "odd", 1, 0, 1, 1) == 1
    assert local_update(MODEL_A, "even", 1, 0, 1, 1) == 0
    with pytest.raises(ValueError):
        local_update(MODEL_A, "both", 0, 0)


def test_problem_summary():
    p = ProblemSpec(MODEL_B, State.of(0, 1), (0, 0, 1))
    assert p.n_max0 == 2 and p.t_bc == 2 and p.b(7) == 0
    assert ProblemSpec(MODEL_B, State.of(), ()).t_bc is None
    assert ProblemSpec(MODEL_B, State((), tail=1)).n_max0 is None
    with pytest.raises(ValueError):
        ProblemSpec(MODEL_B, State.of(2))


def test_phase_representation():
    assert phase(Fraction(5, 4)) == phase(Fraction(1, 4))
    assert phase_value(phase("0.75")) == Fraction(3, 4)
    with pytest.raises(ValueError):
        phase(Fraction(1, 3))
