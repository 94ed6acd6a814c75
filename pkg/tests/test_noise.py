from fractions import Fraction
from itertools import islice

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multiscale_rg import engine
from multiscale_rg.model import MODEL_B, PHASE_MODEL, phase
from multiscale_rg.noise import (Bernoulli, DiscretePhase, NoiseStream, UniformCircle, derive_seed,
                                 lane_values, noise_from_dict)


def _columns(spec, model, seed, lo, hi, count, odd=True):
    lanes = engine.lanes_for(model, hi - lo)
    out = []
    for v in islice(lane_values(spec, seed, lo, hi, lanes, odd), count):
        out.append(lanes.unpack(v))
    return np.array(out)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 150), st.integers(1, 90),
       st.sampled_from([Bernoulli(), Bernoulli(Fraction(1, 5))]))
def test_batched_lanes_equal_single_streams(seed, lo, width, spec):
    block = _columns(spec, MODEL_B, seed, lo, lo + width, 9)
    for j in (0, width - 1):
        assert list(block[:, j]) == list(NoiseStream(spec, seed, lo + j).values(0, 9))


def test_phase_lanes_and_random_access():
    spec = UniformCircle()
    block = _columns(spec, PHASE_MODEL, 7, 3, 8, 12)
    s = NoiseStream(spec, 7, 5)
    assert list(block[:, 2]) == list(s.values(0, 12))
    assert s[10] == block[10, 2] and s.value(5) == block[5, 2]


def test_odd_indices_can_be_skipped():
    block = _columns(Bernoulli(), MODEL_B, 3, 0, 70, 10, odd=False)
    assert not block[1::2].any()
    assert (block[0::2] == _columns(Bernoulli(), MODEL_B, 3, 0, 70, 10)[0::2]).all()


def test_lanes_and_seeds_are_distinct():
    a = NoiseStream(UniformCircle(), 1, 0).values(0, 64)
    b = NoiseStream(UniformCircle(), 1, 1).values(0, 64)
    c = NoiseStream(UniformCircle(), 2, 0).values(0, 64)
    assert (a != b).any() and (a != c).any()
    assert derive_seed(1, 2) != derive_seed(1, 3) and derive_seed(1, 2) == derive_seed(1, 2)


def test_bernoulli_frequency():
    x = NoiseStream(Bernoulli(Fraction(1, 4)), 11, 3).values(0, 40000)
    assert abs(x.mean() - 0.25) < 0.01
    coins = NoiseStream(Bernoulli(), 11, 3).values(0, 40000)
    assert abs(coins.mean() - 0.5) < 0.01


def test_degenerate_specs():
    assert NoiseStream(Bernoulli(Fraction(1)), 0).values(0, 5).tolist() == [1] * 5
    atom = DiscretePhase(((Fraction(1, 4), Fraction(1)),))
    assert atom.degenerate == phase(Fraction(1, 4))
    assert set(NoiseStream(atom, 0).values(0, 5).tolist()) == {phase(Fraction(1, 4))}


def test_discrete_phase_weights():
    spec = DiscretePhase(((0, Fraction(1, 2)), (Fraction(1, 2), Fraction(1, 2))))
    x = NoiseStream(spec, 4).values(0, 20000)
    assert set(x.tolist()) == {0, phase(Fraction(1, 2))}
    assert abs((x == 0).mean() - 0.5) < 0.02


def test_spec_validation_and_parsing():
    with pytest.raises(ValueError):
        Bernoulli(Fraction(3, 2))
    with pytest.raises(ValueError):
        DiscretePhase(((0, Fraction(1, 2)),))
    assert noise_from_dict({"kind": "bernoulli", "p": "1/3"}) == Bernoulli(Fraction(1, 3))
    assert noise_from_dict({"kind": "uniform"}) == UniformCircle()
    assert noise_from_dict(Bernoulli(Fraction(1, 3)).describe()) == Bernoulli(Fraction(1, 3))
    with pytest.raises(ValueError):
        noise_from_dict({"kind": "gauss"})
