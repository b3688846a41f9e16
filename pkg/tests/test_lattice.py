import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birkhoff_nlw.errors import InvalidArgumentError
from birkhoff_nlw.lattice import (
    SpectralState,
    canonical,
    classify_by_high_modes,
    conjugate,
    enumerate_modes,
    is_resonant,
    mixed_norm,
    momentum,
    mu,
    multiplicity_count,
    weight,
    zero_momentum_indices,
)
from birkhoff_nlw.resonance import FrequencyModel, small_divisor

signed_mode_1d = st.tuples(st.sampled_from([1, -1]), st.tuples(st.integers(-6, 6)))
signed_mode_2d = st.tuples(st.sampled_from([1, -1]), st.tuples(st.integers(-4, 4), st.integers(-4, 4)))


def test_weight_examples():
    assert weight((0,)) == 1.0
    assert weight((0, 0, 0)) == 1.0
    assert weight((3, 4)) == pytest.approx(5.0990195, abs=1e-7)
    assert weight((4, 3)) == weight((3, 4)) == weight((-3, 4))


def test_momentum_examples():
    assert momentum(((1, (2,)), (-1, (2,)))) == (0,)
    assert momentum(((1, (1,)), (1, (2,)), (-1, (3,)))) == (0,)
    assert momentum(((1, (1, 0)), (1, (2, 3)))) == (3, 3)


def test_mu_examples():
    k = ((1, (5,)), (-1, (2,)), (1, (0,)))
    assert mu(0, k) == math.inf
    assert mu(2, k) == pytest.approx(math.sqrt(5))
    same = ((1, (3,)), (-1, (3,)), (1, (-3,)))
    assert {mu(n, same) for n in (1, 2, 3)} == {math.sqrt(10)}
    with pytest.raises(InvalidArgumentError):
        mu(4, k)


def test_resonance_examples():
    assert not is_resonant(((1, (1,)), (-1, (1,)), (1, (0,))))[0]
    ok, sigma = is_resonant(((1, (3, 4)), (-1, (5, 0))))
    assert ok and sigma == (1, 0)
    assert not is_resonant(((1, (2,)), (1, (2,))))[0]


def test_class_examples():
    assert classify_by_high_modes(((1, (1,)), (-1, (0,)), (1, (-1,))), 2)[0] == "o"
    assert classify_by_high_modes(((1, (10,)), (-1, (1,)), (1, (0,))), 2)[0] == "i"
    assert classify_by_high_modes(((1, (10,)), (-1, (10,)), (1, (0,))), 2)[0] == "ii"
    assert classify_by_high_modes(((1, (10,)), (-1, (10,)), (1, (5,))), 2)[0] == "iii"


@settings(max_examples=1000, deadline=None)
@given(st.lists(signed_mode_2d, min_size=1, max_size=6), st.randoms())
def test_canonical_is_permutation_invariant(entries, rnd):
    shuffled = list(entries)
    rnd.shuffle(shuffled)
    c = canonical(entries)
    assert canonical(shuffled) == c
    assert canonical(c) == c
    assert conjugate(conjugate(c)) == c
    assert momentum(conjugate(c)) == tuple(-x for x in momentum(c))


@settings(max_examples=300, deadline=None)
@given(st.lists(signed_mode_1d, min_size=1, max_size=6), st.floats(0.01, 10.0))
def test_resonant_means_zero_divisor(entries, mass):
    k = canonical(entries)
    resonant, sigma = is_resonant(k)
    if resonant:
        assert small_divisor(k, FrequencyModel(mass)) == 0.0
        for i, j in enumerate(sigma):
            assert k[i][0] == -k[j][0]


@settings(max_examples=200, deadline=None)
@given(st.lists(signed_mode_1d, min_size=1, max_size=5))
def test_mu_nonincreasing(entries):
    k = canonical(entries)
    vals = [mu(n, k) for n in range(len(k) + 1)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def _brute_zero_momentum(d, K, m):
    modes = enumerate_modes(d, K)
    signed = [(s, a) for a in modes for s in (1, -1)]
    out = set()
    for combo in itertools.product(signed, repeat=m):
        if all(sum(s * a[i] for s, a in combo) == 0 for i in range(d)):
            out.add(canonical(combo))
    return out


@pytest.mark.parametrize("d,K,m", [(1, 4, 3), (1, 3, 4), (2, 2, 3)])
def test_zero_momentum_enumeration_matches_brute_force(d, K, m):
    got = list(zero_momentum_indices(d, K, m))
    assert len(got) == len(set(got))
    assert set(got) == _brute_zero_momentum(d, K, m)


def test_class_partition_counts():
    keys = list(zero_momentum_indices(1, 4, 3))
    counts = {"o": 0, "i": 0, "ii": 0, "iii": 0}
    for k in keys:
        counts[classify_by_high_modes(k, 2)[0]] += 1
    assert sum(counts.values()) == len(_brute_zero_momentum(1, 4, 3))
    assert counts["o"] and counts["i"] and counts["ii"]


def test_multiplicity_count():
    assert multiplicity_count(((1, (0,)),) * 3) == 1
    assert multiplicity_count(((1, (0,)), (1, (1,)), (-1, (1,)))) == 6
    assert multiplicity_count(((1, (0,)), (1, (0,)), (-1, (0,)))) == 3


def test_norm_examples():
    st_ = SpectralState.from_dict(2, 6, {(3, 4): 0.1})
    assert st_.norm(1.5) == pytest.approx(26 ** 0.75 * 0.1, rel=1e-14)
    zero = SpectralState.zeros(1, 4)
    for part in ("all", "low", "high"):
        assert mixed_norm(zero, 2.0, part, 2) == 0.0
    z = st_.doubled()
    assert np.linalg.norm(z) == pytest.approx(math.sqrt(2) * st_.norm(0), rel=1e-14)
    with pytest.raises(InvalidArgumentError):
        mixed_norm(zero, 1.0, "low", 5)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.floats(0, 3))
def test_split_and_norm_partition(seed, N, s):
    rng = np.random.default_rng(seed)
    n = len(enumerate_modes(1, 6))
    state = SpectralState(1, 6, rng.standard_normal(n) + 1j * rng.standard_normal(n))
    low, high = state.split_low_high(N)
    assert np.array_equal(low.xi + high.xi, state.xi)
    total = mixed_norm(state, s) ** 2
    parts = mixed_norm(state, s, "low", N) ** 2 + mixed_norm(state, s, "high", N) ** 2
    assert parts == pytest.approx(total, rel=1e-12)
    assert mixed_norm(state, s, "low", N) <= mixed_norm(state, s) * (1 + 1e-15)


def test_enumerate_modes_uses_weight_bound():
    assert enumerate_modes(1, 2) == ((-1,), (0,), (1,))
    assert (2,) in enumerate_modes(1, math.sqrt(5))
    assert len(enumerate_modes(2, 2)) == 9
    assert len(enumerate_modes(2, math.sqrt(2))) == 5
