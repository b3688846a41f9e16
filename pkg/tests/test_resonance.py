import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birkhoff_nlw.errors import InvalidArgumentError, ResonanceDetectedError
from birkhoff_nlw.lattice import is_resonant
from birkhoff_nlw.resonance import (
    FrequencyModel,
    fit_alpha_gamma,
    format_index,
    min_divisor_scan,
    naive_min_divisor,
    parse_index,
    scan_masses,
    scan_rows_csv,
    signed_sum,
    small_divisor,
    smoothness_threshold,
)
from oracles import naive_ordered_divisor

M1 = FrequencyModel(1.0)


def test_frequency_examples():
    assert M1.omega((0,)) == 1.0
    assert FrequencyModel(1.0, 2).omega((3, 4)) == math.sqrt(26)
    assert M1.omega((3,)) == M1.omega((-3,))
    with pytest.raises(InvalidArgumentError):
        FrequencyModel(0.0)


def test_small_divisor_examples():
    assert small_divisor(((1, (2,)), (-1, (2,))), M1) == 0.0
    k = ((1, (1,)), (1, (1,)), (-1, (2,)))
    assert small_divisor(k, M1) == pytest.approx(-(2 * math.sqrt(2) - math.sqrt(5)), rel=1e-14)
    assert small_divisor(((1, (3, 4)), (-1, (5, 0))), FrequencyModel(1.0, 2)) == 0.0
    kb = ((1, (2,)), (-1, (1,)), (-1, (1,)))
    assert small_divisor(kb, M1) == -small_divisor(k, M1)


def test_scan_examples():
    res = min_divisor_scan(2, 2, M1, "H1")
    assert res.min_abs_divisor == pytest.approx(math.sqrt(2) - 1, abs=1e-15)
    assert res.witness == ((1, (0,)), (-1, (1,)))
    assert min_divisor_scan(1, 2, M1, "H1").min_abs_divisor == 1.0


@pytest.mark.parametrize("cond", ["H1", "H2", "H3"])
@pytest.mark.parametrize("r", [1, 2, 3])
@pytest.mark.parametrize("N", [1, 2, 3])
def test_scan_matches_naive(cond, r, N):
    res = min_divisor_scan(r, N, M1, cond)
    assert res.min_abs_divisor == naive_min_divisor(r, N, M1, cond)
    if not res.empty:
        assert abs(small_divisor(res.witness, M1)) == res.min_abs_divisor
        if cond == "H1":
            assert not is_resonant(res.witness)[0]


@pytest.mark.parametrize("r,N", [(1, 3), (2, 3), (3, 2), (3, 3)])
def test_h1_scan_matches_independent_oracle(r, N):
    assert min_divisor_scan(r, N, M1, "H1").min_abs_divisor == naive_ordered_divisor(r, N, 1.0)


@pytest.mark.parametrize("cond", ["H1", "H2", "H3"])
def test_backends_agree_bitwise(cond):
    from birkhoff_nlw import _backend

    if not _backend.compiled_available():
        pytest.skip("compiled extension not built")
    model = FrequencyModel(1.3, 2)
    a = min_divisor_scan(3, 2, model, cond, backend="python")
    b = min_divisor_scan(3, 2, model, cond, backend="compiled")
    assert (a.min_abs_divisor, a.argmin, a.exterior, a.count_scanned) == (
        b.min_abs_divisor, b.argmin, b.exterior, b.count_scanned)


def test_empty_domain_is_reported():
    res = min_divisor_scan(1, 3, M1, "H2")
    assert res.empty and res.min_abs_divisor == math.inf


def test_fit_examples():
    fit = fit_alpha_gamma([(n, 3.0 * n ** -2.0) for n in (2, 4, 8)])
    assert fit.alpha == pytest.approx(2.0, abs=1e-12)
    assert fit.gamma == pytest.approx(3.0, rel=1e-12)
    assert fit.residual == pytest.approx(0.0, abs=1e-12)
    assert fit_alpha_gamma([(n, 0.5) for n in (2, 4, 8)]).alpha == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ResonanceDetectedError):
        fit_alpha_gamma([(2, 0.1), (4, 0.0), (8, 0.01)])


def test_fit_envelope_lies_below_points():
    scans = [min_divisor_scan(3, n, M1, "H1") for n in (2, 4, 8, 16)]
    fit = fit_alpha_gamma(scans)
    assert 0 < fit.alpha < math.inf
    for n, m in fit.points:
        assert fit.gamma * n ** -fit.alpha <= m * (1 + 1e-12)


def test_smoothness_threshold():
    assert smoothness_threshold(2, 2, 10) == 248
    assert smoothness_threshold(1, 1, 0) == 2
    assert smoothness_threshold(3, 2, 1.5) - smoothness_threshold(3, 1, 1.5) == 2 * 3


def test_mass_scan_flags_resonant_masses():
    rows = scan_masses([1e-14, 1.0], 3, 2)
    assert rows[0][2] and not rows[1][2]


def test_index_round_trip_and_csv():
    k = ((1, (0, -2)), (-1, (3, 1)))
    assert parse_index(format_index(k)) == k
    text = scan_rows_csv([min_divisor_scan(2, 2, M1)])
    assert text.splitlines()[0] == "condition,r,N,m,min_abs_divisor,witness"
    assert "0.41421356237309515" in text


def test_scan_argument_errors():
    with pytest.raises(InvalidArgumentError):
        min_divisor_scan(2, 2, M1, "H4")
    with pytest.raises(InvalidArgumentError):
        min_divisor_scan(0, 2, M1)


def test_repeated_resonant_pairs_cancel_exactly():
    k = ((1, (1,)),) * 3 + ((-1, (1,)),) * 3
    assert small_divisor(k, M1) == 0.0
    k2 = ((1, (1,)), (1, (1,)), (-1, (-1,)), (-1, (1,)), (1, (2,)), (-1, (0,)))
    assert small_divisor(k2, M1) == -(math.sqrt(5.0) - 1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from([-3.0, -2.5, -1.0, 1.0, 2.5, 3.0, 0.7]), min_size=1, max_size=8), st.randoms())
def test_signed_sum_depends_only_on_multiset(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert signed_sum(shuffled) == signed_sum(values)
