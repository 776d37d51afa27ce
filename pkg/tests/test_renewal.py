import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from htrw import exact_dist as ed
from htrw import renewal as rn
from htrw.errors import OutOfRangeError
from htrw.step_law import C1

U1_2 = 0.35203624366039223915


def test_first_values():
    t1 = rn.gamma_table(1, 4)
    assert t1.gamma[0] == 1.0 and t1.gamma[1] == 1.0
    assert t1.gamma[2] == pytest.approx(1 - U1_2, rel=1e-13)
    t2 = rn.gamma_table(2, 4)
    assert t2.gamma[2] == pytest.approx(1 - U1_2 / 2, rel=1e-13)


def test_residuals_small():
    for dim in (1, 2):
        t = rn.gamma_table(dim, 2**10)
        assert np.max(np.abs(t.residuals())) < 1e-13
        assert np.all(np.diff(t.gamma) <= 1e-15)


def test_fft_inversion_matches_direct():
    u, _ = ed.u1_sequence(3000)
    direct = rn.gamma_from_u(u)
    fast = np.cumsum(rn.series_reciprocal(u))
    assert np.max(np.abs(direct - fast)) < 1e-13


@given(st.lists(st.floats(min_value=-0.5, max_value=0.5), min_size=1, max_size=60))
def test_series_reciprocal_property(tail):
    a = np.array([1.0] + tail)
    b = rn.series_reciprocal(a)
    prod = np.convolve(a, b)[: a.size]
    expected = np.zeros(a.size)
    expected[0] = 1.0
    scale = np.max(np.abs(b)) + 1.0
    assert np.allclose(prod, expected, atol=1e-12 * scale * a.size)


def test_reciprocal_rejects_bad_leading_term():
    with pytest.raises(ValueError):
        rn.series_reciprocal(np.array([2.0, 1.0]))


def test_genfn_identity():
    check = rn.genfn_identity_check(512)
    assert check.max_residual < 1e-13
    assert rn.genfn_identity_check(0).max_residual == 0.0


def test_avoid_one_step():
    # only a first step onto (1, 0) visits it
    assert rn.avoid_prob_exact((1, 0), 1).value == pytest.approx(1 - C1 / 2, rel=1e-13)


def test_avoid_decreasing_in_n():
    table = rn.gamma_table(2, 256)
    vals = [rn.avoid_prob_exact((3, 0), n, table).value for n in (1, 4, 16, 64, 256)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        rn.avoid_prob_exact((0, 0), 4)


def _brute_harom(k, n):
    f = {m: 1 / math.sqrt(m * math.log(m)) for m in range(3, n + 1)}
    total = []
    for combo in product(range(3, n + 1), repeat=k):
        if sum(combo) <= n:
            total.append(math.prod(f[m] for m in combo))
    return math.fsum(total)


@pytest.mark.parametrize("k,n", [(1, 3), (1, 12), (2, 10), (2, 25), (3, 20)])
def test_harom_brute_force(k, n):
    assert rn.harom_sum(k, n) == pytest.approx(_brute_harom(k, n), abs=1e-12)


def test_harom_values():
    assert rn.harom_sum(1, 3) == pytest.approx(1 / math.sqrt(3 * math.log(3)), rel=1e-15)
    assert rn.harom_sum(2, 5) == 0.0
    with pytest.raises(OutOfRangeError):
        rn.harom_sum(0, 5)


def test_harom_fft_branch_agrees():
    # n above the direct-convolution cutoff
    f = rn._weights(5000)
    direct = math.fsum(np.convolve(f, f)[:5001])
    assert rn.harom_sum(2, 5000) == pytest.approx(direct, rel=1e-12)


@given(st.integers(min_value=1, max_value=3), st.integers(min_value=3, max_value=300))
def test_harom_monotone_in_n(k, n):
    assert rn.harom_sum(k, n + 1) >= rn.harom_sum(k, n)


def test_table_limits():
    with pytest.raises(OutOfRangeError):
        rn.gamma_table(1, 2**23)
    with pytest.raises(OutOfRangeError):
        rn.gamma_table(1, 0)
