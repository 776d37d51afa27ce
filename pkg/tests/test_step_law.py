import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from htrw import step_law as sl
from htrw.rng import Stream

C1 = 0.41595368629035373434
# 1 - phi(t) = 2 c1 (zeta(3) - Re Li_3(e^{it})), evaluated with mpmath
ONE_MINUS_PHI = {
    1e-6: 6.3705430740040750423e-12,
    1e-3: 3.4972368046083686532e-6,
    0.1: 0.015817281734992175529,
    0.5: 0.22824259980389434157,
    2.0: 1.3893089177849341405,
    3.0: 1.7442231642875840654,
}


def test_normalizing_constant():
    assert sl.C1 == pytest.approx(C1, rel=1e-15)


def test_pmf_values():
    assert sl.pmf1d(0) == 0.0
    assert sl.pmf1d(1) == pytest.approx(C1)
    assert sl.pmf1d(-2) == pytest.approx(C1 / 8)
    assert sl.pmf2d((1, 0)) == pytest.approx(C1 / 2)
    assert sl.pmf2d((0, -3)) == pytest.approx(C1 / 54)
    assert sl.pmf2d((1, 1)) == 0.0
    assert sl.pmf2d((0, 0)) == 0.0


def test_mass_sums_to_one():
    law = sl.default_law()
    total = law.table_mass() + law.tail_mass(law.r_table + 1)
    assert total == pytest.approx(1.0, abs=1e-15)


@given(st.integers(min_value=-10**9, max_value=10**9))
def test_pmf_symmetric(n):
    assert sl.pmf1d(n) == sl.pmf1d(-n)


@given(st.integers(min_value=1, max_value=10**7))
def test_tail_mass_telescopes(m):
    diff = sl.tail_mass(m) - sl.tail_mass(m + 1)
    assert diff == pytest.approx(2 * sl.pmf1d(m), rel=1e-9)


def test_survival_table_consistent():
    law = sl.default_law()
    assert law.survival[1] == 1.0
    assert law.survival[2] == pytest.approx(1 - 2 * C1, rel=1e-14)
    assert np.all(np.diff(law.survival[1:]) < 0)
    assert law.cdf(-1) + (1 - law.cdf(0)) == pytest.approx(1.0)
    assert law.cdf(0) == pytest.approx(0.5)


@pytest.fixture(scope="module")
def draws_1d():
    return sl.sample_step_1d(Stream.from_seed(2024), 10**7)


def test_sampler_small_lengths(draws_1d):
    n = draws_1d.size
    for k in range(-6, 7):
        if k == 0:
            assert not np.any(draws_1d == 0)
            continue
        p = sl.pmf1d(k)
        obs = np.count_nonzero(draws_1d == k) / n
        assert abs(obs - p) < 4 * math.sqrt(p * (1 - p) / n), k


def test_sampler_tails(draws_1d):
    n = draws_1d.size
    a = np.abs(draws_1d)
    for m in (10, 100, 1000, 10**4):
        p = sl.tail_mass(m)
        obs = np.count_nonzero(a >= m) / n
        assert abs(obs - p) < 4 * math.sqrt(p * (1 - p) / n), m


def test_sampler_chi_square(draws_1d):
    a = np.abs(draws_1d)
    edges = np.array([1, 2, 3, 4, 6, 10, 20, 50, 200, 1000])
    obs = np.array([np.count_nonzero((a >= lo) & (a < hi)) for lo, hi in zip(edges[:-1], edges[1:])]
                   + [np.count_nonzero(a >= edges[-1])])
    probs = np.array([sl.tail_mass(lo) - sl.tail_mass(hi) for lo, hi in zip(edges[:-1], edges[1:])]
                     + [sl.tail_mass(edges[-1])])
    _, p = stats.chisquare(obs, probs * a.size)
    assert p > 1e-3


def test_tail_sampler_beyond_table():
    # rejection branch: conditional law of |X| given |X| > r_table
    law = sl.StepLaw1D(r_table=16)
    x = np.abs(sl.sample_step_1d(Stream.from_seed(5), 4 * 10**6, law))
    big = x[x > 16]
    assert big.size > 5000
    for m in (17, 18, 20, 32, 64, 256):
        p = sl.tail_mass(m) / sl.tail_mass(17)
        obs = np.count_nonzero(big >= m) / big.size
        assert abs(obs - p) < 4 * math.sqrt(p * (1 - p) / big.size) + 1e-12, m


def test_sign_and_axis_balance():
    x = sl.sample_step_2d(Stream.from_seed(9), 10**6)
    assert np.all((x[:, 0] == 0) ^ (x[:, 1] == 0))
    n = x.shape[0]
    horizontal = np.count_nonzero(x[:, 0]) / n
    positive = np.count_nonzero(x.sum(axis=1) > 0) / n
    assert abs(horizontal - 0.5) < 4 * 0.5 / math.sqrt(n)
    assert abs(positive - 0.5) < 4 * 0.5 / math.sqrt(n)


def test_sampler_deterministic():
    a = sl.sample_step_1d(Stream.from_seed(1), 1000)
    b = sl.sample_step_1d(Stream.from_seed(1), 1000)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("t", sorted(ONE_MINUS_PHI))
def test_char_fn_direct_against_polylog(t):
    value, bound = sl.one_minus_char_fn_direct(t)
    assert abs(value - ONE_MINUS_PHI[t]) <= bound + 4e-16 * max(1.0, value) + 1e-20
    assert sl.char_fn(t) == pytest.approx(1 - ONE_MINUS_PHI[t], rel=1e-14)


@pytest.mark.parametrize("t", sorted(ONE_MINUS_PHI))
def test_series_against_polylog(t):
    assert sl.one_minus_char_fn(t) == pytest.approx(ONE_MINUS_PHI[t], rel=1e-13)


@given(st.floats(min_value=1e-9, max_value=20.0))
def test_series_agrees_with_direct_sum(t):
    direct, bound = sl.one_minus_char_fn_direct(t)
    assert abs(sl.one_minus_char_fn(t) - direct) <= bound + 1e-14 * direct + 1e-300


@given(st.floats(min_value=-50.0, max_value=50.0))
def test_char_fn_even_periodic_bounded(t):
    v = sl.one_minus_char_fn(t)
    assert 0.0 <= v <= 2.0
    assert v == pytest.approx(sl.one_minus_char_fn(-t), abs=1e-15)
    assert v == pytest.approx(sl.one_minus_char_fn(t + 2 * math.pi), abs=1e-12)


def test_char_fn_2d():
    assert sl.char_fn_2d(0.0, 0.0) == 1.0
    assert sl.char_fn_2d(0.3, 0.0) == pytest.approx(0.5 * (1 + sl.char_fn(0.3)))
    assert sl.char_fn_2d(0.3, -0.7) == pytest.approx(sl.char_fn_2d(-0.7, 0.3))


def test_small_angle_leading_coefficient():
    # 1 - phi(t) = c1 t^2 (|log t| + 3/2) + O(t^4)
    for t in (1e-2, 1e-3, 1e-4, 1e-6):
        exact = ONE_MINUS_PHI.get(t) or sl.one_minus_char_fn_direct(t)[0]
        approx = C1 * t * t * (abs(math.log(t)) + 1.5)
        assert exact == pytest.approx(approx, rel=t * t)


def test_expansion_ratio_tends_to_half():
    ratios = [sl.expansion_ratio(10.0**-j) for j in range(2, 7)]
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] == pytest.approx(0.5 * (1 + 1.5 / (6 * math.log(10))), rel=1e-9)
    assert sl.expansion_ratio(1e-6, kappa=C1) == pytest.approx(2 * ratios[-1])
