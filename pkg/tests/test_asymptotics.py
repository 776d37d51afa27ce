import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from htrw import asymptotics as asy
from htrw import renewal as rn
from htrw.step_law import C1

# mpmath at 40 digits
FOUR_PI_C1 = 5.2270281803334751531
TAIL1 = 0.72774218110759710837
EXP_MEAN = 0.19131329801558517113
ML1 = 0.87478751252080678321
ML2 = 1.2020569031595942854
ML1_CORRECTED = 1.2371363644015486497
ML2_CORRECTED = 2.4041138063191885708
TAIL1_CORRECTED = 0.51459143121667050823


def test_nominal_constants():
    p = asy.NOMINAL
    assert p.four_pi_c1 == pytest.approx(FOUR_PI_C1, rel=1e-15)
    assert p.two_d_tail_const == pytest.approx(FOUR_PI_C1, rel=1e-15)
    assert p.one_d_tail_const == pytest.approx(TAIL1, rel=1e-15)
    assert p.exp_mean == pytest.approx(EXP_MEAN, rel=1e-15)
    assert p.ml_params[0] == 0.5
    assert p.ml_params[1] == pytest.approx(1 / (2 * math.sqrt(C1)))


def test_corrected_constants():
    p = asy.CORRECTED
    assert p.one_d_tail_const == pytest.approx(TAIL1_CORRECTED, rel=1e-15)
    assert p.two_d_tail_const == pytest.approx(math.pi * C1)
    assert p.exp_mean == pytest.approx(1 / (math.pi * C1))
    assert asy.ml_moment(1, p) == pytest.approx(ML1_CORRECTED, rel=1e-14)
    assert asy.ml_moment(2, p) == pytest.approx(ML2_CORRECTED, rel=1e-14)


@pytest.mark.parametrize("preds", [asy.NOMINAL, asy.CORRECTED])
def test_constants_rederive(preds):
    assert max(preds.formula_residuals().values()) < 1e-10
    assert set(preds.notes) >= {"kappa", "llt1_const", "exp_mean"}


def test_ml_moments():
    assert asy.ml_moment(0) == 1.0
    assert asy.ml_moment(1) == pytest.approx(ML1, rel=1e-14)
    assert asy.ml_moment(2) == pytest.approx(ML2, rel=1e-14)
    assert asy.ml_moment(2) * 2 * C1 == pytest.approx(1.0, abs=1e-12)
    # Gamma at half-integers
    for k in range(1, 9):
        expected = math.factorial(k) * asy.NOMINAL.ml_params[1] ** k / math.gamma(k / 2 + 1)
        assert asy.ml_moment(k) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        asy.ml_moment(-1)


def test_exp_limit_cdf():
    assert asy.exp_limit_cdf(0.0) == 0.0
    assert asy.exp_limit_cdf(-1.0) == 0.0
    assert asy.exp_limit_cdf(1e6) == 1.0
    assert asy.exp_limit_cdf(EXP_MEAN) == pytest.approx(1 - math.exp(-1))
    assert asy.exp_limit_cdf(0.1) == pytest.approx(1 - math.exp(-FOUR_PI_C1 * 0.1))


def test_inv_uniform_cdf():
    assert asy.inv_uniform_cdf(1.0) == 0.0
    assert asy.inv_uniform_cdf(0.5) == 0.0
    assert asy.inv_uniform_cdf(2.0) == 0.5
    assert asy.inv_uniform_cdf(1e12) == pytest.approx(1.0)


@given(st.lists(st.floats(min_value=-10, max_value=1e4), min_size=2, max_size=50))
def test_limit_cdfs_valid(ys):
    ys = np.sort(np.array(ys))
    for f in (asy.exp_limit_cdf, asy.inv_uniform_cdf):
        v = f(ys)
        assert np.all((v >= 0) & (v <= 1))
        assert np.all(np.diff(v) >= 0)


def test_tail_prediction():
    assert asy.tail_prediction(1, math.e**2) == pytest.approx(TAIL1 * math.sqrt(2 / math.e**2))
    assert asy.tail_prediction(2, math.e**math.e) == pytest.approx(FOUR_PI_C1)
    vals = [asy.tail_prediction(1, n) for n in range(8, 200)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        asy.tail_prediction(1, 2)
    with pytest.raises(ValueError):
        asy.tail_prediction(2, 2.7)
    with pytest.raises(ValueError):
        asy.tail_prediction(3, 100)


def test_hitting_prediction():
    # log log 100 / log log 1e8
    expected = 1 - math.log(math.log(100)) / math.log(math.log(1e8))
    assert asy.hitting_prediction(100, 1e8) == pytest.approx(expected)
    assert asy.hitting_prediction(100, 50) == 0.0


def test_slope_exact_power():
    n = 2.0 ** np.arange(3, 15)
    fit = asy.fit_power_slope(n, 3 * n**-2.0)
    assert fit.slope == pytest.approx(-2.0, abs=1e-9)
    assert fit.ci_low - 1e-12 <= -2.0 <= fit.ci_high + 1e-12
    assert asy.fit_power_slope(n, np.full(n.size, 0.7)).slope == pytest.approx(0.0, abs=1e-12)
    neg = asy.fit_power_slope(n, -(n**-1.5))
    assert neg.slope == pytest.approx(-1.5) and not neg.refused


def test_slope_refuses_sign_changes():
    fit = asy.fit_power_slope([1, 2, 3, 4], [1.0, -1.0, 2.0, 0.5])
    assert fit.refused and fit.sign_changes == 2 and math.isnan(fit.slope)
    assert asy.fit_power_slope([1, 2, 3], [1.0, 0.0, 1.0]).refused
    with pytest.raises(ValueError):
        asy.fit_power_slope([1], [1.0])


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=0.1, max_value=10))
def test_slope_recovers_exponent(alpha, scale):
    n = np.arange(10, 200, 7, dtype=float)
    assert asy.fit_power_slope(n, scale * n**alpha).slope == pytest.approx(alpha, abs=1e-9)


def test_trend_identical_series():
    rep = asy.trend_report([1, 2, 3], [2.0, 3.0, 4.0], [2.0, 3.0, 4.0])
    assert np.all(rep.ratios == 1.0)
    assert rep.verdict == "indeterminate"


def test_trend_improving():
    rep = asy.trend_report([1, 2, 3], [1.5, 1.3, 1.2], [1.0, 1.0, 1.0], band=(0.8, 1.25))
    assert rep.verdict == "improving"
    assert rep.approach == "falling"
    assert rep.in_band.tolist() == [False, False, True]
    assert len(rep.table()) == 3


def test_trend_rising_and_significance():
    g = np.arange(1, 21)
    noisy = 1 - 1 / g + 0.01 * np.sin(g)
    rep = asy.trend_report(g, noisy, np.ones(g.size))
    assert rep.deviation_trend is None
    assert rep.p_decreasing < 0.05 and rep.verdict == "improving"
    up = asy.trend_report(g, 1 + g / 10, np.ones(g.size), fit_slope=True)
    assert up.verdict == "worsening" and up.slope is not None


def test_trend_on_planar_return_tail():
    table = rn.gamma_table(2, 2**12)
    grid = [2**j for j in range(4, 13)]
    rep = asy.trend_report(grid, [table.gamma[n] for n in grid],
                           [asy.tail_prediction(2, n) for n in grid])
    assert rep.approach == "rising"
    assert rep.verdict == "improving"


def test_no_increasing_trend():
    assert asy.no_increasing_trend([1, 2, 3, 4], [4, 3, 2, 1])
    assert not asy.no_increasing_trend(range(10), range(10))


def test_kolmogorov_distance():
    rng = np.random.default_rng(0)
    x = rng.exponential(EXP_MEAN, 20000)
    assert asy.kolmogorov_distance(x, asy.exp_limit_cdf) < 0.02
    assert asy.kolmogorov_distance(np.zeros(10), asy.exp_limit_cdf) == pytest.approx(1.0)
