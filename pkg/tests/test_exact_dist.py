import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from htrw import exact_dist as ed
from htrw.errors import OutOfRangeError, ToleranceError
from htrw.step_law import C1, ZETA6, pmf1d

U1_2 = 0.35203624366039223915  # 2 c1^2 zeta(6), mpmath


def _direct_power(n, half_width):
    # plain O(W^2) convolution, independent of the FFT engine
    x = np.arange(-half_width, half_width + 1)
    step = pmf1d(x)
    acc = step
    for _ in range(n - 1):
        acc = np.convolve(acc, step)
    centre = acc.size // 2
    return acc, centre


def test_two_steps_return():
    assert ed.u1(2).value == pytest.approx(U1_2, rel=1e-13)
    assert 2 * C1**2 * ZETA6 == pytest.approx(U1_2, rel=1e-15)
    pmf = ed.convolve_power(2)
    assert pmf(0) == pytest.approx(U1_2, abs=pmf.lost_mass + 1e-15)


def test_trivial_times():
    assert ed.u1(0) == (1.0, 0.0)
    assert ed.u1(1) == (0.0, 0.0)
    assert ed.u2(1).value == 0.0
    assert ed.pmf_sn_point(1, (1, 0)).value == pytest.approx(C1 / 2, rel=1e-13)
    assert ed.pmf_sn_point(1, (1, 1)).value == pytest.approx(0.0, abs=1e-15)
    assert ed.u2(2).value == pytest.approx(U1_2 / 2, rel=1e-13)


def test_convolution_matches_direct_oracle():
    acc, c = _direct_power(3, 1500)
    pmf = ed.convolve_power(3)
    for x in (0, 1, 2, 7, 50, 300):
        assert pmf(x) == pytest.approx(acc[c + x], abs=1e-15), x


def test_quadrature_matches_direct_oracle():
    acc, c = _direct_power(4, 1000)
    for x in (0, 3, 40):
        est = ed.cf_quadrature_pmf(4, x)
        assert abs(est.value - acc[c + x]) < 1e-13


@given(st.integers(min_value=1, max_value=64))
def test_convolution_mass_accounting(n):
    pmf = ed.convolve_power(n, window=512, tol=None)
    assert pmf.total() + pmf.lost_mass == pytest.approx(1.0, abs=1e-12)
    assert np.all(pmf.values >= 0)
    assert np.allclose(pmf.values, pmf.values[::-1], atol=1e-17)


def test_convolution_tolerance_and_window():
    with pytest.raises(ToleranceError) as info:
        ed.convolve_power(1000, window=64, tol=1e-9)
    assert info.value.achieved > 1e-9
    pmf = ed.convolve_power(5, window=100, tol=None)
    with pytest.raises(OutOfRangeError):
        pmf(101)


def test_window_rule():
    w = ed.auto_window(1000, 1e-9)
    assert w >= 2**14 and w & (w - 1) == 0
    assert 1000 * 2 * C1 / (2 * w**2) <= 1e-9


def test_range_errors():
    with pytest.raises(OutOfRangeError):
        ed.u1(10**16)
    with pytest.raises(OutOfRangeError):
        ed.cf_quadrature_pmf(-1, 0)
    with pytest.raises(OutOfRangeError):
        ed.pmf_sn_point(2**27, (0, 0))


def test_quadrature_large_n_is_fast_and_sane():
    est = ed.u1(10**12)
    assert est.error < 1e-15
    n = 1e12
    # between the corrected and the nominal Gaussian values
    assert ed.llt_gaussian_1d(n, 0) < est.value < ed.llt_gaussian_1d(n, 0, kappa=C1)


@pytest.mark.parametrize("x", [0, 5])
def test_sequence_matches_adaptive_quadrature(x):
    vals, errs = ed.pmf_sequence_1d(x, 5000)
    for k in (2, 17, 300, 5000):
        ref = ed.cf_quadrature_pmf(k, x).value
        assert abs(vals[k] - ref) < 1e-14 + errs[k]


def test_mixture_matches_direct_planar_evolution():
    direct, lost = ed.direct_2d_origin(8, window=64)
    mix, err = ed.u2_sequence(8)
    assert np.all(np.abs(direct - mix) <= lost + err + 1e-15)


def test_planar_point_consistent_with_sequence():
    seq, _ = ed.mixture_sequence(3, 0, 200)
    assert ed.pmf_sn_point(200, (3, 0)).value == pytest.approx(seq[200], rel=1e-12)
    assert ed.pmf_sn_point(200, (0, 3)).value == pytest.approx(seq[200], rel=1e-12)


def test_local_time_moments_small_n():
    m1, m2 = ed.local_time_moments(1, 2)
    assert m1 == pytest.approx(U1_2) and m2 == pytest.approx(U1_2)
    u, _ = ed.u1_sequence(4)
    m1, m2 = ed.local_time_moments(1, 4)
    assert m1 == pytest.approx(u[2] + u[3] + u[4])
    assert m2 == pytest.approx(m1 + 2 * u[2] * u[2])


def test_gaussian_formulas():
    n = 1e6
    lg = math.log(n)
    assert ed.llt_gaussian_1d(n, 0) == pytest.approx(1 / (2 * math.sqrt(math.pi * C1 * n * lg)))
    assert ed.llt_gaussian_2d(n, (0, 0)) == pytest.approx(1 / (4 * math.pi * C1 * n * lg))
    assert ed.llt_gaussian_1d(n, 1000) < ed.llt_gaussian_1d(n, 0)


def test_llt_profile_rows():
    rows = ed.llt_error_profile(1, [1024], [0, 10])
    assert len(rows) == 2
    r = rows[0]
    assert r.residual == pytest.approx(r.actual - r.predicted)
    assert r.scaled == pytest.approx(r.residual * ed.residual_scale(1, 1024))
    with pytest.raises(OutOfRangeError):
        ed.llt_error_profile(1, [2], [0])


def test_corrected_dispersion_approaches_gaussian():
    # with Var ~ c1 n log n the ratio climbs toward 1
    ratios = [ed.u1(10**j).value / ed.llt_gaussian_1d(10**j, 0, kappa=C1) for j in range(4, 9)]
    assert all(a < b < 1 for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] > 0.85
