"""The heavy-tailed step law and its characteristic function.

One-dimensional steps take the value ``n != 0`` with probability
``c1 * |n|**-3``, ``c1 = 1 / (2 zeta(3))``. Planar steps are a 1-D step
length times a uniformly chosen unit vector of Z^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import int64, njit, uint64
from scipy.special import sici

from . import _numerics
from .rng import DOUBLE_UNIT, Stream, next_double, next_u64

ZETA3 = _numerics.zeta(3)
ZETA6 = _numerics.zeta(6)
C1 = 1.0 / (2.0 * ZETA3)

R_TABLE = 2**20

UNIT_VECTORS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def pmf1d(n) -> float | np.ndarray:
    """P(X = n) = c1 |n|^-3 for n != 0, and 0 at the origin."""
    n = np.asarray(n)
    a = np.abs(n).astype(float)
    with np.errstate(divide="ignore"):
        p = np.where(a > 0, C1 / a**3, 0.0)
    return float(p) if p.ndim == 0 else p


def pmf2d(v) -> float:
    """P(xi = v): ``(c1/2) |v|^-3`` on the nonzero axis points, else 0."""
    a, b = (int(c) for c in v)
    if a != 0 and b != 0:
        return 0.0
    return 0.5 * pmf1d(a + b)


def tail_mass(m) -> float | np.ndarray:
    """P(|X| >= m) = 2 c1 zeta(3, m); equal to 1 for m <= 1."""
    m_arr = np.asarray(m, dtype=float)
    out = np.ones_like(m_arr)
    big = m_arr > 1
    if np.any(big):
        out[big] = 2.0 * C1 * _numerics.hurwitz_zeta(3, m_arr[big])
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class StepLaw1D:
    """Signed step law with an exact survival table for the sampler.

    ``survival[k] = P(|X| >= k)`` for ``0 <= k <= r_table + 1``. Lengths
    beyond ``r_table`` are drawn by rejection from a continuous ``x^-3``
    majorizer, so the sampler has no truncation.
    """

    c1: float = C1
    r_table: int = R_TABLE
    survival: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        k = np.arange(0, self.r_table + 2, dtype=float)
        surv = tail_mass(np.maximum(k, 1.0))
        surv.setflags(write=False)
        object.__setattr__(self, "survival", surv)

    def pmf(self, n):
        return pmf1d(n)

    def cdf(self, n: int) -> float:
        """P(X <= n)."""
        n = int(n)
        if n < 0:
            return 0.5 * self.tail_mass(-n)
        return 1.0 - 0.5 * self.tail_mass(n + 1)

    def tail_mass(self, m: int) -> float:
        if 0 <= m <= self.r_table + 1:
            return float(self.survival[m])
        return tail_mass(m)

    def table_mass(self) -> float:
        """Probability of ``0 < |X| <= r_table`` by compensated summation."""
        k = np.arange(self.r_table, 0, -1, dtype=float)
        return 2.0 * self.c1 * math.fsum(k**-3.0)


@dataclass(frozen=True)
class StepLaw2D:
    """Planar step: a 1-D step along a uniformly chosen axis direction."""

    base: StepLaw1D = field(default_factory=StepLaw1D)

    def pmf(self, v) -> float:
        return pmf2d(v)


_DEFAULT_LAW: StepLaw1D | None = None


def default_law() -> StepLaw1D:
    global _DEFAULT_LAW
    if _DEFAULT_LAW is None:
        _DEFAULT_LAW = StepLaw1D()
    return _DEFAULT_LAW


# ---------------------------------------------------------------- sampling


@njit(cache=True)
def _sample_tail(s, r_table):
    # proposal: round(Y), Y with density ~ y^-3 on [r_table + 1/2, inf);
    # target/proposal ratio is (1 - 1/(4k^2))^2, above 0.99 here
    lo = r_table + 0.5
    while True:
        y = lo / math.sqrt(next_double(s))
        k = int64(math.floor(y + 0.5))
        ratio = 1.0 - 0.25 / (float(k) * float(k))
        if next_double(s) <= ratio * ratio:
            return k


@njit(inline="always")
def draw_length(s, survival, r_table, c1, one_threshold):
    """Draw |X| and return it with the raw word; bits 0-1 are unused.

    ``one_threshold`` is the integer form of ``survival[2]``: the top 53
    bits at or above it mean |X| = 1.
    """
    w = next_u64(s)
    m = w >> uint64(11)
    if m >= one_threshold:
        return int64(1), w
    u = (m + uint64(1)) * DOUBLE_UNIT
    if u <= survival[r_table + 1]:
        return _sample_tail(s, r_table), w
    k = int64(math.sqrt(c1 / u) + 0.5)
    if k > r_table:
        k = r_table
    if k < 1:
        k = 1
    while survival[k] < u:
        k -= 1
    while survival[k + 1] >= u:
        k += 1
    return k, w


def one_threshold(survival: np.ndarray) -> np.uint64:
    """Smallest 53-bit integer m with (m + 1) 2^-53 > survival[2]."""
    return np.uint64(math.floor(survival[2] * 2.0**53))


@njit(cache=True)
def _sample_1d(s, survival, r_table, c1, thr, out):
    for i in range(out.shape[0]):
        k, w = draw_length(s, survival, r_table, c1, thr)
        if w & uint64(1):
            k = -k
        out[i] = k


@njit(cache=True)
def _sample_2d(s, survival, r_table, c1, thr, out):
    for i in range(out.shape[0]):
        k, w = draw_length(s, survival, r_table, c1, thr)
        if w & uint64(1):
            k = -k
        if w & uint64(2):
            out[i, 0] = k
            out[i, 1] = 0
        else:
            out[i, 0] = 0
            out[i, 1] = k


def sample_step_1d(stream: Stream, size: int, law: StepLaw1D | None = None) -> np.ndarray:
    """Exact draws from the 1-D step law (int64 array)."""
    law = law or default_law()
    out = np.empty(size, dtype=np.int64)
    _sample_1d(stream.state, law.survival, law.r_table, law.c1, one_threshold(law.survival), out)
    return out


def sample_step_2d(stream: Stream, size: int, law: StepLaw1D | None = None) -> np.ndarray:
    """Exact draws of planar steps, shape ``(size, 2)``."""
    law = law or default_law()
    out = np.empty((size, 2), dtype=np.int64)
    _sample_2d(stream.state, law.survival, law.r_table, law.c1, one_threshold(law.survival), out)
    return out


# ------------------------------------------------- characteristic function


def _reduce_angle(t: float) -> float:
    t = abs(float(t)) % (2.0 * math.pi)
    return 2.0 * math.pi - t if t > math.pi else t


def _tail_integral(t: float, start: float) -> float:
    """int_start^inf (1 - cos tx) x^-3 dx."""
    b = t * start
    _, ci = sici(b)
    g = math.sin(0.5 * b) ** 2 / (b * b) + 0.5 * (math.sin(b) / b - ci)
    return t * t * g


def one_minus_char_fn_direct(t: float) -> tuple[float, float]:
    """``1 - phi(t)`` by direct summation, with a bound on the remainder.

    The series ``2 c1 sum 2 sin^2(tn/2) / n^3`` is summed exactly up to
    ``N = max(1e5, 2e6 |t|)``; the rest is replaced by the midpoint
    integral, whose error is bounded through the second derivative.
    """
    t = _reduce_angle(t)
    if t == 0.0:
        return 0.0, 0.0
    n_terms = int(max(100_000, math.ceil(2e6 * t)))
    n = np.arange(n_terms, 0, -1, dtype=float)
    head = _numerics.neumaier_sum(2.0 * np.sin(0.5 * t * n) ** 2 / n**3)
    tail = _tail_integral(t, n_terms + 0.5)
    bound = (t * t / (2.0 * n_terms**2) + 2.0 * t / n_terms**3 + 6.0 / n_terms**4) / 24.0
    return 2.0 * C1 * (head + tail), 2.0 * C1 * bound


def char_fn(t: float) -> float:
    """phi(t) = E exp(itX), real because the law is symmetric."""
    return 1.0 - one_minus_char_fn_direct(t)[0]


def char_fn_2d(t1: float, t2: float) -> float:
    """Planar characteristic function; the direction splits it evenly."""
    return 0.5 * (char_fn(t1) + char_fn(t2))


_SERIES_TERMS = 40


def _series_coefficients() -> np.ndarray:
    k = np.arange(1, _SERIES_TERMS + 1)
    z = np.array([_numerics.zeta(int(2 * j)) for j in k])
    return z / (k * (2.0 * k + 1.0) * (2.0 * k + 2.0))


_SERIES_COEF = _series_coefficients()


def one_minus_char_fn(t) -> np.ndarray | float:
    """Vectorized ``1 - phi(t)`` from the closed-form small-angle series.

    For ``0 < t < 2 pi``,
    ``1 - phi(t) = 2 c1 t^2 [3/4 - log(t)/2 + sum_k zeta(2k) (t/2pi)^{2k}
    / (k (2k+1) (2k+2))]``, which keeps full relative precision as
    ``t -> 0``. Used by the quadrature engines; agrees with
    :func:`one_minus_char_fn_direct` to rounding.
    """
    t_arr = np.abs(np.asarray(t, dtype=float)) % (2.0 * math.pi)
    t_arr = np.where(t_arr > math.pi, 2.0 * math.pi - t_arr, t_arr)
    q = (t_arr / (2.0 * math.pi)) ** 2
    acc = np.zeros_like(t_arr)
    for c in _SERIES_COEF[::-1]:
        acc = (acc + c) * q
    with np.errstate(divide="ignore", invalid="ignore"):
        body = 0.75 - 0.5 * np.log(t_arr) + acc
        out = np.where(t_arr > 0, 2.0 * C1 * t_arr * t_arr * body, 0.0)
    return float(out) if out.ndim == 0 else out


def expansion_ratio(t: float, kappa: float = 2.0 * C1) -> float:
    """``(1 - phi(t)) / (kappa t^2 |log t|)``.

    The series above gives ``1 - phi(t) ~ c1 t^2 |log t|``, so the ratio
    tends to ``c1 / kappa``: 1/2 for the default ``kappa = 2 c1``.
    """
    value, _ = one_minus_char_fn_direct(t)
    t = _reduce_angle(t)
    return value / (kappa * t * t * abs(math.log(t)))
