"""Renewal identities: return-time tails, site avoidance, and the
combinatorial sum behind the 1-D local-time moments.

With ``u(i)`` the probability of being at the origin at time i and
``gamma(n) = P(tau > n)``, the renewal identity reads
``sum_{i=0}^n u(i) gamma(n - i) = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.signal import fftconvolve

from . import exact_dist
from ._numerics import neumaier_cumsum
from .errors import OutOfRangeError, ToleranceError

DIRECT_LIMIT = 2**13
ERROR_BUDGET = 1e-6


@dataclass(frozen=True)
class ReturnTailTable:
    """``gamma[n] = P(tau > n)`` for ``0 <= n <= N``."""

    dim: int
    gamma: np.ndarray
    u: np.ndarray
    error: np.ndarray

    @property
    def n_max(self) -> int:
        return self.gamma.shape[0] - 1

    def residuals(self, n_max: int | None = None) -> np.ndarray:
        """``sum_i u(i) gamma(n-i) - 1`` by direct compensated sums."""
        n_max = self.n_max if n_max is None else min(int(n_max), self.n_max)
        return renewal_residuals(self.u[: n_max + 1], self.gamma[: n_max + 1])


@njit(cache=True)
def _invert_direct(u, gamma):
    # gamma(n) = 1 - sum_{i=1}^n u(i) gamma(n-i), Neumaier-compensated
    gamma[0] = 1.0
    for n in range(1, u.shape[0]):
        total = 0.0
        comp = 0.0
        for i in range(1, n + 1):
            v = u[i] * gamma[n - i]
            t = total + v
            if abs(total) >= abs(v):
                comp += (total - t) + v
            else:
                comp += (v - t) + total
            total = t
        gamma[n] = (1.0 - total) - comp


@njit(cache=True)
def renewal_residuals(u, gamma):
    """``out[n] = sum_{i=0}^n u(i) gamma(n-i) - 1`` (compensated)."""
    m = u.shape[0]
    out = np.empty(m)
    for n in range(m):
        total = 0.0
        comp = 0.0
        for i in range(n + 1):
            v = u[i] * gamma[n - i]
            t = total + v
            if abs(total) >= abs(v):
                comp += (total - t) + v
            else:
                comp += (v - t) + total
            total = t
        out[n] = (total - 1.0) + comp
    return out


def series_reciprocal(a: np.ndarray) -> np.ndarray:
    """Power-series inverse of ``a`` (``a[0] = 1``) by Newton iteration.

    Each doubling step costs two FFT products, O(N log N) in total.
    """
    if a[0] != 1.0:
        raise ValueError("leading coefficient must be 1")
    n = a.shape[0]
    b = np.ones(1)
    m = 1
    while m < n:
        m = min(2 * m, n)
        e = fftconvolve(a[:m], b)[:m]
        e = -e
        e[0] += 2.0
        b = fftconvolve(b, e)[:m]
    return b


def _u_sequence(dim: int, n_max: int):
    if dim == 1:
        return exact_dist.u1_sequence(n_max)
    if dim == 2:
        return exact_dist.u2_sequence(n_max)
    raise ValueError("dim must be 1 or 2")


def gamma_from_u(u: np.ndarray) -> np.ndarray:
    """Invert the renewal identity for gamma; ``u[0]`` must be 1."""
    if u.shape[0] <= DIRECT_LIMIT + 1:
        gamma = np.empty_like(u)
        _invert_direct(u, gamma)
        return gamma
    return neumaier_cumsum(series_reciprocal(u))


def gamma_table(dim: int, n_max: int) -> ReturnTailTable:
    """Survival of the first return time, ``P(tau > n)`` for ``n <= n_max``.

    Tables up to 2^13 use the O(N^2) compensated inversion; longer ones
    invert the generating function ``U(x)`` by Newton iteration and sum.
    Errors are propagated as ``2 * cumsum(err_u)``: the coefficients of
    ``1 / U`` have absolute sum at most 2.
    """
    n_max = int(n_max)
    if n_max < 1:
        raise OutOfRangeError("n_max must be >= 1")
    if n_max > 2**22:
        raise OutOfRangeError(f"n_max = {n_max} above the renewal engine limit 2^22")
    u, err_u = _u_sequence(dim, n_max)
    err = 2.0 * np.cumsum(err_u)
    if err[-1] > ERROR_BUDGET:
        raise ToleranceError(
            f"u-sequence error {err[-1]:.3g} exceeds the budget {ERROR_BUDGET}", achieved=err[-1]
        )
    gamma = gamma_from_u(u)
    np.clip(gamma, 0.0, 1.0, out=gamma)
    return ReturnTailTable(dim, gamma, u, err)


def avoid_prob_exact(x, n: int, table: ReturnTailTable | None = None) -> exact_dist.Estimate:
    """``P(zeta(x, n) = 0)``: the planar walk misses site x during 1..n.

    Uses ``1 - sum_{i=1}^n P(S_i = x) gamma(n - i)``.
    """
    a, b = (int(c) for c in x)
    if a == 0 and b == 0:
        raise ValueError("x must differ from the origin")
    n = int(n)
    if n < 1:
        raise OutOfRangeError("n must be >= 1")
    if table is None or table.n_max < n:
        table = gamma_table(2, n)
    p, err_p = exact_dist.mixture_sequence(a, b, n)
    hits = p[1 : n + 1] * table.gamma[n - 1 :: -1][:n]
    value = 1.0 - math.fsum(hits)
    error = float(n * err_p.max() + table.error[n])
    return exact_dist.Estimate(min(1.0, max(0.0, value)), error)


@dataclass(frozen=True)
class GenFnCheck:
    """Coefficients of ``U``, ``V`` and of ``U V (1 - x)`` minus 0."""

    order: int
    u: np.ndarray
    v: np.ndarray
    residuals: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))


def genfn_identity_check(order: int) -> GenFnCheck:
    """Check ``U(x) V(x) = 1 / (1 - x)`` coefficient-wise up to ``order``.

    ``U`` has coefficients ``u1(k)`` and ``V`` has ``P(tau1 > k)``. The
    product is formed by a plain polynomial multiplication, independently
    of how the table was inverted.
    """
    order = int(order)
    if order < 0:
        raise OutOfRangeError("order must be >= 0")
    if order == 0:
        return GenFnCheck(0, np.ones(1), np.ones(1), np.zeros(1))
    table = gamma_table(1, order)
    prod = np.convolve(table.u, table.gamma)[: order + 1]
    return GenFnCheck(order, table.u, table.gamma, prod - 1.0)


# ---------------------------------------------------- combinatorial sum


def _weights(n: int) -> np.ndarray:
    m = np.arange(n + 1, dtype=float)
    f = np.zeros(n + 1)
    big = m >= 3
    f[big] = 1.0 / np.sqrt(m[big] * np.log(m[big]))
    return f


def harom_sum(k: int, n: int) -> float:
    """``sum_{n_i >= 3, n_1 + ... + n_k <= n} prod_j 1/sqrt(n_j log n_j)``.

    Computed as the k-fold convolution of ``f(m) = 1/sqrt(m log m)``
    (zero below 3), truncated at n, followed by a compensated sum.
    """
    k, n = int(k), int(n)
    if k < 1:
        raise OutOfRangeError("k must be >= 1")
    if n > 10**7:
        raise OutOfRangeError("n above 10^7 is not supported")
    if n < 3 * k:
        return 0.0
    f = _weights(n)
    acc = f
    for _ in range(k - 1):
        if n <= 4096:
            acc = np.convolve(acc, f)[: n + 1]
        else:
            acc = fftconvolve(acc, f)[: n + 1]
            np.maximum(acc, 0.0, out=acc)
    return math.fsum(acc)


def harom_prediction(k: int, n: float) -> float:
    """``(n / log n)^{k/2} Gamma(1/2)^k / Gamma(k/2 + 1)``."""
    return (n / math.log(n)) ** (0.5 * k) * math.pi ** (0.5 * k) / math.gamma(0.5 * k + 1.0)
