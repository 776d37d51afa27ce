"""Exact laws of the 1-D sum Q_n and the planar walk S_n.

Three engines, each usable as an oracle for the others:

* :func:`convolve_power` -- truncated FFT convolution powers with tracked
  lost mass;
* :func:`cf_quadrature_pmf` -- adaptive Fourier inversion of phi^n;
* :func:`pmf_sequence_1d` -- whole sequences ``P(Q_k = x), k <= n_max``
  from one fixed composite Gauss-Legendre grid.

Planar probabilities come from the binomial direction mixture
``P(S_n = (a, b)) = sum_k C(n, k) 2^-n P(Q_k = a) P(Q_{n-k} = b)``,
and :func:`direct_2d_origin` evolves the planar law directly for checks.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from numba import njit
from scipy.signal import fftconvolve

from . import _numerics
from .errors import OutOfRangeError, ToleranceError
from .step_law import C1, StepLaw1D, default_law, one_minus_char_fn, pmf1d

MAX_N = 10**15
DEFAULT_MASS_TOL = 1e-9
QUAD_TOL = 1e-12


class Estimate(NamedTuple):
    value: float
    error: float


def _check_n(n: int) -> int:
    n = int(n)
    if n < 0:
        raise OutOfRangeError("n must be non-negative")
    if n > MAX_N:
        raise OutOfRangeError(f"n = {n} exceeds the supported limit {MAX_N:.0e}")
    return n


# ------------------------------------------------------------ convolution


class LatticePmf1D:
    """Law of Q_n restricted to the window [-W, W].

    ``lost_mass`` bounds, for every entry, the difference between the
    true probability and the stored value (stored values never exceed
    the truth up to rounding).
    """

    def __init__(self, n: int, window: int, values: np.ndarray, lost_mass: float):
        self.n = n
        self.window = window
        self.values = values
        self.lost_mass = lost_mass

    def __call__(self, x: int) -> float:
        x = int(x)
        if abs(x) > self.window:
            raise OutOfRangeError(f"|x| = {abs(x)} is outside the window {self.window}")
        return float(self.values[x + self.window])

    def estimate(self, x: int) -> Estimate:
        return Estimate(self(x), self.lost_mass)

    def total(self) -> float:
        return math.fsum(self.values)

    def __repr__(self):
        return f"LatticePmf1D(n={self.n}, window={self.window}, lost_mass={self.lost_mass:.3g})"


def auto_window(n: int, tol: float = DEFAULT_MASS_TOL) -> int:
    """Power-of-two window with ``n P(|X| > W) <= tol / 2``.

    Heavy tails leak mass polynomially, so the window grows like
    ``sqrt(n c1 / tol)``; never below 2^14.
    """
    need = math.sqrt(2.0 * n * C1 / tol) + 1.0
    return max(2**14, 1 << math.ceil(math.log2(need)))


def _step_pmf(window: int) -> tuple[np.ndarray, float]:
    x = np.arange(-window, window + 1)
    law = default_law()
    return pmf1d(x), law.tail_mass(window + 1)


def _convolve(a: np.ndarray, la: float, b: np.ndarray, lb: float, window: int):
    full = fftconvolve(a, b)
    np.maximum(full, 0.0, out=full)
    centre = full.shape[0] // 2
    kept = full[centre - window : centre + window + 1].copy()
    cropped = math.fsum(full[: centre - window]) + math.fsum(full[centre + window + 1 :])
    return kept, la + lb - la * lb + cropped


@lru_cache(maxsize=4)
def _dyadic_powers(window: int, levels: int) -> tuple:
    base, lost = _step_pmf(window)
    powers = [(base, lost)]
    for _ in range(1, levels):
        a, la = powers[-1]
        powers.append(_convolve(a, la, a, la, window))
    return tuple(powers)


def convolve_power(
    n: int,
    window: int | None = None,
    tol: float | None = DEFAULT_MASS_TOL,
    law: StepLaw1D | None = None,
) -> LatticePmf1D:
    """Law of Q_n on [-W, W] by binary exponentiation of the step pmf.

    Each product is a linear (non-circular) FFT convolution cropped back
    to the window. Raises :class:`ToleranceError` when the accumulated
    lost mass exceeds ``tol``.
    """
    n = _check_n(n)
    if n < 1:
        raise OutOfRangeError("n must be >= 1")
    if law is not None and law.c1 != C1:
        raise ValueError("only the standard step law is supported")
    window = int(window) if window is not None else auto_window(n, tol or DEFAULT_MASS_TOL)
    if window < 1:
        raise OutOfRangeError("window must be >= 1")
    if 2 * window + 1 > 2**27:
        raise OutOfRangeError(f"window {window} too large for the convolution engine")
    powers = _dyadic_powers(window, n.bit_length())
    acc, lost = None, 0.0
    for level in range(n.bit_length()):
        if n >> level & 1:
            p, lp = powers[level]
            if acc is None:
                acc, lost = p.copy(), lp
            else:
                acc, lost = _convolve(acc, lost, p, lp, window)
    if tol is not None and lost > tol:
        raise ToleranceError(
            f"window {window} loses mass {lost:.3g} > {tol:.3g} at n = {n}", achieved=lost
        )
    return LatticePmf1D(n, window, acc, lost)


# ------------------------------------------------------ phi^n on a grid


def _phi_log_sign(t: np.ndarray):
    """log|phi(t)| and sign(phi(t)), accurate as t -> 0."""
    g = one_minus_char_fn(t)
    phi = 1.0 - g
    small = g < 0.5
    log_abs = np.empty_like(g)
    log_abs[small] = np.log1p(-g[small])
    with np.errstate(divide="ignore"):
        log_abs[~small] = np.log(np.abs(phi[~small]))
    return log_abs, np.where(phi < 0, -1.0, 1.0)


def _phi_power(t: np.ndarray, n: int) -> np.ndarray:
    log_abs, sign = _phi_log_sign(t)
    with np.errstate(under="ignore"):
        mag = np.exp(n * log_abs)
    return mag if n % 2 == 0 else mag * sign


def _initial_edges(scale: float, x: int) -> np.ndarray:
    """Dyadic panels refined towards 0 around ``scale``, split for cos(xt)."""
    lo = min(scale * 2.0**-30, math.pi * 2.0**-44)
    edges = [0.0]
    e = lo
    while e < math.pi:
        edges.append(e)
        e *= 2.0
    edges.append(math.pi)
    edges = np.array(edges)
    if x == 0:
        return edges
    max_width = math.pi / (4.0 * abs(x))
    out = [edges[0]]
    for a, b in zip(edges[:-1], edges[1:]):
        pieces = max(1, math.ceil((b - a) / max_width))
        out.extend(np.linspace(a, b, pieces + 1)[1:])
    return np.array(out)


def cf_quadrature_pmf(n: int, x: int, tol: float = QUAD_TOL, max_rounds: int = 60) -> Estimate:
    """P(Q_n = x) = (1/pi) int_0^pi cos(xt) phi(t)^n dt, adaptively.

    Panels are Gauss-Legendre 20 with a Gauss-Legendre 10 error
    estimate; a panel is accepted when its error is below its share of
    ``tol`` (proportional to width), otherwise bisected.
    """
    n = _check_n(n)
    if n < 1:
        raise OutOfRangeError("n must be >= 1")
    x = int(x)
    scale = 1.0 / math.sqrt(n * max(math.log(n), 1.0))
    edges = _initial_edges(scale, x)
    lo, hi = edges[:-1], edges[1:]
    x20, w20 = _numerics.gauss_legendre(20)
    x10, w10 = _numerics.gauss_legendre(10)
    total, err_total = [], []
    floor = tol * 1e-3
    for _ in range(max_rounds):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        t20 = mid[:, None] + half[:, None] * x20[None, :]
        t10 = mid[:, None] + half[:, None] * x10[None, :]
        f20 = np.cos(x * t20) * _phi_power(t20, n)
        f10 = np.cos(x * t10) * _phi_power(t10, n)
        i20 = half * (f20 @ w20)
        i10 = half * (f10 @ w10)
        err = np.abs(i20 - i10)
        ok = err <= np.maximum(tol * (hi - lo), floor)
        total.append(i20[ok])
        err_total.append(err[ok])
        if ok.all():
            value = math.fsum(np.concatenate(total)) / math.pi
            error = math.fsum(np.concatenate(err_total)) / math.pi
            return Estimate(value, error)
        bad_lo, bad_hi = lo[~ok], hi[~ok]
        centre = 0.5 * (bad_lo + bad_hi)
        lo = np.concatenate([bad_lo, centre])
        hi = np.concatenate([centre, bad_hi])
        if lo.size > 200_000:
            break
    achieved = (math.fsum(np.concatenate(err_total)) + float(np.sum(np.abs(hi - lo)))) / math.pi
    raise ToleranceError(
        f"quadrature for P(Q_{n} = {x}) did not reach {tol:.1e}", achieved=achieved
    )


@njit(cache=True)
def _grid_sequence(weights, log_abs, sign, k_start, k_stop, out):
    # out[k - k_start] += sum_i weights[i] * (sign_i exp(log_abs_i))^k;
    # the power is refreshed from exp() every 512 steps to bound drift
    block = 512
    cutoff = -60.0
    for i in range(weights.shape[0]):
        la = log_abs[i]
        if la == 0.0:
            for k in range(k_start, k_stop):
                out[k - k_start] += weights[i]
            continue
        base = sign[i] * math.exp(la)
        k = k_start
        while k < k_stop:
            if k * la < cutoff:
                break
            val = math.exp(k * la)
            if sign[i] < 0 and k % 2 == 1:
                val = -val
            val *= weights[i]
            stop = min(k + block, k_stop)
            for j in range(k, stop):
                out[j - k_start] += val
                val *= base
            k = stop


def _grid(x: int, order: int):
    edges = _initial_edges(1e-6, x)
    nodes, weights = _numerics.panel_nodes(edges, order)
    weights = weights * np.cos(x * nodes) / math.pi
    log_abs, sign = _phi_log_sign(nodes)
    order_idx = np.argsort(log_abs)  # fast-dying nodes first
    return weights[order_idx], log_abs[order_idx], sign[order_idx]


def pmf_sequence_1d(x: int, n_max: int, k_start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``P(Q_k = x)`` for ``k_start <= k <= n_max``, with error estimates.

    One composite Gauss-Legendre grid serves every k. Values come from
    24-point panels, errors from the difference against 16-point panels.
    ``P(Q_0 = x)`` is the indicator of ``x = 0``.
    """
    x = int(x)
    n_max = _check_n(n_max)
    if n_max > 2**26:
        raise OutOfRangeError(f"sequence length {n_max} above 2^26; use cf_quadrature_pmf")
    k_start = int(k_start)
    length = n_max - k_start + 1
    hi = np.zeros(length)
    lo = np.zeros(length)
    _grid_sequence(*_grid(x, 24), k_start, n_max + 1, hi)
    _grid_sequence(*_grid(x, 16), k_start, n_max + 1, lo)
    err = np.abs(hi - lo) + 1e-16
    if k_start == 0:
        hi[0] = 1.0 if x == 0 else 0.0
        err[0] = 0.0
    np.maximum(hi, 0.0, out=hi)
    return hi, err


def u1(n: int) -> Estimate:
    """P(Q_n = 0) with an error bound."""
    n = _check_n(n)
    if n == 0:
        return Estimate(1.0, 0.0)
    if n == 1:
        return Estimate(0.0, 0.0)
    return cf_quadrature_pmf(n, 0)


def u1_sequence(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """``u1(k)`` for ``0 <= k <= n_max`` and per-entry error estimates."""
    vals, errs = pmf_sequence_1d(0, n_max)
    vals[1] = 0.0
    errs[1] = 0.0
    return vals, errs


# ------------------------------------------------------ planar mixture

_BINOM_HALF_WIDTH = 5.0


@njit(cache=True)
def _mixture(seq_a, seq_b, i_start, i_stop, out):
    # out[i - i_start] = sum_k C(i,k) 2^-i seq_a[k] seq_b[i-k]; binomial
    # weights beyond i/2 +- (5 sqrt(i) + 10) carry mass below 1e-21
    log2 = math.log(2.0)
    for i in range(i_start, i_stop):
        if i == 0:
            out[0] = seq_a[0] * seq_b[0]
            continue
        m = i // 2
        h = int(_BINOM_HALF_WIDTH * math.sqrt(i)) + 10
        lo = max(0, m - h)
        hi = min(i, m + h)
        wm = math.exp(
            math.lgamma(i + 1.0) - math.lgamma(m + 1.0) - math.lgamma(i - m + 1.0) - i * log2
        )
        total = wm * seq_a[m] * seq_b[i - m]
        w = wm
        for k in range(m + 1, hi + 1):
            w *= (i - k + 1.0) / k
            total += w * seq_a[k] * seq_b[i - k]
        w = wm
        for k in range(m - 1, lo - 1, -1):
            w *= (k + 1.0) / (i - k)
            total += w * seq_a[k] * seq_b[i - k]
        out[i - i_start] = total


def mixture_sequence(a: int, b: int, n_max: int, n_min: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``P(S_i = (a, b))`` for ``n_min <= i <= n_max`` and error bounds.

    Built from the 1-D sequences of the two coordinates; each step moves
    horizontally with probability 1/2, independently of its length.
    """
    n_max = _check_n(n_max)
    n_min = max(0, int(n_min))
    k_lo = 0
    if n_min > 0:
        k_lo = max(0, n_min // 2 - int(_BINOM_HALF_WIDTH * math.sqrt(n_min)) - 12)
    seq_a, err_a = _padded_sequence(a, n_max, k_lo)
    if abs(a) == abs(b):
        seq_b, err_b = seq_a, err_a
    else:
        seq_b, err_b = _padded_sequence(b, n_max, k_lo)
    out = np.zeros(n_max - n_min + 1)
    _mixture(seq_a, seq_b, n_min, n_max + 1, out)
    err = np.full_like(out, float(np.max(err_a) + np.max(err_b)) + 1e-21)
    return out, err


def _padded_sequence(x: int, n_max: int, k_lo: int):
    vals, errs = pmf_sequence_1d(abs(x), n_max, k_start=k_lo)
    if k_lo:
        vals = np.concatenate([np.zeros(k_lo), vals])
        errs = np.concatenate([np.zeros(k_lo), errs])
    if x == 0 and n_max >= 1:
        vals[1] = 0.0
        errs[1] = 0.0
    return vals, errs


def u2_sequence(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """``u2(k) = P(S_k = 0)`` for ``0 <= k <= n_max`` with error bounds."""
    return mixture_sequence(0, 0, n_max)


def pmf_sn_point(n: int, p) -> Estimate:
    """P(S_n = p) via the binomial direction mixture."""
    n = _check_n(n)
    if n > 2**26:
        raise OutOfRangeError(f"n = {n} above the planar engine limit 2^26")
    a, b = (int(c) for c in p)
    vals, errs = mixture_sequence(a, b, n, n_min=n)
    return Estimate(float(vals[-1]), float(errs[-1]))


def u2(n: int) -> Estimate:
    return pmf_sn_point(n, (0, 0))


def direct_2d_origin(n_max: int, window: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """``P(S_n = 0)`` for ``n <= n_max`` by evolving the planar law.

    The law lives on ``[-W, W]^2``; each step convolves half the mass
    along each axis with the 1-D step pmf. Returns the probabilities and
    the cumulative lost mass (a bound on every entry's error).
    """
    w = int(window)
    kernel, _ = _step_pmf(w)
    grid = np.zeros((2 * w + 1, 2 * w + 1))
    grid[w, w] = 1.0
    origin = np.zeros(n_max + 1)
    lost = np.zeros(n_max + 1)
    origin[0] = 1.0
    lost_mass = 0.0
    for n in range(1, n_max + 1):
        horiz = fftconvolve(grid, kernel[:, None], axes=0)
        vert = fftconvolve(grid, kernel[None, :], axes=1)
        kept_h = horiz[w : 3 * w + 1, :]
        kept_v = vert[:, w : 3 * w + 1]
        new = 0.5 * (kept_h + kept_v)
        np.maximum(new, 0.0, out=new)
        lost_mass = max(0.0, 1.0 - math.fsum(new.ravel()))
        grid = new
        origin[n] = grid[w, w]
        lost[n] = lost_mass
    return origin, lost


# ------------------------------------------- local limit comparisons

NOMINAL_KAPPA = 2.0 * C1


def llt_gaussian_1d(n: float, x: float, kappa: float = NOMINAL_KAPPA) -> float:
    """Gaussian density with variance ``kappa n log n`` at x.

    The default ``kappa = 2 c1`` gives
    ``exp(-x^2 / (4 c1 n log n)) / (2 sqrt(pi c1 n log n))``.
    """
    v = kappa * n * math.log(n)
    return math.exp(-x * x / (2.0 * v)) / math.sqrt(2.0 * math.pi * v)


def llt_gaussian_2d(n: float, p, kappa: float = NOMINAL_KAPPA) -> float:
    """Isotropic planar Gaussian, per-coordinate variance ``kappa n log n``.

    The default gives ``exp(-|p|^2 / (4 c1 n log n)) / (4 pi c1 n log n)``.
    """
    a, b = p
    v = kappa * n * math.log(n)
    return math.exp(-(a * a + b * b) / (2.0 * v)) / (2.0 * math.pi * v)


def residual_scale(dim: int, n: float) -> float:
    """Factor turning an LLT residual into its normalized size."""
    log_n = math.log(n)
    if dim == 1:
        return math.sqrt(n * log_n**3) / math.log(log_n)
    return n * log_n**2 / math.log(log_n)


class LltRow(NamedTuple):
    dim: int
    n: int
    x: tuple
    actual: float
    error: float
    predicted: float
    residual: float
    scaled: float


def llt_error_profile(dim: int, n_list, x_list, kappa: float = NOMINAL_KAPPA) -> list[LltRow]:
    """Residuals ``actual - Gaussian`` and their normalized sizes.

    ``x_list`` holds integers in 1-D and pairs in 2-D. 1-D values use
    adaptive quadrature; 2-D values use the binomial mixture.
    """
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")
    rows = []
    for n in n_list:
        n = int(n)
        if n < 3:
            raise OutOfRangeError("LLT comparisons need n >= 3")
        for x in x_list:
            if dim == 1:
                est = cf_quadrature_pmf(n, int(x))
                pred = llt_gaussian_1d(n, int(x), kappa)
                key = (int(x),)
            else:
                est = pmf_sn_point(n, x)
                pred = llt_gaussian_2d(n, x, kappa)
                key = tuple(int(c) for c in x)
            r = est.value - pred
            rows.append(LltRow(dim, n, key, est.value, est.error, pred, r, r * residual_scale(dim, n)))
    return rows


def local_time_moments(dim: int, n: int) -> tuple[float, float]:
    """Exact ``E[N]`` and ``E[N^2]`` for the origin local time up to n.

    ``E[N] = sum_k u(k)`` and
    ``E[N^2] = E[N] + 2 sum_{1 <= i < k <= n} u(i) u(k - i)`` by the
    Markov property at the earlier visit.
    """
    n = int(n)
    if n < 1:
        raise OutOfRangeError("n must be >= 1")
    if dim == 1:
        u, _ = u1_sequence(n)
    elif dim == 2:
        u, _ = u2_sequence(n)
    else:
        raise ValueError("dim must be 1 or 2")
    tail = u[1:]
    m1 = math.fsum(tail)
    pairs = fftconvolve(tail, tail)[: n - 1] if n > 1 else np.zeros(0)
    return m1, m1 + 2.0 * math.fsum(pairs)
