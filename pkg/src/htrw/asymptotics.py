"""Limit constants, limit laws and trend statistics.

Two sets of constants are provided. :meth:`PredictionSet.nominal` is
built on the small-angle form ``1 - phi(t) ~ 2 c1 t^2 |log t|``.
:meth:`PredictionSet.corrected` uses the exact expansion
``1 - phi(t) = c1 t^2 (|log t| + 3/2) + O(t^4)`` (see
:func:`htrw.step_law.one_minus_char_fn`), which halves the dispersion.
The nominal set is the default everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .step_law import C1


@dataclass(frozen=True)
class PredictionSet:
    """Limit constants of the walk, all derived from ``c1``.

    Attributes
    ----------
    kappa, kappa2 : float
        Dispersion: ``Var ~ kappa n log n`` for the 1-D walk and per
        coordinate of the planar walk.
    llt1_const, llt2_const : float
        Limits of ``u1(n) sqrt(n log n)`` and ``u2(n) n log n``.
    one_d_tail_const : float
        Limit of ``P(tau1 > n) sqrt(n / log n)``.
    two_d_tail_const : float
        Limit of ``P(tau2 > n) log log n``.
    exp_mean : float
        Mean of the exponential limit of ``N2^n / log log n``.
    ml_params : tuple
        ``(alpha, scale)``: ``E[(N1^n sqrt(log n / n))^k]`` tends to
        ``k! scale^k / Gamma(alpha k + 1)``.
    """

    label: str
    c1: float
    kappa: float
    kappa2: float
    llt1_const: float
    llt2_const: float
    one_d_tail_const: float
    two_d_tail_const: float
    exp_mean: float
    ml_params: tuple
    notes: Mapping[str, str] = field(default_factory=dict, compare=False)

    @property
    def four_pi_c1(self) -> float:
        return 4.0 * math.pi * self.c1

    @classmethod
    def nominal(cls, c1: float = C1) -> "PredictionSet":
        return cls(
            label="nominal",
            c1=c1,
            kappa=2.0 * c1,
            kappa2=2.0 * c1,
            llt1_const=1.0 / (2.0 * math.sqrt(math.pi * c1)),
            llt2_const=1.0 / (4.0 * math.pi * c1),
            one_d_tail_const=2.0 * math.sqrt(c1 / math.pi),
            two_d_tail_const=4.0 * math.pi * c1,
            exp_mean=1.0 / (4.0 * math.pi * c1),
            ml_params=(0.5, 1.0 / (2.0 * math.sqrt(c1))),
            notes={
                "kappa": "2 c1, from 1 - phi(t) ~ 2 c1 t^2 |log t|",
                "kappa2": "2 c1",
                "llt1_const": "1 / (2 sqrt(pi c1))",
                "llt2_const": "1 / (4 pi c1)",
                "one_d_tail_const": "2 sqrt(c1 / pi)",
                "two_d_tail_const": "4 pi c1",
                "exp_mean": "1 / (4 pi c1)",
                "ml_params": "(1/2, 1 / (2 sqrt(c1)))",
            },
        )

    @classmethod
    def corrected(cls, c1: float = C1) -> "PredictionSet":
        a1 = 1.0 / math.sqrt(2.0 * math.pi * c1)
        return cls(
            label="corrected",
            c1=c1,
            kappa=c1,
            kappa2=0.5 * c1,
            llt1_const=a1,
            llt2_const=1.0 / (math.pi * c1),
            one_d_tail_const=math.sqrt(2.0 * c1 / math.pi),
            two_d_tail_const=math.pi * c1,
            exp_mean=1.0 / (math.pi * c1),
            ml_params=(0.5, 1.0 / math.sqrt(2.0 * c1)),
            notes={
                "kappa": "c1, from 1 - phi(t) = c1 t^2 (|log t| + 3/2) + O(t^4)",
                "kappa2": "c1 / 2: each axis moves half of the time",
                "llt1_const": "1 / sqrt(2 pi kappa)",
                "llt2_const": "1 / (2 pi kappa2)",
                "one_d_tail_const": "1 / (pi llt1_const) by the Tauberian theorem",
                "two_d_tail_const": "1 / llt2_const, since sum u2 ~ log log n / (pi c1)",
                "exp_mean": "llt2_const",
                "ml_params": "(1/2, sqrt(pi) llt1_const)",
            },
        )

    def formula_residuals(self) -> dict:
        """Recompute each constant from ``c1`` by its generic relation.

        Both sets satisfy ``one_d_tail = 1/(pi llt1)``, ``exp_mean = llt2``,
        ``two_d_tail = 1/llt2``, ``scale = sqrt(pi) llt1`` and
        ``llt1 = 1/sqrt(2 pi kappa)``; the corrected set also has
        ``llt2 = 1/(2 pi kappa2)``. The returned dict holds the absolute
        deviations.
        """
        out = {
            "llt1_const": abs(self.llt1_const - 1.0 / math.sqrt(2.0 * math.pi * self.kappa)),
            "one_d_tail_const": abs(self.one_d_tail_const - 1.0 / (math.pi * self.llt1_const)),
            "two_d_tail_const": abs(self.two_d_tail_const - 1.0 / self.llt2_const),
            "exp_mean": abs(self.exp_mean - self.llt2_const),
            "ml_scale": abs(self.ml_params[1] - math.sqrt(math.pi) * self.llt1_const),
        }
        if self.label == "corrected":
            out["llt2_const"] = abs(self.llt2_const - 1.0 / (2.0 * math.pi * self.kappa2))
        return out


NOMINAL = PredictionSet.nominal()
CORRECTED = PredictionSet.corrected()


def ml_moment(k: int, preds: PredictionSet = NOMINAL) -> float:
    """k-th moment of the Mittag-Leffler limit, ``k! scale^k / Gamma(k/2 + 1)``."""
    k = int(k)
    if k < 0:
        raise ValueError("k must be >= 0")
    alpha, scale = preds.ml_params
    return math.factorial(k) * scale**k / math.gamma(alpha * k + 1.0)


def exp_limit_cdf(y, mean: float = NOMINAL.exp_mean):
    """CDF of the exponential law with the given mean."""
    y = np.asarray(y, dtype=float)
    out = np.where(y >= 0.0, -np.expm1(-np.maximum(y, 0.0) / mean), 0.0)
    return float(out) if out.ndim == 0 else out


def inv_uniform_cdf(y):
    """``P(1/U <= y) = 1 - 1/y`` for ``y >= 1``, U uniform on [0, 1]."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(y >= 1.0, 1.0 - 1.0 / np.maximum(y, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def tail_prediction(dim: int, n: float, preds: PredictionSet = NOMINAL) -> float:
    """Asymptotic ``P(tau > n)``.

    1-D: ``one_d_tail_const sqrt(log n / n)`` for ``n >= 3``.
    2-D: ``two_d_tail_const / log log n`` for ``n > e``.
    """
    if dim == 1:
        if n < 3:
            raise ValueError("1-D tail prediction needs n >= 3")
        return preds.one_d_tail_const * math.sqrt(math.log(n) / n)
    if dim == 2:
        if n <= math.e:
            raise ValueError("2-D tail prediction needs n > e")
        return preds.two_d_tail_const / math.log(math.log(n))
    raise ValueError("dim must be 1 or 2")


def hitting_prediction(v_norm: float, n: float) -> float:
    """Limit form of ``P(t_v <= n) = P(1/U <= log log n / log log |v|)``."""
    return float(inv_uniform_cdf(math.log(math.log(n)) / math.log(math.log(v_norm))))


def kolmogorov_distance(samples, cdf) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    return float(stats.kstest(np.asarray(samples, dtype=float), cdf).statistic)


# ------------------------------------------------------------- fitting


@dataclass(frozen=True)
class SlopeFit:
    """OLS of ``log|value|`` on ``log n``.

    ``refused`` is set when the series has zeros or changes sign; the
    slope fields are then NaN and ``sign_changes`` counts the flips.
    """

    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float
    points: int
    sign_changes: int = 0
    refused: bool = False


def _sign_changes(values: np.ndarray) -> int:
    s = np.sign(values)
    return int(np.count_nonzero(s[1:] != s[:-1]))


def fit_power_slope(n, values, level: float = 0.95) -> SlopeFit:
    """Fit ``|value| ~ A n^slope`` by least squares with a t-interval."""
    n = np.asarray(n, dtype=float)
    v = np.asarray(values, dtype=float)
    if n.shape != v.shape or n.size < 2:
        raise ValueError("need matching sequences of at least two points")
    if np.any(v == 0.0) or (np.any(v > 0) and np.any(v < 0)):
        nan = float("nan")
        return SlopeFit(nan, nan, nan, nan, nan, int(n.size), _sign_changes(v), True)
    x, y = np.log(n), np.log(np.abs(v))
    res = stats.linregress(x, y)
    dof = n.size - 2
    if dof > 0:
        half = stats.t.ppf(0.5 + 0.5 * level, dof) * res.stderr
    else:
        half = 0.0
    return SlopeFit(float(res.slope), float(res.intercept), float(res.stderr),
                    float(res.slope - half), float(res.slope + half), int(n.size))


# -------------------------------------------------------------- trends


def _strict(values: np.ndarray) -> str | None:
    d = np.diff(values)
    if d.size and np.all(d < 0):
        return "decreasing"
    if d.size and np.all(d > 0):
        return "increasing"
    return None


@dataclass(frozen=True)
class TrendReport:
    """Ratios of observed to predicted values along a grid.

    ``verdict`` describes ``|ratio - 1|``: ``"improving"`` when it is
    strictly decreasing or Kendall's tau against the grid is negative at
    the 5% level (one-sided), ``"worsening"`` symmetrically, otherwise
    ``"indeterminate"``. ``approach`` is ``"rising"`` when every ratio
    is below 1 and strictly increasing, ``"falling"`` when every ratio
    is above 1 and strictly decreasing, otherwise None.
    """

    grid: np.ndarray
    observed: np.ndarray
    predicted: np.ndarray
    ratios: np.ndarray
    deviation: np.ndarray
    kendall_tau: float
    p_decreasing: float
    p_increasing: float
    deviation_trend: str | None
    ratio_trend: str | None
    verdict: str
    approach: str | None
    in_band: np.ndarray | None
    slope: SlopeFit | None

    def table(self) -> list[dict]:
        rows = []
        for j in range(self.grid.size):
            row = {"n": float(self.grid[j]), "observed": float(self.observed[j]),
                   "predicted": float(self.predicted[j]), "ratio": float(self.ratios[j])}
            if self.in_band is not None:
                row["in_band"] = bool(self.in_band[j])
            rows.append(row)
        return rows


def kendall_trend(x, y) -> tuple[float, float, float]:
    """Kendall's tau of y against x with one-sided p-values (down, up)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return 0.0, 1.0, 1.0
    down = stats.kendalltau(x, y, alternative="less")
    up = stats.kendalltau(x, y, alternative="greater")
    tau = float(down.statistic) if np.isfinite(down.statistic) else 0.0
    return tau, float(down.pvalue), float(up.pvalue)


def trend_report(grid, observed, predicted, band: tuple | None = None,
                 alpha: float = 0.05, fit_slope: bool = False) -> TrendReport:
    """Compare ``observed`` with ``predicted`` along ``grid``.

    ``band = (lo, hi)`` flags ratios inside the closed interval.
    ``fit_slope`` adds a power-law fit of the observed values.
    """
    g = np.asarray(grid, dtype=float)
    obs = np.asarray(observed, dtype=float)
    pred = np.asarray(predicted, dtype=float)
    if not (g.shape == obs.shape == pred.shape):
        raise ValueError("grid, observed and predicted must have the same length")
    ratios = obs / pred
    dev = np.abs(ratios - 1.0)
    tau, p_down, p_up = kendall_trend(g, dev)
    dev_trend = _strict(dev)
    if dev_trend == "decreasing" or p_down < alpha:
        verdict = "improving"
    elif dev_trend == "increasing" or p_up < alpha:
        verdict = "worsening"
    else:
        verdict = "indeterminate"
    ratio_trend = _strict(ratios)
    approach = None
    if ratio_trend == "increasing" and np.all(ratios < 1.0):
        approach = "rising"
    elif ratio_trend == "decreasing" and np.all(ratios > 1.0):
        approach = "falling"
    in_band = None
    if band is not None:
        in_band = (ratios >= band[0]) & (ratios <= band[1])
    slope = fit_power_slope(g, obs) if fit_slope else None
    return TrendReport(g, obs, pred, ratios, dev, tau, p_down, p_up, dev_trend,
                       ratio_trend, verdict, approach, in_band, slope)


def no_increasing_trend(grid: Sequence[float], values: Sequence[float], alpha: float = 0.05) -> bool:
    """True unless Kendall's tau shows an increase at level ``alpha``."""
    _, _, p_up = kendall_trend(grid, values)
    return bool(p_up >= alpha)
