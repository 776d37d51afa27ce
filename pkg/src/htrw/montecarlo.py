"""Seeded Monte Carlo for trajectory statistics of the heavy-tailed walk.

Every replica draws from its own stream derived from ``(seed, replica)``
and writes only its own output row, so aggregates are bitwise identical
for any thread count. Counts are integers; floating-point aggregates are
reduced in replica order after the parallel section.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import numba
from numba import int64, njit, prange, uint64

from .rng import derive_states, next_u64
from .step_law import C1, default_law, draw_length, one_threshold

CENSORED = -1
_POS_LIMIT = 2**62

STATISTICS = ("origin", "return", "hitting", "avoid", "flight")


def set_threads(threads: int | None) -> int:
    """Apply ``threads`` (or $HTRW_THREADS, or all cores) to numba."""
    if threads is None:
        env = os.environ.get("HTRW_THREADS")
        threads = int(env) if env else numba.config.NUMBA_NUM_THREADS
    threads = max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(threads)
    return threads


@dataclass(frozen=True)
class RunConfig:
    """One Monte Carlo experiment.

    ``site`` is the start for ``hitting`` and the watched site otherwise
    (the origin for ``origin``/``return``/``flight``). ``n_steps`` is the
    horizon, which also censors first-visit times.
    """

    seed: int
    replicas: int
    n_steps: int
    statistic: str = "origin"
    dim: int = 2
    site: tuple = (0, 0)
    checkpoints: tuple | None = None

    def __post_init__(self):
        if self.replicas < 1 or self.n_steps < 1:
            raise ValueError("replicas and n_steps must be >= 1")
        if self.statistic not in STATISTICS:
            raise ValueError(f"statistic must be one of {STATISTICS}")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.statistic == "flight" and self.dim != 2:
            raise ValueError("flights over the origin are a planar statistic")
        if self.statistic == "avoid" and not any(self.site):
            raise ValueError("the avoided site must differ from the origin")

    def checkpoint_array(self) -> np.ndarray:
        if self.checkpoints is None:
            pts = [2**j for j in range(int(math.log2(self.n_steps)) + 1)]
            pts.append(self.n_steps)
        else:
            pts = [int(c) for c in self.checkpoints]
            if min(pts) < 1 or max(pts) > self.n_steps:
                raise ValueError("checkpoints must lie in [1, n_steps]")
        return np.unique(np.array(pts, dtype=np.int64))


@dataclass
class TrajectoryStats:
    """Per-replica records; rows are replicas, columns checkpoints.

    ``first_visit`` is the first time ``k >= 1`` the walk stands on the
    watched site (``CENSORED`` if never within the horizon). For the
    ``hitting`` statistic it is the hitting time of the origin.
    ``visits[:, c]`` counts visits up to checkpoint c (the local time),
    ``at_site[:, c]`` flags presence at that time. Flight columns are
    present only for the ``flight`` statistic: ``flights`` counts steps
    that fly over the origin, ``flight_mean`` sums the conditional
    probabilities of doing so, ``flight_prob`` is that conditional
    probability for the step after the checkpoint.
    """

    checkpoints: np.ndarray
    first_visit: np.ndarray
    visits: np.ndarray
    at_site: np.ndarray
    overflow: np.ndarray
    flights: np.ndarray | None = None
    flight_mean: np.ndarray | None = None
    flight_prob: np.ndarray | None = None

    @property
    def local_time(self) -> np.ndarray:
        """Visits to the watched site over the whole horizon."""
        return self.visits[:, -1]

    @property
    def first_return(self) -> np.ndarray:
        return self.first_visit

    @property
    def hitting_time(self) -> np.ndarray:
        return self.first_visit

    @property
    def flight_count(self) -> np.ndarray | None:
        return None if self.flights is None else self.flights[:, -1]


@dataclass
class RunResult:
    config: RunConfig
    stats: TrajectoryStats
    summary: dict = field(default_factory=dict)


@njit(inline="always")
def _survival(m, survival, r_table, c1):
    if m <= r_table + 1:
        return survival[m]
    a = float(m)
    return 2.0 * c1 * (0.5 / (a * a) + 0.5 / (a * a * a) + 0.25 / (a * a * a * a))


@njit(parallel=True, cache=True)
def _walk_kernel(
    states, dim, start_x, start_y, site_x, site_y, n_steps, checkpoints,
    stop_at_first, track_flights, survival, r_table, c1, thr,
    first_visit, visits, at_site, overflow, flights, flight_mean, flight_prob,
):
    replicas = states.shape[0]
    n_ck = checkpoints.shape[0]
    for r in prange(replicas):
        s = states[r]
        x = int64(start_x)
        y = int64(start_y)
        count = int64(0)
        first = int64(-1)
        n_flight = int64(0)
        mean_acc = 0.0
        ci = 0
        for k in range(1, n_steps + 1):
            length, w = draw_length(s, survival, r_table, c1, thr)
            sgn = int64(1) - int64(2) * int64(w & uint64(1))
            horizontal = dim == 1 or (w & uint64(2)) != 0
            if track_flights:
                # conditional probability that this step flies over 0
                if y == 0 and x != 0:
                    mean_acc += 0.25 * _survival(abs(x), survival, r_table, c1)
                    if horizontal and sgn * x < 0 and length >= abs(x):
                        n_flight += 1
                elif x == 0 and y != 0:
                    mean_acc += 0.25 * _survival(abs(y), survival, r_table, c1)
                    if (not horizontal) and sgn * y < 0 and length >= abs(y):
                        n_flight += 1
            if horizontal:
                x += sgn * length
            else:
                y += sgn * length
            if length > r_table and (abs(x) > _POS_LIMIT or abs(y) > _POS_LIMIT):
                overflow[r] = True
                break
            if x == site_x and y == site_y:
                count += 1
                if first < 0:
                    first = k
            while ci < n_ck and checkpoints[ci] == k:
                visits[r, ci] = count
                at_site[r, ci] = x == site_x and y == site_y
                if track_flights:
                    flights[r, ci] = n_flight
                    flight_mean[r, ci] = mean_acc
                    p = 0.0
                    if y == 0 and x != 0:
                        p = 0.25 * _survival(abs(x), survival, r_table, c1)
                    elif x == 0 and y != 0:
                        p = 0.25 * _survival(abs(y), survival, r_table, c1)
                    flight_prob[r, ci] = p
                ci += 1
            if stop_at_first and first > 0:
                break
        # a stopped walk keeps its counts at later checkpoints
        while ci < n_ck:
            visits[r, ci] = count
            ci += 1
        first_visit[r] = first


def _simulate(config: RunConfig, threads: int | None = None) -> TrajectoryStats:
    set_threads(threads)
    law = default_law()
    ck = config.checkpoint_array()
    reps = config.replicas
    site = tuple(int(c) for c in config.site) + (0,) * (2 - len(config.site))
    if config.dim == 1:
        site = (site[0], 0)
    start = (0, 0)
    watched = site
    stop = config.statistic in ("return", "hitting", "avoid")
    if config.statistic == "hitting":
        start, watched = site, (0, 0)
    elif config.statistic in ("origin", "return", "flight"):
        watched = (0, 0)
    track = config.statistic == "flight"
    states = derive_states(config.seed, reps)
    first = np.empty(reps, dtype=np.int64)
    visits = np.zeros((reps, ck.size), dtype=np.int64)
    at_site = np.zeros((reps, ck.size), dtype=np.bool_)
    overflow = np.zeros(reps, dtype=np.bool_)
    fshape = (reps, ck.size) if track else (1, 1)
    flights = np.zeros(fshape, dtype=np.int64)
    fmean = np.zeros(fshape)
    fprob = np.zeros(fshape)
    _walk_kernel(
        states, config.dim, start[0], start[1], watched[0], watched[1], config.n_steps, ck,
        stop, track, law.survival, law.r_table, law.c1, one_threshold(law.survival),
        first, visits, at_site, overflow, flights, fmean, fprob,
    )
    if config.statistic == "hitting" and start == (0, 0):
        first[:] = 0
    stats = TrajectoryStats(ck, first, visits, at_site, overflow)
    if track:
        stats.flights, stats.flight_mean, stats.flight_prob = flights, fmean, fprob
    return stats


def _mean_var(a: np.ndarray) -> tuple[float, float]:
    a = np.asarray(a, dtype=float)
    mean = math.fsum(a) / a.size
    var = math.fsum((a - mean) ** 2) / max(a.size - 1, 1)
    return mean, var


def _summarize(config: RunConfig, stats: TrajectoryStats) -> dict:
    ck = stats.checkpoints
    out: dict = {"replicas": config.replicas, "checkpoints": ck.tolist(),
                 "overflow": int(stats.overflow.sum())}
    censored = stats.first_visit == CENSORED
    out["censored_fraction"] = float(censored.mean())
    hit_times = np.sort(stats.first_visit[~censored])
    out["first_visit_cdf"] = [float(np.searchsorted(hit_times, c, side="right")) / config.replicas
                              for c in ck]
    means, variances = zip(*(_mean_var(stats.visits[:, j]) for j in range(ck.size)))
    out["visits_mean"] = list(means)
    out["visits_var"] = list(variances)
    out["at_site_mean"] = [float(stats.at_site[:, j].mean()) for j in range(ck.size)]
    if stats.flights is not None:
        out["flights_mean"] = [_mean_var(stats.flights[:, j])[0] for j in range(ck.size)]
        fm = [_mean_var(stats.flight_mean[:, j]) for j in range(ck.size)]
        out["theta_hat"] = [m for m, _ in fm]
        out["theta_hat_var"] = [v for _, v in fm]
        fp = [_mean_var(stats.flight_prob[:, j]) for j in range(ck.size)]
        out["a_hat"] = [m for m, _ in fp]
        out["a_hat_var"] = [v for _, v in fp]
    return out


def run(config: RunConfig, threads: int | None = None) -> RunResult:
    """Simulate ``config.replicas`` independent walks and aggregate them."""
    stats = _simulate(config, threads)
    return RunResult(config, stats, _summarize(config, stats))


# ------------------------------------------------------------- operations


def local_time_origin(n: int, dim: int, replicas: int, seed: int,
                      checkpoints=None, threads: int | None = None) -> RunResult:
    """Visits to the origin during steps 1..n (N_1^n or N_2^n).

    ``result.stats.visits[:, -1]`` holds the samples at time n.
    """
    ck = tuple(checkpoints) if checkpoints is not None else None
    if ck is not None and n not in ck:
        ck = ck + (n,)
    return run(RunConfig(seed, replicas, n, "origin", dim, (0, 0), ck), threads)


def return_times(n_max: int, dim: int, replicas: int, seed: int,
                 threads: int | None = None) -> RunResult:
    """First return times to the origin, censored at ``n_max``."""
    return run(RunConfig(seed, replicas, n_max, "return", dim), threads)


@dataclass
class HittingResult:
    v: tuple
    n_max: int
    times: np.ndarray
    censored_fraction: float
    ratio: np.ndarray

    def cdf(self, n: int) -> float:
        """Empirical P(t_v <= n) for n <= n_max."""
        if n > self.n_max:
            raise ValueError("n beyond the censoring horizon")
        hit = self.times[self.times != CENSORED]
        return float(np.count_nonzero(hit <= n)) / self.times.size


def hitting_time(v, n_max: int, replicas: int, seed: int,
                 threads: int | None = None) -> HittingResult:
    """Hitting time of the origin for the walk started at v.

    Censored at ``n_max``. ``ratio`` holds ``log log t_v / log log |v|``
    for uncensored runs with ``t_v >= 3``.
    """
    v = tuple(int(c) for c in v)
    if v == (0, 0):
        times = np.zeros(replicas, dtype=np.int64)
        return HittingResult(v, n_max, times, 0.0, np.array([]))
    res = run(RunConfig(seed, replicas, n_max, "hitting", 2, v, (n_max,)), threads)
    times = res.stats.first_visit
    ok = times >= 3
    norm = math.log(math.log(math.hypot(*v))) if math.hypot(*v) > math.e else float("nan")
    ratio = np.log(np.log(times[ok].astype(float))) / norm
    return HittingResult(v, n_max, times, res.summary["censored_fraction"], ratio)


@dataclass(frozen=True)
class AvoidanceSpec:
    """Site at distance ``round(exp(log(n)^delta / 2))`` on the first axis."""

    delta: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.n < 2:
            raise ValueError("n must be >= 2")

    @property
    def radius(self) -> int:
        return max(1, round(math.exp(0.5 * math.log(self.n) ** self.delta)))

    @property
    def site(self) -> tuple:
        return (self.radius, 0)


@dataclass
class AvoidanceResult:
    site: tuple
    n: int
    estimate: float
    std_error: float


def avoid_site(spec_or_site, n: int | None, replicas: int, seed: int,
               threads: int | None = None) -> AvoidanceResult:
    """Fraction of walks that never visit a site within n steps.

    Accepts an :class:`AvoidanceSpec` (``n`` may be None) or an explicit
    site with ``n``.
    """
    if isinstance(spec_or_site, AvoidanceSpec):
        site, n = spec_or_site.site, spec_or_site.n
    else:
        site = tuple(int(c) for c in spec_or_site)
    res = run(RunConfig(seed, replicas, int(n), "avoid", 2, site, (int(n),)), threads)
    p = res.summary["censored_fraction"]
    return AvoidanceResult(site, int(n), p, math.sqrt(max(p * (1 - p), 1e-300) / replicas))


@dataclass
class FlightResult:
    """Flight-over-origin estimates on a checkpoint grid.

    ``a_hat[j]`` estimates the probability that step ``k_j + 1`` flies
    over the origin; ``theta_hat[j]`` the expected number of flights up
    to ``k_j`` (both as averages of exact conditional probabilities);
    ``rho_mean[j]`` is the raw average flight count.
    """

    grid: np.ndarray
    a_hat: np.ndarray
    a_se: np.ndarray
    theta_hat: np.ndarray
    theta_se: np.ndarray
    rho_mean: np.ndarray
    replicas: int


def flight_result(res: RunResult) -> FlightResult:
    s = res.summary
    reps = res.config.replicas
    return FlightResult(
        res.stats.checkpoints,
        np.array(s["a_hat"]),
        np.sqrt(np.array(s["a_hat_var"]) / reps),
        np.array(s["theta_hat"]),
        np.sqrt(np.array(s["theta_hat_var"]) / reps),
        np.array(s["flights_mean"]),
        reps,
    )


def flight_stats(n: int, replicas: int, seed: int, checkpoints=None,
                 threads: int | None = None) -> FlightResult:
    """Flights over the origin of the planar walk up to time n."""
    ck = tuple(checkpoints) if checkpoints is not None else None
    return flight_result(run(RunConfig(seed, replicas, n, "flight", 2, (0, 0), ck), threads))


# ------------------------------------------ perturbed simple random walk


def vacf_exact(d: int, n_max: int) -> np.ndarray:
    """``C(n) = P(T_n = e1) - P(T_n = -e1)`` for ``n <= n_max``.

    T is the simple random walk on Z^d started at e1, except that a walk
    entering the origin leaves it in the direction it arrived with. The
    dynamic program keeps ordinary mass away from the origin and, at the
    origin, mass split by arrival direction.
    """
    if d == 1:
        return _vacf_dp_1d(n_max)
    if d == 2:
        if n_max > 2048:
            raise ValueError("planar dynamic program limited to n_max <= 2048")
        return _vacf_dp_2d(n_max)
    raise ValueError("d must be 1 or 2")


def _vacf_dp_1d(n_max: int) -> np.ndarray:
    L = n_max + 2
    p = np.zeros(2 * L + 1)
    o = L
    p[o + 1] = 1.0
    from_left = from_right = 0.0  # origin mass by arrival direction
    out = np.empty(n_max + 1)
    out[0] = 1.0
    for n in range(1, n_max + 1):
        new = np.zeros_like(p)
        new[1:] += 0.5 * p[:-1]
        new[:-1] += 0.5 * p[1:]
        arrive_left, arrive_right = 0.5 * p[o - 1], 0.5 * p[o + 1]
        new[o] = 0.0
        new[o + 1] += from_left
        new[o - 1] += from_right
        from_left, from_right = arrive_left, arrive_right
        p = new
        out[n] = p[o + 1] - p[o - 1]
    return out


def _vacf_dp_2d(n_max: int) -> np.ndarray:
    L = n_max + 2
    size = 2 * L + 1
    p = np.zeros((size, size))
    o = L
    p[o + 1, o] = 1.0
    # origin mass keyed by the direction of travel on arrival: +x, -x, +y, -y
    held = np.zeros(4)
    out = np.empty(n_max + 1)
    out[0] = 1.0
    for n in range(1, n_max + 1):
        new = np.zeros_like(p)
        new[1:, :] += 0.25 * p[:-1, :]
        new[:-1, :] += 0.25 * p[1:, :]
        new[:, 1:] += 0.25 * p[:, :-1]
        new[:, :-1] += 0.25 * p[:, 1:]
        arriving = np.array([0.25 * p[o - 1, o], 0.25 * p[o + 1, o],
                             0.25 * p[o, o - 1], 0.25 * p[o, o + 1]])
        new[o, o] = 0.0
        new[o + 1, o] += held[0]
        new[o - 1, o] += held[1]
        new[o, o + 1] += held[2]
        new[o, o - 1] += held[3]
        held = arriving
        p = new
        out[n] = p[o + 1, o] - p[o - 1, o]
    return out


_VACF_BLOCK = 256


@njit(parallel=True, cache=True)
def _vacf_kernel(states, d, n_max, sums):
    replicas = states.shape[0]
    n_blocks = sums.shape[0]
    for b in prange(n_blocks):
        lo = b * _VACF_BLOCK
        hi = min(replicas, lo + _VACF_BLOCK)
        for r in range(lo, hi):
            s = states[r]
            x = int64(1)
            y = int64(0)
            dx = int64(0)
            dy = int64(0)
            sums[b, 0] += 1
            for n in range(1, n_max + 1):
                if x == 0 and y == 0:
                    x += dx
                    y += dy
                else:
                    w = next_u64(s) >> uint64(62)
                    if d == 1:
                        dx = int64(1) if (w & uint64(1)) else int64(-1)
                        dy = 0
                    elif w == 0:
                        dx, dy = 1, 0
                    elif w == 1:
                        dx, dy = -1, 0
                    elif w == 2:
                        dx, dy = 0, 1
                    else:
                        dx, dy = 0, -1
                    x += dx
                    y += dy
                if y == 0:
                    if x == 1:
                        sums[b, n] += 1
                    elif x == -1:
                        sums[b, n] -= 1


def vacf_mc(d: int, n_max: int, replicas: int, seed: int,
            threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo estimate of C(n) with standard errors."""
    if d not in (1, 2):
        raise ValueError("d must be 1 or 2")
    set_threads(threads)
    states = derive_states(seed, replicas)
    n_blocks = -(-replicas // _VACF_BLOCK)
    sums = np.zeros((n_blocks, n_max + 1), dtype=np.int64)
    _vacf_kernel(states, d, n_max, sums)
    total = sums.sum(axis=0)
    mean = total / replicas
    # each replica contributes -1, 0 or 1; E[Y^2] = P(|T_n| = e1)
    # is bounded by the sum of |counts|, so use the Bernoulli bound
    se = np.sqrt(np.maximum(1.0 - mean**2, 0.0) / replicas)
    return mean, se


def vacf_perturbed_ssrw(d: int, n_max: int, mode: str = "dp", replicas: int = 10**5,
                        seed: int = 0, threads: int | None = None):
    """C(n) for n <= n_max, exactly (``mode='dp'``) or by simulation (``'mc'``).

    The Monte Carlo mode returns ``(mean, standard_error)``.
    """
    if mode == "dp":
        return vacf_exact(d, n_max)
    if mode == "mc":
        return vacf_mc(d, n_max, replicas, seed, threads)
    raise ValueError("mode must be 'dp' or 'mc'")
