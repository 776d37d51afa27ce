"""``htrw`` command line: reproducible experiment runners.

Every command writes a table. CSV files start with a
``# manifest: {...}`` line (command, parameters, version, checksum of
everything below it) and an optional ``# summary: {...}`` line; paths
ending in ``.json`` get one JSON document instead. Output bytes depend
only on the flags, never on the thread count.

Exit codes: 0 success, 2 usage error, 3 out-of-range request, 4 an
accuracy target was missed.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import OutOfRangeError, ToleranceError

EXIT_USAGE = 2
EXIT_RANGE = 3
EXIT_TOLERANCE = 4

EXACT_AVOID_LIMIT = 2**17


class UsageError(Exception):
    pass


# --------------------------------------------------------------- output


def _clean(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    return v


def _cell(v) -> str:
    v = _clean(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    return repr(v) if isinstance(v, float) else str(v)


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def render(command: str, params: dict, columns: list, rows: list, summary: dict | None,
           fmt: str, timestamp: bool = False) -> str:
    """Serialize a result table with its manifest."""
    manifest = {"command": command, "params": params, "version": __version__,
                "timestamp": (_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
                              if timestamp else None)}
    if fmt == "json":
        body = {"summary": summary or {}, "columns": columns, "rows": rows}
        manifest["checksum"] = "sha256:" + hashlib.sha256(_dumps(body).encode()).hexdigest()
        return json.dumps(_clean({"manifest": manifest, **body}), sort_keys=True, indent=1,
                          allow_nan=False) + "\n"
    buf = io.StringIO()
    if summary:
        buf.write("# summary: " + _dumps(summary) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    text = buf.getvalue()
    manifest["checksum"] = "sha256:" + hashlib.sha256(text.encode()).hexdigest()
    return "# manifest: " + _dumps(manifest) + "\n" + text


def verify(text: str) -> bool:
    """Check the manifest checksum of a CSV or JSON output."""
    if text.startswith("# manifest: "):
        head, _, rest = text.partition("\n")
        manifest = json.loads(head[len("# manifest: "):])
        return manifest["checksum"] == "sha256:" + hashlib.sha256(rest.encode()).hexdigest()
    doc = json.loads(text)
    body = {k: doc[k] for k in ("summary", "columns", "rows")}
    return doc["manifest"]["checksum"] == "sha256:" + hashlib.sha256(_dumps(body).encode()).hexdigest()


# -------------------------------------------------------------- parsing


def _pair(text: str) -> tuple:
    try:
        a, b = (int(c) for c in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A,B integers, got {text!r}") from None
    return (a, b)


def _int_list(text: str) -> list:
    try:
        return [int(c) for c in text.split(",") if c]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _count(text: str) -> int:
    try:
        v = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _grid(text: str) -> list:
    """``dyadic:LO:HI`` (exponents) or ``a,b,c``."""
    if text.startswith("dyadic:"):
        try:
            _, lo, hi = text.split(":")
            lo, hi = int(lo), int(hi)
        except ValueError:
            raise argparse.ArgumentTypeError("dyadic grids read dyadic:LO:HI") from None
        if lo > hi or lo < 0:
            raise argparse.ArgumentTypeError("need 0 <= LO <= HI")
        return [2**j for j in range(lo, hi + 1)]
    return _int_list(text)


def _dyadic_upto(n_max: int, lo: int = 1) -> list:
    out, m = [], lo
    while m <= n_max:
        out.append(m)
        m *= 2
    return out


def _preds(name: str):
    from .asymptotics import CORRECTED, NOMINAL
    return NOMINAL if name == "nominal" else CORRECTED


# ------------------------------------------------------------- commands


def cmd_exact_pmf(a):
    from . import exact_dist as ed
    rows = []
    if a.dim == 1:
        if a.point:
            raise UsageError("--point is for --dim 2; use --x")
        for x in a.x or [0]:
            est = ed.cf_quadrature_pmf(a.n, x)
            rows.append([a.n, x, 0, est.value, est.error])
    else:
        if a.x:
            raise UsageError("--x is for --dim 1; use --point")
        for p in a.point or [(0, 0)]:
            est = ed.pmf_sn_point(a.n, p)
            rows.append([a.n, p[0], p[1], est.value, est.error])
    cols = ["n", "a", "b", "pmf", "error"]
    return cols, rows, None


def cmd_llt_compare(a):
    from . import exact_dist as ed
    from .asymptotics import trend_report
    preds = _preds(a.constants)
    kappa = preds.kappa if a.dim == 1 else preds.kappa2
    xs = a.x or [0]
    pts = [int(x) for x in xs] if a.dim == 1 else [(int(x), 0) for x in xs]
    rows_raw = ed.llt_error_profile(a.dim, a.n_grid, pts, kappa)
    rows = [[r.n, r.x[0], r.x[1] if a.dim == 2 else 0, r.actual, r.error, r.predicted,
             r.actual / r.predicted, r.residual, r.scaled] for r in rows_raw]
    at0 = [r for r in rows_raw if all(c == 0 for c in r.x)]
    summary = {"constants": preds.label, "kappa": kappa}
    if len(at0) >= 2:
        rep = trend_report([r.n for r in at0], [r.actual for r in at0], [r.predicted for r in at0])
        summary.update(verdict=rep.verdict, kendall_tau=rep.kendall_tau,
                       final_ratio=float(rep.ratios[-1]))
    cols = ["n", "a", "b", "actual", "error", "predicted", "ratio", "residual", "scaled_residual"]
    return cols, rows, summary


def cmd_return_tail(a):
    from . import renewal
    from .asymptotics import tail_prediction, trend_report
    preds = _preds(a.constants)
    table = renewal.gamma_table(a.dim, a.n_max)
    n_min = 3 if a.dim == 1 else 16
    rows = []
    for n in range(a.n_max + 1):
        pred = tail_prediction(a.dim, n, preds) if n >= n_min else None
        rows.append([n, table.gamma[n], table.error[n], pred])
    grid = [n for n in _dyadic_upto(a.n_max) if n >= n_min]
    summary = {"constants": preds.label,
               "max_renewal_residual": float(np.max(np.abs(table.residuals(min(a.n_max, 4096)))))}
    if len(grid) >= 2:
        rep = trend_report(grid, [table.gamma[n] for n in grid],
                           [tail_prediction(a.dim, n, preds) for n in grid])
        summary.update(grid=grid, ratios=rep.ratios.tolist(), verdict=rep.verdict,
                       approach=rep.approach, kendall_tau=rep.kendall_tau)
    return ["n", "gamma", "error", "prediction"], rows, summary


def cmd_local_time(a):
    from . import montecarlo as mc
    from .asymptotics import CORRECTED, NOMINAL, exp_limit_cdf, kolmogorov_distance, ml_moment
    if a.n < 3:
        raise OutOfRangeError("local-time comparisons need n >= 3")
    res = mc.local_time_origin(a.n, a.dim, a.replicas, a.seed, threads=a.threads)
    samples = res.stats.local_time
    values, counts = np.unique(samples, return_counts=True)
    cum = np.cumsum(counts) / samples.size
    rows = [[int(v), int(c), float(f)] for v, c, f in zip(values, counts, cum)]
    summary = {"mean": res.summary["visits_mean"][-1], "variance": res.summary["visits_var"][-1],
               "overflow": res.summary["overflow"]}
    if a.dim == 2:
        scaled = samples / math.log(math.log(a.n))
        summary["scaled_mean"] = float(np.mean(scaled))
        for p in (NOMINAL, CORRECTED):
            summary[f"ks_{p.label}"] = kolmogorov_distance(
                scaled, lambda y, m=p.exp_mean: exp_limit_cdf(y, m))
            summary[f"exp_mean_{p.label}"] = p.exp_mean
    else:
        scaled = samples * math.sqrt(math.log(a.n) / a.n)
        for k in (1, 2):
            summary[f"moment{k}"] = float(np.mean(scaled.astype(float) ** k))
            for p in (NOMINAL, CORRECTED):
                summary[f"ml_moment{k}_{p.label}"] = ml_moment(k, p)
    return ["visits", "count", "ecdf"], rows, summary


def cmd_hitting(a):
    from . import montecarlo as mc
    from .asymptotics import hitting_prediction
    res = mc.hitting_time(a.v, a.n_max, a.replicas, a.seed, threads=a.threads)
    rows = [[i, int(t), int(t == mc.CENSORED)] for i, t in enumerate(res.times)]
    norm = math.hypot(*a.v)
    summary = {"v": list(a.v), "censored_fraction": res.censored_fraction}
    if norm > math.e:
        grid = [n for n in (10**j for j in range(1, 13)) if norm < n <= a.n_max]
        summary["grid"] = grid
        summary["cdf"] = [res.cdf(n) for n in grid]
        summary["prediction"] = [hitting_prediction(norm, n) for n in grid]
    return ["replica", "t_v", "censored"], rows, summary


def cmd_avoid(a):
    from . import montecarlo as mc
    from . import renewal
    spec = mc.AvoidanceSpec(a.delta, a.n)
    est = mc.avoid_site(spec, None, a.replicas, a.seed, threads=a.threads)
    exact = exact_err = None
    if a.n <= EXACT_AVOID_LIMIT:
        e = renewal.avoid_prob_exact(spec.site, a.n)
        exact, exact_err = e.value, e.error
    row = [a.n, spec.site[0], spec.site[1], est.estimate, est.std_error, a.delta, exact, exact_err]
    cols = ["n", "site_a", "site_b", "estimate", "std_error", "delta", "exact", "exact_error"]
    return cols, [row], None


def cmd_vacf(a):
    from . import montecarlo as mc
    from .asymptotics import fit_power_slope
    if a.mode == "dp":
        c = mc.vacf_perturbed_ssrw(a.dim, a.n_max, "dp")
        se = np.zeros_like(c)
    else:
        c, se = mc.vacf_perturbed_ssrw(a.dim, a.n_max, "mc", a.replicas, a.seed, a.threads)
    rows = [[n, c[n], se[n]] for n in range(a.n_max + 1)]
    lo, hi = (2**6, 2**12) if a.dim == 1 else (2**5, 2**9)
    hi = min(hi, a.n_max)
    summary = {"fit_range": [lo, hi]}
    if hi - lo >= 4:
        n = np.arange(lo, hi + 1, 2)
        fit = fit_power_slope(n, c[n])
        summary.update(slope=fit.slope, ci=[fit.ci_low, fit.ci_high],
                       refused=fit.refused, sign_changes=fit.sign_changes)
    return ["n", "C", "std_error"], rows, summary


def cmd_flight(a):
    from . import montecarlo as mc
    from .asymptotics import kendall_trend
    ck = _dyadic_upto(a.n)
    if ck[-1] != a.n:
        ck.append(a.n)
    f = mc.flight_stats(a.n, a.replicas, a.seed, checkpoints=ck, threads=a.threads)
    rows = []
    for j, k in enumerate(f.grid):
        k = int(k)
        a_scaled = f.a_hat[j] * (k * math.log(k)) ** (5 / 6) if k > 1 else None
        rows.append([k, f.a_hat[j], f.a_se[j], a_scaled, f.theta_hat[j], f.theta_se[j],
                     f.theta_hat[j] / k ** (1 / 6), f.rho_mean[j]])
    big = [r for r in rows if r[0] >= 2**10]
    summary = {}
    if len(big) >= 2:
        g = [r[0] for r in big]
        tau_a, _, p_up = kendall_trend(g, [r[3] for r in big])
        th = np.array([r[6] for r in big])
        summary = {"a_scaled_tau": tau_a, "a_scaled_p_increasing": p_up,
                   "theta_scaled_decreasing": bool(np.all(np.diff(th) < 0))}
    cols = ["k", "a_hat", "a_se", "a_scaled", "theta_hat", "theta_se", "theta_scaled", "rho_mean"]
    return cols, rows, summary


def cmd_harom(a):
    from . import renewal
    s = renewal.harom_sum(a.k, a.n)
    p = renewal.harom_prediction(a.k, a.n) if a.n >= 2 else None
    return ["k", "n", "sum", "prediction", "ratio"], [[a.k, a.n, s, p, s / p if p else None]], None


def cmd_sample(a):
    from .rng import Stream
    from .step_law import sample_step_1d, sample_step_2d
    stream = Stream.from_seed(a.seed)
    if a.dim == 1:
        x = sample_step_1d(stream, a.count)
        return ["x"], [[int(v)] for v in x], None
    x = sample_step_2d(stream, a.count)
    return ["x", "y"], [[int(p), int(q)] for p, q in x], None


# ---------------------------------------------------------------- parser


def _add_common(p, mc: bool = False):
    p.add_argument("--out", required=True, help="output path; .json selects JSON")
    p.add_argument("--timestamp", action="store_true",
                   help="record the wall-clock time in the manifest (breaks byte identity)")
    if mc:
        p.add_argument("--replicas", type=_count, required=True)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--threads", type=_count, default=None,
                       help="worker threads (default $HTRW_THREADS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="htrw", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact-pmf", help="P(Q_n = x) or P(S_n = (a, b)) with error bounds")
    p.add_argument("--dim", type=int, choices=(1, 2), required=True)
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--x", type=_int_list, help="comma-separated 1-D sites")
    p.add_argument("--point", type=_pair, action="append", help="planar site A,B (repeatable)")
    _add_common(p)
    p.set_defaults(func=cmd_exact_pmf)

    p = sub.add_parser("llt-compare", help="exact pmf against the Gaussian local limit")
    p.add_argument("--dim", type=int, choices=(1, 2), required=True)
    p.add_argument("--n-grid", type=_grid, required=True, help="dyadic:LO:HI or a,b,c")
    p.add_argument("--x", type=_int_list, help="offsets along the first axis (default 0)")
    p.add_argument("--constants", choices=("nominal", "corrected"), default="nominal")
    _add_common(p)
    p.set_defaults(func=cmd_llt_compare)

    p = sub.add_parser("return-tail", help="P(tau > n) from the renewal identity")
    p.add_argument("--dim", type=int, choices=(1, 2), required=True)
    p.add_argument("--n-max", type=_count, required=True)
    p.add_argument("--constants", choices=("nominal", "corrected"), default="nominal")
    _add_common(p)
    p.set_defaults(func=cmd_return_tail)

    p = sub.add_parser("local-time", help="visits to the origin up to time n")
    p.add_argument("--dim", type=int, choices=(1, 2), required=True)
    p.add_argument("--n", type=_count, required=True)
    _add_common(p, mc=True)
    p.set_defaults(func=cmd_local_time)

    p = sub.add_parser("hitting", help="hitting time of the origin from v")
    p.add_argument("--v", type=_pair, required=True)
    p.add_argument("--n-max", type=_count, required=True)
    _add_common(p, mc=True)
    p.set_defaults(func=cmd_hitting)

    p = sub.add_parser("avoid", help="probability of never visiting a distant site")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--n", type=_count, required=True)
    _add_common(p, mc=True)
    p.set_defaults(func=cmd_avoid)

    p = sub.add_parser("vacf", help="autocorrelation of the perturbed simple walk")
    p.add_argument("--dim", type=int, choices=(1, 2), required=True)
    p.add_argument("--n-max", type=_count, required=True)
    p.add_argument("--mode", choices=("dp", "mc"), default="dp")
    p.add_argument("--replicas", type=_count, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=_count, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_vacf)

    p = sub.add_parser("flight", help="flights over the origin")
    p.add_argument("--n", type=_count, required=True)
    _add_common(p, mc=True)
    p.set_defaults(func=cmd_flight)

    p = sub.add_parser("harom", help="k-fold sum of 1/sqrt(m log m)")
    p.add_argument("--k", type=_count, required=True)
    p.add_argument("--n", type=_count, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_harom)

    p = sub.add_parser("sample", help="raw step draws")
    p.add_argument("--dim", type=int, choices=(1, 2), required=True)
    p.add_argument("--count", type=_count, required=True)
    p.add_argument("--seed", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_sample)
    return parser


_NOT_PARAMS = {"func", "out", "timestamp", "threads", "command"}


def _validate(args):
    if args.command == "vacf":
        if args.mode == "mc" and (args.replicas is None or args.seed is None):
            raise UsageError("--mode mc needs --replicas and --seed")
        if args.mode == "dp" and (args.replicas is not None or args.seed is not None):
            raise UsageError("--replicas/--seed apply to --mode mc only")
    if args.command == "avoid" and not 0.0 < args.delta < 1.0:
        raise UsageError("--delta must lie in (0, 1)")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _validate(args)
        columns, rows, summary = args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except OutOfRangeError as exc:
        print(f"htrw: range error: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except ToleranceError as exc:
        print(f"htrw: tolerance error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_PARAMS}
    fmt = "json" if args.out.endswith(".json") else "csv"
    text = render(args.command, params, columns, rows, summary, fmt, args.timestamp)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
