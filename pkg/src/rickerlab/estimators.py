"""Estimators over hitting-time samples: survival curves, tail fits, means.

Censoring here is single-point (every trajectory shares one horizon), so
the empirical survival function is exact up to the horizon: censored and
extinct outcomes are genuine survivors at every n < horizon and no
product-limit machinery is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hitting import CENSORED, EXTINCT, HIT, HittingBatch, HittingOutcome


def _as_arrays(samples, horizon=None):
    """Normalize a HittingBatch or an iterable of HittingOutcome."""
    if isinstance(samples, HittingBatch):
        return samples.kinds, samples.times, samples.horizon
    kinds, times, horizons = [], [], set()
    code = {"hit": HIT, "censored": CENSORED, "extinct": EXTINCT}
    for o in samples:
        kinds.append(code[o.kind])
        times.append(o.n)
        if o.kind == "censored":
            horizons.add(o.n)
    if horizon is None:
        if len(horizons) > 1:
            raise ValueError(f"mixed horizons in sample set: {sorted(horizons)}")
        horizon = horizons.pop() if horizons else (max(times) if times else 1)
    elif horizons and horizons != {horizon}:
        raise ValueError(f"censored outcomes disagree with horizon={horizon}: {sorted(horizons)}")
    return np.array(kinds, np.uint8), np.array(times, np.int64), horizon


# ---------------------------------------------------------------------------
# survival curve

@dataclass
class SurvivalCurve:
    """Empirical S(n) = P(T > n), a right-continuous step function.

    Points are every n where S changes plus the horizon; censored and
    extinct outcomes count as T > n for all n <= horizon.
    """

    n: np.ndarray
    s: np.ndarray
    n_total: int
    n_censored: int
    horizon: int

    def value(self, q):
        """S evaluated at integer(s) q by staircase lookup."""
        q = np.asarray(q)
        idx = np.searchsorted(self.n, q, side="right") - 1
        return self.s[np.clip(idx, 0, len(self.n) - 1)]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("n,survival\n")
            for n, s in zip(self.n, self.s):
                fh.write(f"{n},{s:.10g}\n")


def survival_curve(samples, horizon: int | None = None) -> SurvivalCurve:
    """Empirical survival function of a hitting-time sample multiset."""
    kinds, times, horizon = _as_arrays(samples, horizon)
    if len(kinds) == 0:
        raise ValueError("empty sample multiset")
    n_total = len(kinds)
    hit_times = times[kinds == HIT]
    if hit_times.size and hit_times.max() > horizon:
        raise ValueError("hit time beyond the horizon; mixed-horizon samples rejected")
    n_cens = n_total - hit_times.size

    uniq, counts = np.unique(hit_times, return_counts=True)
    grid = [0]
    surv = [1.0]
    fallen = 0
    for t, c in zip(uniq, counts):
        fallen += c
        grid.append(int(t))
        surv.append((n_total - fallen) / n_total)
    if grid[-1] != horizon:
        grid.append(horizon)
        surv.append((n_total - fallen) / n_total)
    return SurvivalCurve(np.array(grid, np.int64), np.array(surv), n_total, n_cens, horizon)


def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson 95% (by default) score interval for a binomial fraction."""
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# ---------------------------------------------------------------------------
# tail fits

@dataclass(frozen=True)
class TailFit:
    method: str                 # "hill" | "loglog_regression" | "exp_rate"
    value: float                # survival exponent, or exponential rate
    stderr: float
    window: tuple               # (n_lo, n_hi) or ("k", k)
    n_used: int
    r_squared: float | None = None
    flags: tuple[str, ...] = ()


@dataclass
class PowerTailFit:
    """Joint result of the order-statistics and curve-regression tail fits."""

    estimable: bool
    hill: TailFit | None = None
    regression: TailFit | None = None
    k_sensitivity: dict = field(default_factory=dict)
    diagnostic: str = "inestimable"     # "power_ok" | "exponential_preferred" | "inestimable"
    reason: str | None = None
    censored_fraction: float = 0.0

    @property
    def exponent(self) -> float | None:
        """Headline survival exponent: the curve regression when available
        (unbiased under censoring), otherwise the adjusted Hill value."""
        if self.regression is not None:
            return self.regression.value
        if self.hill is not None:
            return self.hill.value
        return None


def _ols(x: np.ndarray, y: np.ndarray):
    """Least squares y ~ a + b*x: (slope, intercept, slope stderr, R^2)."""
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = ((x - xm) ** 2).sum()
    if sxx == 0:
        raise ValueError("degenerate regression window")
    slope = ((x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    rss = (resid ** 2).sum()
    tss = ((y - ym) ** 2).sum()
    se = math.sqrt(rss / max(n - 2, 1) / sxx)
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return slope, intercept, se, r2


def hill_exponent(values: np.ndarray, k: int, censored: np.ndarray | None = None):
    """Survival-tail exponent from the top k order statistics.

    ``values`` may include censored observations recorded at the horizon
    (their indicator passed in ``censored``); the classical estimator is
    then divided by the uncensored share inside the top k, which restores
    consistency under single-point right censoring.

    Returns (exponent, stderr, flags) or raises ValueError.
    """
    v = np.asarray(values, float)
    if censored is None:
        censored = np.zeros(len(v), bool)
    if k < 5 or k >= len(v):
        raise ValueError(f"k={k} out of range for n={len(v)}")
    order = np.argsort(v)
    top = order[-(k + 1):]
    z = v[top]
    if z[0] <= 0:
        raise ValueError("nonpositive values in the tail window")
    logs = np.log(z[1:]) - math.log(z[0])
    h = logs.mean()
    if h <= 0:
        raise ValueError("flat tail window (all top values tied)")
    p_unc = 1.0 - censored[top[1:]].mean()
    flags = ()
    if p_unc <= 0:
        raise ValueError("top order statistics are entirely censored")
    if p_unc < 1.0:
        flags = ("censoring_adjusted",)
    exponent = p_unc / h
    stderr = exponent / math.sqrt(k)
    return exponent, stderr, flags


def _curve_window(curve: SurvivalCurve, s_hi: float, s_lo: float):
    """Integer n-window [n_lo, n_hi] where s_lo <= S <= s_hi and S > 0."""
    ns, ss = curve.n, curve.s
    below = np.nonzero(ss <= s_hi)[0]
    if below.size == 0:
        return None
    n_lo = max(int(ns[below[0]]), 1)
    ok = np.nonzero((ss >= s_lo) & (ns < curve.horizon))[0]
    if ok.size == 0:
        return None
    n_hi = int(ns[ok[-1]])
    if n_hi <= n_lo:
        return None
    return n_lo, n_hi


def _loglog_slope(curve: SurvivalCurve, n_lo: int, n_hi: int, points: int = 60):
    qs = np.unique(np.geomspace(n_lo, n_hi, points).astype(np.int64))
    s = curve.value(qs)
    keep = s > 0
    qs, s = qs[keep], s[keep]
    if len(qs) < 4:
        raise ValueError("too few positive curve points in the window")
    slope, _, se, r2 = _ols(np.log(qs.astype(float)), np.log(s))
    return slope, se, r2, len(qs)


def tail_window_shape(window_values: np.ndarray) -> tuple[float, float]:
    """(spacing ratio, span) of a tail window; both location diagnostics.

    The spacing ratio ln(5)*(q50-q0) / (ln(2)*(q90-q50)) compares how fast
    the window's quantiles spread out: an exponential tail gives exactly 1,
    a power tail with exponent 2 about 0.55, heavier tails less.  It is
    invariant under shifting the values.  The span q90/q0 measures whether
    the window covers enough of a value range to resolve a power law at
    all; tails lighter than exponential concentrate the top order
    statistics in a narrow band.
    """
    z = np.sort(np.asarray(window_values, float))
    if len(z) < 10:
        return math.inf, 1.0
    q0 = z[0]
    q50 = z[int(0.5 * (len(z) - 1))]
    q90 = z[int(0.9 * (len(z) - 1))]
    span = q90 / q0 if q0 > 0 else math.inf
    if q90 <= q50:
        return math.inf, span
    return math.log(5.0) * (q50 - q0) / (math.log(2.0) * (q90 - q50)), span


_SHAPE_RATIO_POWER_MAX = 0.8
_SPAN_POWER_MIN = 1.5


def fit_power_tail(samples, k="auto", s_hi: float = 0.2, s_lo: float | None = None,
                   tail_top: int | None = None,
                   excess_shift: float | str | None = None) -> PowerTailFit:
    """Power-law fit of a hitting-time survival tail.

    Two routes are computed and reported: a (censoring-adjusted) Hill
    estimate over the top k order statistics, and the log-log regression
    slope of the empirical survival curve over the band s_lo <= S <= s_hi.
    The diagnostic is the location-invariant :func:`tail_shape_ratio` of
    the Hill window: when the window's quantile spacing decays at least
    exponentially fast, the fit is flagged "exponential_preferred" instead
    of reporting a meaningless power exponent.

    For tails that are power-like only beyond a bulk timescale (rare-event
    regimes), ``tail_top`` keeps only the top-N order statistics and
    ``excess_shift`` (a number, or "median" for the sample median) fits
    the exceedances net of the bulk offset, the usual peaks-over-threshold
    location adjustment.
    """
    if isinstance(samples, (HittingBatch, list)):
        kinds, times, horizon = _as_arrays(samples)
        values = times.astype(float)
        cens = kinds != HIT
        values = np.where(cens, float(horizon), values)
        curve = survival_curve(samples)
    else:
        values = np.asarray(samples, float)
        cens = np.zeros(len(values), bool)
        curve = None

    censored_fraction = float(cens.mean()) if len(values) else 0.0
    shift = 0.0
    if excess_shift == "median":
        shift = float(np.median(values))
    elif excess_shift is not None:
        shift = float(excess_shift)

    fit_values, fit_cens = values, cens
    if tail_top is not None:
        if tail_top < len(values):
            floor = np.sort(values)[-tail_top]
            keep = values > floor
            fit_values, fit_cens = values[keep], cens[keep]
        if tail_top < 100:
            return PowerTailFit(estimable=False,
                                reason=f"tail_top={tail_top} below the 100-sample window minimum",
                                censored_fraction=censored_fraction)
    n_unc = int((~fit_cens).sum())
    if tail_top is None and n_unc < 100:
        return PowerTailFit(estimable=False,
                            reason=f"only {n_unc} uncensored samples in the fit range",
                            censored_fraction=censored_fraction)

    if k == "auto":
        k = len(fit_values) - 1 if tail_top is not None else int(math.isqrt(n_unc))
    k = int(k)

    hill = None
    sensitivity = {}
    shifted = fit_values - shift
    for kk in sorted({max(k // 2, 5), k, min(2 * k, len(fit_values) - 1)}):
        try:
            est, se, fl = hill_exponent(shifted, kk, fit_cens)
        except ValueError:
            continue
        sensitivity[kk] = est
        if kk == k:
            window_tag = ("k", k) if tail_top is None else ("k", k, "top", tail_top)
            if shift:
                fl = fl + ("location_adjusted",)
            hill = TailFit("hill", est, se, window_tag, kk, flags=fl)

    regression = None
    if curve is not None:
        if s_lo is None:
            s_lo = max(10.0 / curve.n_total, 1e-12)
        win = _curve_window(curve, s_hi, s_lo)
        if win is not None and win[1] >= 4 * win[0]:
            n_lo, n_hi = win
            try:
                slope, se, r2, used = _loglog_slope(curve, n_lo, n_hi)
                regression = TailFit("loglog_regression", -slope, se, (n_lo, n_hi), used, r_squared=r2)
            except ValueError:
                regression = None

    if hill is None and regression is None:
        return PowerTailFit(estimable=False, reason="no estimable tail window",
                            censored_fraction=censored_fraction)

    if hill is not None:
        order = np.argsort(fit_values)
        window_vals = fit_values[order[-(hill.n_used + 1):]]
    else:
        window_vals = fit_values
    ratio, span = tail_window_shape(window_vals)
    if ratio <= _SHAPE_RATIO_POWER_MAX and span >= _SPAN_POWER_MIN:
        diagnostic, reason = "power_ok", None
    else:
        diagnostic = "exponential_preferred"
        if span < _SPAN_POWER_MIN:
            reason = (f"tail window spans only x{span:.2f} in value: "
                      "no power law resolvable, decay is exponential-type or faster")
        else:
            reason = (f"tail window quantile-spacing ratio {ratio:.2f} >= "
                      f"{_SHAPE_RATIO_POWER_MAX}: decay is exponential-type or faster")

    return PowerTailFit(estimable=True, hill=hill, regression=regression,
                        k_sensitivity=sensitivity, diagnostic=diagnostic,
                        reason=reason, censored_fraction=censored_fraction)


def fit_exponential_rate(curve: SurvivalCurve, window: tuple[int, int] | None = None,
                         s_floor: float = 0.0) -> TailFit:
    """Exponential decay rate of a survival curve: -slope of ln S(n).

    The fit is ordinary least squares over every integer n in the window
    with S(n) > s_floor; a window containing S = 0 is rejected.  A curve
    that collapses to zero immediately after its first point decays faster
    than any exponential and is reported as rate = inf with a degenerate
    flag instead of a fabricated finite number.
    """
    if window is None:
        ns = np.arange(0, curve.horizon + 1)
        s = curve.value(ns)
        pos = s > max(s_floor, 0.0)
        if not pos.any():
            raise ValueError("survival curve has no positive values")
        n_hi = int(ns[pos][-1])
        window = (0, n_hi)
    n_lo, n_hi = window
    ns = np.arange(n_lo, n_hi + 1)
    s = curve.value(ns)
    if (s <= 0).any():
        raise ValueError(f"survival is zero inside the fit window [{n_lo}, {n_hi}]")
    if len(ns) < 2:
        return TailFit("exp_rate", math.inf, 0.0, (n_lo, n_hi), len(ns),
                       flags=("degenerate_immediate_collapse",))
    slope, _, se, r2 = _ols(ns.astype(float), np.log(s))
    return TailFit("exp_rate", -slope, se, (n_lo, n_hi), len(ns), r_squared=r2)


# ---------------------------------------------------------------------------
# means

@dataclass(frozen=True)
class MeanSummary:
    mean: float
    ci95: tuple[float, float]
    censored_fraction: float
    divergence_flag: bool           # heuristic: truncated mean keeps growing in the horizon
    truncated_means: tuple[float, ...]
    truncation_horizons: tuple[int, ...]


_DIVERGENCE_RATIO = 1.2


def mean_with_ci(samples, horizon: int | None = None) -> MeanSummary:
    """Truncated-at-horizon mean with a normal-approximation 95% CI.

    The divergence flag is a heuristic (an infinite expectation cannot be
    certified by finite simulation): it is set when the mean truncated at
    H/4, H/2 and H keeps growing by more than x1.2 per doubling, the
    signature of a heavy tail rather than saturation.
    """
    kinds, times, horizon = _as_arrays(samples, horizon)
    if len(kinds) == 0:
        raise ValueError("empty sample multiset")
    t = np.where(kinds == HIT, times, horizon).astype(float)
    t = np.minimum(t, horizon)
    mean = float(t.mean())
    sd = float(t.std(ddof=1)) if len(t) > 1 else 0.0
    half = 1.96 * sd / math.sqrt(len(t))
    cens_frac = float((kinds != HIT).mean())

    hs = tuple(sorted({max(horizon // 4, 1), max(horizon // 2, 1), horizon}))
    trunc = tuple(float(np.minimum(t, h).mean()) for h in hs)
    diverging = len(trunc) >= 3 and all(
        trunc[i + 1] > _DIVERGENCE_RATIO * trunc[i] for i in range(len(trunc) - 1))

    return MeanSummary(mean, (mean - half, mean + half), cens_frac,
                       diverging, trunc, hs)
