"""Analytic rate bounds, mean bounds and regime classification.

These are the closed-form (or quadrature-backed) quantities the Monte
Carlo output is checked against: geometric decay factors for the tails of
commonness/rarity times, the band-exit factor, logarithmic mean bounds,
the recurrence classification, and the two-species escape-case classifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import GrowthModel, PerturbedRicker, Ricker, TwoSpeciesModel, regime_tag
from .noise import INF, NoiseSpec

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_min(f, lo: float, hi: float, rel_tol: float = 1e-8,
                       max_iter: int = 200) -> tuple[float, float]:
    """Golden-section minimum of a unimodal f on [lo, hi].

    Returns (argmin, min).  Intended for bracketed interior minima; callers
    establish the bracket on a grid first.
    """
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= rel_tol * (abs(a) + abs(b)) / 2.0:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


# ---------------------------------------------------------------------------
# sup/inf of ln f over intervals

_GRID_POINTS = 10_000


def _grid(lo: float, hi: float) -> np.ndarray:
    # log-spaced where possible, with both endpoints pinned
    if lo > 0:
        g = np.geomspace(lo, hi, _GRID_POINTS)
    else:
        g = np.concatenate([[0.0], np.geomspace(max(hi * 1e-12, 1e-300), hi, _GRID_POINTS - 1)])
    g[0], g[-1] = lo, hi
    return g


def sup_log_growth(model: GrowthModel, lo: float, hi: float) -> float:
    """sup of ln f on [lo, hi] (hi may be inf)."""
    if isinstance(model, Ricker):
        # ln f decreasing: supremum at the left endpoint
        return model.log_growth(lo)
    cap = hi if math.isfinite(hi) else max(lo, 1.0) * 1e6
    g = _grid(lo, cap)
    vals = model.log_growth_arr(g)
    return float(vals.max())


def inf_log_growth(model: GrowthModel, lo: float, hi: float) -> float:
    """inf of ln f on [lo, hi] (finite hi only)."""
    if isinstance(model, Ricker):
        return model.log_growth(hi)
    g = _grid(lo, hi)
    vals = model.log_growth_arr(g)
    return float(vals.min())


def _extrema_log_xf(model: GrowthModel, lo: float, hi: float) -> tuple[float, float]:
    """(min, max) of ln(x*f(x)) on [lo, hi] > 0."""
    if isinstance(model, Ricker):
        # ln(x f(x)) = ln x + r - a x is concave with stationary point 1/a
        cands = [lo, hi]
        if lo < 1.0 / model.a < hi:
            cands.append(1.0 / model.a)
        vals = [math.log(x) + model.log_growth(x) for x in cands]
        return min(vals[:2]), max(vals)  # concave: min at an endpoint
    g = _grid(lo, hi)
    vals = np.log(g) + model.log_growth_arr(g)
    return float(vals.min()), float(vals.max())


# ---------------------------------------------------------------------------
# geometric tail rates

@dataclass(frozen=True)
class RateBound:
    """Optimized geometric factor bounding a hitting-time tail.

    P(T > n) <= prefactor(x0) * rate**n whenever rate < 1.  ``attained``
    is False when the infimum sits at the scan edge (degenerate noise);
    ``vacuous`` when no alpha pushes the factor below 1.
    """

    kind: str               # "commonness" | "rarity"
    threshold: float
    alpha: float
    rate: float
    attained: bool = True
    vacuous: bool = False

    def prefactor(self, x0: float) -> float:
        if self.kind == "commonness":
            return (x0 / self.threshold) ** self.alpha
        return (self.threshold / x0) ** self.alpha

    def decay_rate(self) -> float:
        """-ln(rate): slope an empirical ln-survival curve is compared to."""
        return INF if self.rate == 0.0 else -math.log(self.rate)


def geometric_rate_commonness(model: GrowthModel, spec: NoiseSpec,
                              m: float, alpha: float) -> float:
    """sup_{x>=m} f(x)^alpha * E[exp(alpha*Y)]; inf when the MGF diverges."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    mgf = spec.mgf(alpha)
    if mgf == INF:
        return INF
    log_val = alpha * sup_log_growth(model, m, INF) + math.log(mgf)
    try:
        return math.exp(log_val)
    except OverflowError:
        return INF


def geometric_rate_rarity(model: GrowthModel, spec: NoiseSpec,
                          eps: float, alpha: float) -> float:
    """exp(-alpha * inf_{[0,eps]} ln f) * E[exp(-alpha*Y)]; inf when divergent."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    mgf = spec.mgf(-alpha)
    if mgf == INF:
        return INF
    log_val = -alpha * inf_log_growth(model, 0.0, eps) + math.log(mgf)
    try:
        return math.exp(log_val)
    except OverflowError:
        return INF


_ALPHA_SCAN_LO = 1e-8
_ALPHA_SCAN_HI = 1e8
_ALPHA_SCAN_N = 400


def _minimize_rate(objective, alpha_domain_sup: float) -> tuple[float, float, bool]:
    """Grid bracket + golden section over (0, alpha_domain_sup).

    Returns (alpha*, value*, attained).  attained=False means the grid
    minimum sat at the scan edge and the reported value is the infimum
    over the scanned range only.
    """
    hi = min(_ALPHA_SCAN_HI, alpha_domain_sup * (1.0 - 1e-9)) \
        if math.isfinite(alpha_domain_sup) else _ALPHA_SCAN_HI
    grid = np.geomspace(_ALPHA_SCAN_LO, hi, _ALPHA_SCAN_N)
    vals = np.array([objective(a) for a in grid])
    i = int(np.argmin(vals))
    if i == len(grid) - 1:
        return float(grid[i]), float(vals[i]), False
    if i == 0:
        # factor -> 1 as alpha -> 0+, so a left-edge minimum means the
        # objective is increasing everywhere scanned: vacuous-ish, refine anyway
        lo_b, hi_b = grid[0] * 1e-3, grid[1]
    else:
        lo_b, hi_b = grid[i - 1], grid[i + 1]
    a_star, v_star = golden_section_min(objective, lo_b, hi_b)
    return a_star, v_star, True


def minimize_rate_commonness(model: GrowthModel, spec: NoiseSpec, m: float) -> RateBound:
    """Best geometric factor for the commonness-time tail at threshold m."""
    alpha, rate, attained = _minimize_rate(
        lambda a: geometric_rate_commonness(model, spec, m, a), spec.alpha_sup_pos())
    return RateBound("commonness", m, alpha, rate, attained=attained, vacuous=rate >= 1.0)


def minimize_rate_rarity(model: GrowthModel, spec: NoiseSpec, eps: float) -> RateBound:
    """Best geometric factor for the rarity-time tail at threshold eps.

    Requires growth at low density: inf of ln f on [0, eps] must be > 0.
    """
    if inf_log_growth(model, 0.0, eps) <= 0:
        raise ValueError("rarity rate bound needs inf ln f > 0 on [0, eps]; "
                         "lower eps or use a growing regime")
    alpha, rate, attained = _minimize_rate(
        lambda a: geometric_rate_rarity(model, spec, eps, a), spec.alpha_sup_neg())
    return RateBound("rarity", eps, alpha, rate, attained=attained, vacuous=rate >= 1.0)


@dataclass(frozen=True)
class BandExitRate:
    """Per-step factor for the medium-band exit time: P(T > n) <= rate**(n-2)."""

    rate: float
    y_lo: float
    y_hi: float
    out_of_hypothesis: bool


def band_exit_rate(model: GrowthModel, spec: NoiseSpec, eps: float, m: float) -> BandExitRate:
    """Probability that one noise draw can keep the chain inside [eps, m].

    The chain stays in the band only if Y lands in
    [ln(eps) - ln(max x f(x)), ln(m) - ln(min x f(x))] with extrema over the
    band; bounded noise can make this probability 1, which is reported (and
    flagged) rather than rejected.
    """
    if not 0 < eps < m:
        raise ValueError("need 0 < eps < m")
    log_min, log_max = _extrema_log_xf(model, eps, m)
    y_lo = math.log(eps) - log_max
    y_hi = math.log(m) - log_min
    rate = spec.interval_prob(y_lo, y_hi)
    return BandExitRate(rate=rate, y_lo=y_lo, y_hi=y_hi,
                        out_of_hypothesis=spec.is_bounded())


# ---------------------------------------------------------------------------
# mean bounds

@dataclass(frozen=True)
class MeanTimeBounds:
    commonness_upper: float | None
    rarity_lower: float | None
    rarity_upper: float | None
    eps0: float | None = None


def mean_time_bounds(model: GrowthModel, spec: NoiseSpec, x0: float,
                     eps: float | None = None, m: float | None = None,
                     eps0: float | None = None) -> MeanTimeBounds:
    """Logarithmic bounds on expected hitting times, where applicable.

    Commonness (x0 > m): E[T] <= 2*(ln x0 - ln m + 1).
    Rarity (growing regime, x0 < eps): (ln eps - ln x0)/d <= E[T] with
    d = sup ln f on [0, eps], and E[T] <= 2*(ln eps0 - ln x0)/ln(lambda)
    with a configured eps0 > eps (default 2*eps).
    """
    commonness_upper = None
    if m is not None:
        if x0 <= m:
            raise ValueError("commonness mean bound needs x0 > m")
        commonness_upper = 2.0 * (math.log(x0) - math.log(m) + 1.0)

    rarity_lower = rarity_upper = None
    if eps is not None:
        if not 0 < x0 < eps:
            raise ValueError("rarity mean bounds need 0 < x0 < eps")
        if model.lam <= 1.0:
            raise ValueError("rarity mean bounds need a growing regime (lambda > 1)")
        if eps0 is None:
            eps0 = 2.0 * eps
        if eps0 <= eps:
            raise ValueError("eps0 must exceed eps")
        d = sup_log_growth(model, 0.0, eps)
        rarity_lower = (math.log(eps) - math.log(x0)) / d
        rarity_upper = 2.0 * (math.log(eps0) - math.log(x0)) / math.log(model.lam)

    return MeanTimeBounds(commonness_upper, rarity_lower, rarity_upper, eps0)


# ---------------------------------------------------------------------------
# regime classification

@dataclass(frozen=True)
class RegimeReport:
    lam: float
    label: str                      # transient | positive_recurrent | null_recurrent
    mean_return_finite: bool | None
    caveats: tuple[str, ...] = ()


def classify_regime(model: GrowthModel, spec: NoiseSpec) -> RegimeReport:
    """Transient / positive recurrent / null recurrent, with caveats.

    Declining regimes are transient; growing regimes are recurrent with a
    finite mean return time exactly when E[exp(Y)] is finite; the neutral
    regime is null recurrent provided the noise has a 2+d moment (the
    growth functions used here approach 1 fast enough automatically).
    """
    lam = model.lam
    caveats: list[str] = []
    if spec.is_degenerate():
        caveats.append("degenerate noise: stochastic classifications are out-of-hypothesis")
    if lam < 1.0:
        return RegimeReport(lam, "transient", None, tuple(caveats))
    if lam > 1.0:
        finite = spec.mgf(1.0) != INF
        label = "positive_recurrent" if finite else "null_recurrent"
        return RegimeReport(lam, label, finite, tuple(caveats))
    if spec.max_finite_moment() <= 2:
        caveats.append("neutral-regime tail law needs E|Y|^{2+d} < inf; not satisfied")
    return RegimeReport(lam, "null_recurrent", False, tuple(caveats))


def mgf_sup_exponent(spec: NoiseSpec) -> float:
    """sup{a >= 0 : E[exp(aY)] < inf}: governs the band-entry tail."""
    return spec.alpha_sup_pos()


def predicted_band_entry_exponent(spec: NoiseSpec) -> float:
    """Predicted survival exponent of the time to enter [eps, m] from
    outside; inf means no power tail (all moments finite)."""
    return spec.alpha_sup_pos()


# ---------------------------------------------------------------------------
# two-species escape classification

@dataclass(frozen=True)
class TwoSpeciesCase:
    case_label: str                 # case1 | case2 | case3 | conjectured_recurrent | degenerate
    margins: tuple[float, float]    # (r1*a21 - r2*a11, r1*a22 - r2*a12)
    eps_max: float | None           # largest eps keeping the case-defining margin strict
    escape_form: int | None         # 1 or 3: which escape functional applies
    transient: bool | None          # None when nothing is asserted


def classify_two_species(model: TwoSpeciesModel) -> TwoSpeciesCase:
    """Sign pattern of the cross margins decides the escape case.

    (+,+) -> case1, (+,-) -> case2, (-,-) -> case3; the remaining pattern
    is only conjectured recurrent and is labeled, never asserted.  Equal
    growth rates or a zero margin are degenerate (outside the theorem).
    """
    if model.r1 <= 0 or model.r2 <= 0:
        raise ValueError("two-species classification needs r1, r2 > 0")
    m1 = model.r1 * model.a21 - model.r2 * model.a11
    m2 = model.r1 * model.a22 - model.r2 * model.a12
    margins = (m1, m2)

    if model.r1 == model.r2 or m1 == 0.0 or m2 == 0.0:
        return TwoSpeciesCase("degenerate", margins, None, None, None)
    if m1 > 0 and m2 > 0:
        return TwoSpeciesCase("case1", margins, m1 / model.a21, 1, True)
    if m1 > 0 and m2 < 0:
        # escape functional follows the dominant species
        if model.r2 < model.r1:
            return TwoSpeciesCase("case2", margins, m1 / model.a21, 1, True)
        return TwoSpeciesCase("case2", margins, -m2 / model.a22, 3, True)
    if m1 < 0 and m2 < 0:
        return TwoSpeciesCase("case3", margins, -m2 / model.a22, 3, True)
    return TwoSpeciesCase("conjectured_recurrent", margins, None, None, None)
