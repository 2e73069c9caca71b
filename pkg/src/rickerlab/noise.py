"""Zero-mean environmental noise laws with exact analytic metadata.

Each law is an immutable dataclass that knows how to sample itself from a
numpy Generator and how to evaluate its moments, CDF and moment generating
function E[exp(a*Y)].  A divergent MGF is the value ``math.inf``, never an
error, so one-dimensional minimizers can treat it as an infinite objective.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

INF = math.inf

#: theorem identifiers accepted by :func:`check_assumptions`
THEOREM_IDS = (
    "T2.1a", "T2.1b", "T2.2", "T3.1", "T4.1", "T4.1-exp", "T4.2", "T5.1", "T6.1",
)


def _norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _safe_exp(x: float) -> float:
    """exp(x), reporting values beyond the float64 range as inf."""
    try:
        return math.exp(x)
    except OverflowError:
        return INF


@dataclass(frozen=True)
class NoiseSpec:
    """Base class for the noise laws; every variant has mean exactly 0."""

    def sample_block(self, gen: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def sample(self, gen: np.random.Generator) -> float:
        return float(self.sample_block(gen, 1)[0])

    def variance(self) -> float:
        raise NotImplementedError

    def mgf(self, alpha: float) -> float:
        """E[exp(alpha*Y)]; math.inf where the integral diverges."""
        raise NotImplementedError

    def cdf(self, y: float) -> float:
        raise NotImplementedError

    def interval_prob(self, lo: float, hi: float) -> float:
        """P(lo <= Y <= hi) for an interval, used by band-exit rates."""
        if hi < lo:
            return 0.0
        return max(0.0, self.cdf(hi) - self.cdf(lo))

    def alpha_sup_pos(self) -> float:
        """sup{a >= 0 : E[exp(a*Y)] < inf}."""
        raise NotImplementedError

    def alpha_sup_neg(self) -> float:
        """sup{a >= 0 : E[exp(-a*Y)] < inf}."""
        raise NotImplementedError

    def max_finite_moment(self) -> float:
        """sup{p > 0 : E|Y|^p < inf} (inf for all light-tailed variants)."""
        return INF

    def is_bounded(self) -> bool:
        return False

    def is_degenerate(self) -> bool:
        return False

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian(NoiseSpec):
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")

    def sample_block(self, gen, size):
        return gen.normal(0.0, self.sigma, size)

    def variance(self):
        return self.sigma ** 2

    def mgf(self, alpha):
        return _safe_exp(0.5 * (alpha * self.sigma) ** 2)

    def cdf(self, y):
        return _norm_cdf(y / self.sigma)

    def alpha_sup_pos(self):
        return INF

    def alpha_sup_neg(self):
        return INF

    def to_config(self):
        return {"type": "gaussian", "sigma": self.sigma}


@dataclass(frozen=True)
class ShiftedExponential(NoiseSpec):
    """Y = E - 1/rate with E ~ Exponential(rate); support [-1/rate, inf)."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be > 0")

    def sample_block(self, gen, size):
        return gen.exponential(1.0 / self.rate, size) - 1.0 / self.rate

    def variance(self):
        return 1.0 / self.rate ** 2

    def mgf(self, alpha):
        # rate/(rate-a) * exp(-a/rate), finite exactly for a < rate
        if alpha >= self.rate:
            return INF
        return self.rate / (self.rate - alpha) * _safe_exp(-alpha / self.rate)

    def cdf(self, y):
        t = y + 1.0 / self.rate
        if t <= 0:
            return 0.0
        return 1.0 - math.exp(-self.rate * t)

    def alpha_sup_pos(self):
        return self.rate

    def alpha_sup_neg(self):
        return INF

    def to_config(self):
        return {"type": "shifted_exponential", "rate": self.rate}


@functools.lru_cache(maxsize=256)
def _lognormal_neg_mgf(mu: float, sigma: float, alpha: float) -> float:
    """E[exp(alpha*(LN - E LN))] for alpha < 0, by adaptive quadrature.

    No closed form exists on the negative axis; the integral converges
    because exp(alpha*LN) <= 1.  Quadrature error is driven far below the
    uses made of the value (rate-bound minimization).  Values beyond the
    float64 range (|alpha|*shift >~ 700) are reported as inf.
    """
    shift = math.exp(mu + 0.5 * sigma * sigma)
    if -alpha * shift > 700.0:
        return INF

    def integrand(z):
        t = mu + sigma * z
        if t > 700.0:
            return 0.0   # exp(alpha * huge) underflows for alpha < 0
        e = alpha * (math.exp(t) - shift)
        if e < -745.0:
            return 0.0
        return math.exp(e) * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    val, _ = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-11, limit=400)
    return val


@dataclass(frozen=True)
class CenteredLogNormal(NoiseSpec):
    """Y = LN(mu, sigma) - exp(mu + sigma^2/2); support (-shift, inf)."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")

    @property
    def shift(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma ** 2)

    def sample_block(self, gen, size):
        return gen.lognormal(self.mu, self.sigma, size) - self.shift

    def variance(self):
        s2 = self.sigma ** 2
        return (math.exp(s2) - 1.0) * math.exp(2.0 * self.mu + s2)

    def mgf(self, alpha):
        if alpha == 0.0:
            return 1.0
        if alpha > 0.0:
            return INF
        return _lognormal_neg_mgf(self.mu, self.sigma, alpha)

    def cdf(self, y):
        t = y + self.shift
        if t <= 0:
            return 0.0
        return _norm_cdf((math.log(t) - self.mu) / self.sigma)

    def alpha_sup_pos(self):
        return 0.0

    def alpha_sup_neg(self):
        return INF

    def to_config(self):
        return {"type": "centered_lognormal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class SymmetricPareto(NoiseSpec):
    """Two-sided Pareto: P(|Y| > t) = (scale/t)^tail_index, sign fair coin.

    Sampled by inverse CDF so the tail index is exact by construction;
    E|Y|^p < inf iff p < tail_index.  Zero mean by symmetry (tail_index > 1).
    """

    tail_index: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.tail_index > 1:
            raise ValueError("tail_index must be > 1 (zero mean requires an integrable tail)")
        if not self.scale > 0:
            raise ValueError("scale must be > 0")

    def sample_block(self, gen, size):
        mag = self.scale * (1.0 - gen.random(size)) ** (-1.0 / self.tail_index)
        sign = np.where(gen.random(size) < 0.5, -1.0, 1.0)
        return sign * mag

    def variance(self):
        if self.tail_index <= 2:
            return INF
        return self.tail_index * self.scale ** 2 / (self.tail_index - 2.0)

    def mgf(self, alpha):
        return 1.0 if alpha == 0.0 else INF

    def cdf(self, y):
        if y <= -self.scale:
            return 0.5 * (self.scale / -y) ** self.tail_index
        if y < self.scale:
            return 0.5
        return 1.0 - 0.5 * (self.scale / y) ** self.tail_index

    def alpha_sup_pos(self):
        return 0.0

    def alpha_sup_neg(self):
        return 0.0

    def max_finite_moment(self):
        return self.tail_index

    def to_config(self):
        return {"type": "symmetric_pareto", "tail_index": self.tail_index, "scale": self.scale}


@dataclass(frozen=True)
class UniformCentered(NoiseSpec):
    half_width: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be > 0")

    def sample_block(self, gen, size):
        return gen.uniform(-self.half_width, self.half_width, size)

    def variance(self):
        return self.half_width ** 2 / 3.0

    def mgf(self, alpha):
        x = alpha * self.half_width
        if abs(x) < 1e-8:
            return 1.0 + x * x / 6.0
        if abs(x) > 700.0:
            return INF
        return math.sinh(x) / x

    def cdf(self, y):
        return min(1.0, max(0.0, (y + self.half_width) / (2.0 * self.half_width)))

    def alpha_sup_pos(self):
        return INF

    def alpha_sup_neg(self):
        return INF

    def is_bounded(self):
        return True

    def to_config(self):
        return {"type": "uniform", "half_width": self.half_width}


@dataclass(frozen=True)
class Dirac0(NoiseSpec):
    """Y identically 0: the deterministic oracle mode.

    Deliberately violates the unbounded-noise hypotheses; assumption checks
    flag every theorem as out-of-hypothesis under it.
    """

    def sample_block(self, gen, size):
        return np.zeros(size)

    def variance(self):
        return 0.0

    def mgf(self, alpha):
        return 1.0

    def cdf(self, y):
        return 1.0 if y >= 0 else 0.0

    def interval_prob(self, lo, hi):
        return 1.0 if lo <= 0.0 <= hi else 0.0

    def alpha_sup_pos(self):
        return INF

    def alpha_sup_neg(self):
        return INF

    def is_bounded(self):
        return True

    def is_degenerate(self):
        return True

    def to_config(self):
        return {"type": "dirac0"}


def sample_noise(spec: NoiseSpec, gen: np.random.Generator) -> float:
    """One draw of Y; advancing the generator is the only side effect."""
    return spec.sample(gen)


def noise_mgf(spec: NoiseSpec, alpha: float) -> float:
    """E[exp(alpha*Y)] in closed form (quadrature for the log-normal's
    negative axis); math.inf when divergent."""
    return spec.mgf(alpha)


@dataclass(frozen=True)
class AssumptionReport:
    theorem_id: str
    passed: bool
    failures: tuple[str, ...] = ()

    @property
    def out_of_hypothesis(self) -> bool:
        return not self.passed


def check_assumptions(spec: NoiseSpec, theorem_id: str) -> AssumptionReport:
    """Noise-side hypothesis check for one theorem.

    Failures label the run "out-of-hypothesis"; they never block it.
    Model-side conditions (sign of the growth regime, threshold geometry)
    are validated where the model is known, not here.
    """
    if theorem_id not in THEOREM_IDS:
        raise ValueError(f"unknown theorem id {theorem_id!r}, expected one of {THEOREM_IDS}")

    failures: list[str] = []
    if spec.is_degenerate():
        failures.append("noise is degenerate (point mass at 0, deterministic oracle mode)")
    if spec.max_finite_moment() <= 1:
        failures.append("E|Y|^{1+d} infinite for every d > 0")

    if theorem_id == "T2.1b" and spec.alpha_sup_pos() <= 0:
        failures.append("no positive exponential moment: E[exp(aY)] = inf for every a > 0")
    if theorem_id == "T2.2" and spec.is_bounded() and not spec.is_degenerate():
        failures.append("noise uniformly bounded")
    if theorem_id == "T4.1-exp" and spec.alpha_sup_neg() <= 0:
        failures.append("no negative-side exponential moment: E[exp(-aY)] = inf for every a > 0")
    if theorem_id in ("T5.1", "T6.1") and spec.max_finite_moment() <= 2:
        failures.append("second-plus moment infinite: E|Y|^{2+d} = inf for every d > 0")

    return AssumptionReport(theorem_id, passed=not failures, failures=tuple(failures))


_NOISE_TYPES = {
    "gaussian": (Gaussian, ("sigma",)),
    "shifted_exponential": (ShiftedExponential, ("rate",)),
    "centered_lognormal": (CenteredLogNormal, ("mu", "sigma")),
    "symmetric_pareto": (SymmetricPareto, ("tail_index", "scale")),
    "uniform": (UniformCentered, ("half_width",)),
    "dirac0": (Dirac0, ()),
}


def noise_from_config(record: dict) -> NoiseSpec:
    """Build a law from a tagged config record, e.g. {"type": "gaussian", "sigma": 1.0}."""
    if not isinstance(record, dict) or "type" not in record:
        raise ValueError("noise record must be a dict with a 'type' tag")
    tag = record["type"]
    if tag not in _NOISE_TYPES:
        raise ValueError(f"unknown noise type {tag!r}, expected one of {sorted(_NOISE_TYPES)}")
    cls, fields = _NOISE_TYPES[tag]
    extra = set(record) - {"type", *fields}
    if extra:
        raise ValueError(f"unknown keys for noise type {tag!r}: {sorted(extra)}")
    kwargs = {}
    for name in fields:
        if name in record:
            kwargs[name] = float(record[name])
    return cls(**kwargs)
