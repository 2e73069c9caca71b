"""Log-space dynamics of the noisy overcompensatory population map.

The chain multiplies density by exp(noise), so raw density overflows under
heavy-tailed noise; all state here is L = ln(density).  One step is
``L' = L + ln f(exp(L)) + y`` and is exact: an overflowing exp(L) yields an
increment of -inf, i.e. the trajectory is tagged numerically extinct rather
than producing NaNs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .noise import NoiseSpec
from .rng import pair_stream, stream_generator, trajectory_stream

#: log-density below which a trajectory counts as numerically extinct
LOG_FLOOR = -1.0e6


@dataclass(frozen=True)
class Ricker:
    """ln f(x) = r - a*x; growth factor from rarity is exp(r)."""

    r: float
    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be > 0 (the unregulated walk is a test-only limit)")

    @property
    def lam(self) -> float:
        return math.exp(self.r)

    def log_growth(self, x: float) -> float:
        return self.r - self.a * x

    def log_growth_arr(self, x: np.ndarray) -> np.ndarray:
        return self.r - self.a * x

    def to_config(self) -> dict:
        return {"type": "ricker", "r": self.r, "a": self.a}


@dataclass(frozen=True)
class PerturbedRicker:
    """ln f(x) = r - a*x + c/(1+x): same tail as Ricker, different shape near 0.

    The decaying correction exercises results that hold for any growth
    function with the Ricker tail, not just the exact exponential form.
    """

    r: float
    a: float
    c: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be > 0")

    @property
    def lam(self) -> float:
        return math.exp(self.r + self.c)

    def log_growth(self, x: float) -> float:
        return self.r - self.a * x + self.c / (1.0 + x)

    def log_growth_arr(self, x: np.ndarray) -> np.ndarray:
        return self.r - self.a * x + self.c / (1.0 + x)

    def to_config(self) -> dict:
        return {"type": "perturbed_ricker", "r": self.r, "a": self.a, "c": self.c}


GrowthModel = Ricker | PerturbedRicker


def regime_tag(model: GrowthModel) -> str:
    lam = model.lam
    if lam < 1.0:
        return "declining"
    if lam == 1.0:
        return "neutral"
    return "growing"


def log_increment_arr(model: GrowthModel, L: np.ndarray) -> np.ndarray:
    """ln f(exp(L)) vectorized; the shared kernel for every stepping path."""
    with np.errstate(over="ignore"):
        return model.log_growth_arr(np.exp(L))


def step_log(model: GrowthModel, L: float, y: float) -> float:
    """One exact log-space step L' = L + ln f(e^L) + y."""
    return float(L + log_increment_arr(model, np.array([L]))[0] + y)


def is_extinct(L: float, log_floor: float = LOG_FLOOR) -> bool:
    return L < log_floor


def simulate_trajectory(model: GrowthModel, spec: NoiseSpec, L0: float,
                        n_steps: int, master_seed: int, stream: int,
                        batch_index: int = 0, chunk: int = 1024) -> np.ndarray:
    """Log-density path of length n_steps+1 from the given stream.

    Identical (model, spec, L0, n_steps, seed, stream) inputs produce an
    identical array; the noise is consumed in the same order as the batch
    hitting sampler, so replaying a trajectory reproduces its outcome.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    gen = stream_generator(master_seed, trajectory_stream(batch_index, stream))
    out = np.empty(n_steps + 1)
    out[0] = L0
    L = np.array([float(L0)])
    done = 0
    while done < n_steps:
        take = min(chunk, n_steps - done)
        y = spec.sample_block(gen, take)
        for t in range(take):
            L = L + log_increment_arr(model, L) + y[t]
            out[done + t + 1] = L[0]
        done += take
    return out


@dataclass(frozen=True)
class TwoSpeciesModel:
    """Two competing populations with cross- and self-regulation.

    X1' = X1 * exp(r1 - a11*X1 - a12*X2 + Y1)
    X2' = X2 * exp(r2 - a21*X1 - a22*X2 + Y2)
    """

    r1: float
    r2: float
    a11: float
    a12: float
    a21: float
    a22: float
    noise1: NoiseSpec
    noise2: NoiseSpec

    def __post_init__(self):
        for name in ("a11", "a12", "a21", "a22"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    def to_config(self) -> dict:
        return {
            "r1": self.r1, "r2": self.r2,
            "a11": self.a11, "a12": self.a12, "a21": self.a21, "a22": self.a22,
            "noise1": self.noise1.to_config(), "noise2": self.noise2.to_config(),
        }


def pair_increments(model: TwoSpeciesModel, L1: np.ndarray, L2: np.ndarray):
    """Noise-free log increments for both species, from the current state."""
    with np.errstate(over="ignore"):
        x1 = np.exp(L1)
        x2 = np.exp(L2)
    d1 = model.r1 - model.a11 * x1 - model.a12 * x2
    d2 = model.r2 - model.a21 * x1 - model.a22 * x2
    return d1, d2


def step2_log(model: TwoSpeciesModel, L1: float, L2: float,
              y1: float, y2: float) -> tuple[float, float]:
    """One exact log-space step of the two-species chain."""
    d1, d2 = pair_increments(model, np.array([L1]), np.array([L2]))
    return float(L1 + d1[0] + y1), float(L2 + d2[0] + y2)


def simulate_pair(model: TwoSpeciesModel, L10: float, L20: float,
                  n_steps: int, master_seed: int, trajectory: int,
                  batch_index: int = 0, chunk: int = 1024):
    """Paths (n_steps+1,) for both species; species s uses stream 2*traj+s."""
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    g1 = stream_generator(master_seed, pair_stream(batch_index, trajectory, 0))
    g2 = stream_generator(master_seed, pair_stream(batch_index, trajectory, 1))
    out1 = np.empty(n_steps + 1)
    out2 = np.empty(n_steps + 1)
    out1[0], out2[0] = L10, L20
    L1 = np.array([float(L10)])
    L2 = np.array([float(L20)])
    done = 0
    while done < n_steps:
        take = min(chunk, n_steps - done)
        y1 = model.noise1.sample_block(g1, take)
        y2 = model.noise2.sample_block(g2, take)
        for t in range(take):
            d1, d2 = pair_increments(model, L1, L2)
            L1 = L1 + d1 + y1[t]
            L2 = L2 + d2 + y2[t]
            out1[done + t + 1] = L1[0]
            out2[done + t + 1] = L2[0]
        done += take
    return out1, out2


def model_from_config(record: dict) -> GrowthModel:
    if not isinstance(record, dict) or "type" not in record:
        raise ValueError("model record must be a dict with a 'type' tag")
    tag = record["type"]
    if tag == "ricker":
        allowed = {"type", "r", "a"}
        if set(record) - allowed:
            raise ValueError(f"unknown keys for ricker model: {sorted(set(record) - allowed)}")
        return Ricker(r=float(record["r"]), a=float(record["a"]))
    if tag == "perturbed_ricker":
        allowed = {"type", "r", "a", "c"}
        if set(record) - allowed:
            raise ValueError(f"unknown keys for perturbed_ricker model: {sorted(set(record) - allowed)}")
        return PerturbedRicker(r=float(record["r"]), a=float(record["a"]), c=float(record["c"]))
    raise ValueError(f"unknown model type {tag!r}")
