"""Hitting/exit time sampling with explicit horizon censoring.

Trajectories are advanced in vectorized cohorts (one numpy op per step
across the cohort) while each trajectory keeps its own noise stream, so
results are independent of cohort size and worker count.  Every outcome is
a hit at step n >= 1, a censoring at the horizon, or a numerical extinction
(log-density under the floor).
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import (LOG_FLOOR, GrowthModel, TwoSpeciesModel,
                       log_increment_arr, pair_increments)
from .noise import NoiseSpec
from .rng import StreamPool, pair_stream, trajectory_stream

HIT, CENSORED, EXTINCT = 0, 1, 2
KIND_NAMES = ("hit", "censored", "extinct")

_COHORT = 4096
_CHUNKS = (16, 64, 256, 1024)


# ---------------------------------------------------------------------------
# regions

@dataclass(frozen=True)
class Rarity:
    """Densities in ]0, eps[; the exit is the first step with X >= eps."""

    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be > 0")

    def exit_mask(self, L: np.ndarray) -> np.ndarray:
        return L >= math.log(self.eps)

    def validate_x0(self, x0: float):
        if not 0 < x0 < self.eps:
            raise ValueError(f"x0={x0} must start inside the rarity region: 0 < x0 < eps={self.eps}")

    def to_config(self):
        return {"type": "rarity", "eps": self.eps}


@dataclass(frozen=True)
class Commonness:
    """Densities in ]m, inf[; the exit is the first step with X <= m."""

    m: float

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("m must be > 0")

    def exit_mask(self, L: np.ndarray) -> np.ndarray:
        return L <= math.log(self.m)

    def validate_x0(self, x0: float):
        if not x0 > self.m:
            raise ValueError(f"x0={x0} must start inside the commonness region: x0 > m={self.m}")

    def to_config(self):
        return {"type": "commonness", "m": self.m}


@dataclass(frozen=True)
class MediumBand:
    """Densities in [eps, m]; the exit is the first step strictly outside."""

    eps: float
    m: float

    def __post_init__(self):
        if not 0 < self.eps < self.m:
            raise ValueError("need 0 < eps < m")

    def exit_mask(self, L: np.ndarray) -> np.ndarray:
        return (L < math.log(self.eps)) | (L > math.log(self.m))

    def validate_x0(self, x0: float):
        if not self.eps <= x0 <= self.m:
            raise ValueError(f"x0={x0} must start inside the band [{self.eps}, {self.m}]")

    def to_config(self):
        return {"type": "medium_band", "eps": self.eps, "m": self.m}


@dataclass(frozen=True)
class Extremes:
    """Densities outside [eps, m]; the exit is the first entry into the band."""

    eps: float
    m: float

    def __post_init__(self):
        if not 0 < self.eps < self.m:
            raise ValueError("need 0 < eps < m")

    def exit_mask(self, L: np.ndarray) -> np.ndarray:
        return (L >= math.log(self.eps)) & (L <= math.log(self.m))

    def validate_x0(self, x0: float):
        if not x0 > 0 or self.eps <= x0 <= self.m:
            raise ValueError(f"x0={x0} must start outside the band [{self.eps}, {self.m}]")

    def to_config(self):
        return {"type": "extremes", "eps": self.eps, "m": self.m}


Region = Rarity | Commonness | MediumBand | Extremes


def region_from_config(record: dict) -> Region:
    if not isinstance(record, dict) or "type" not in record:
        raise ValueError("region record must be a dict with a 'type' tag")
    tag = record.get("type")
    try:
        if tag == "rarity":
            return Rarity(eps=float(record["eps"]))
        if tag == "commonness":
            return Commonness(m=float(record["m"]))
        if tag == "medium_band":
            return MediumBand(eps=float(record["eps"]), m=float(record["m"]))
        if tag == "extremes":
            return Extremes(eps=float(record["eps"]), m=float(record["m"]))
    except KeyError as exc:
        raise ValueError(f"region type {tag!r} is missing key {exc}") from exc
    raise ValueError(f"unknown region type {tag!r}")


# ---------------------------------------------------------------------------
# outcomes

@dataclass(frozen=True)
class HittingOutcome:
    kind: str   # "hit" | "censored" | "extinct"
    n: int      # hit step (>= 1), the horizon, or the extinction step

    @classmethod
    def hit(cls, n: int):
        return cls("hit", n)

    @classmethod
    def censored(cls, horizon: int):
        return cls("censored", horizon)

    @classmethod
    def extinct(cls, n: int):
        return cls("extinct", n)

    @property
    def is_hit(self) -> bool:
        return self.kind == "hit"


@dataclass
class HittingBatch:
    """Multiset of outcomes stored column-wise (one row per trajectory)."""

    kinds: np.ndarray      # uint8: HIT/CENSORED/EXTINCT
    times: np.ndarray      # int64
    final_log: np.ndarray  # log-density when the trajectory resolved
    horizon: int
    master_seed: int

    def __len__(self):
        return len(self.kinds)

    @property
    def n_hit(self) -> int:
        return int((self.kinds == HIT).sum())

    @property
    def n_censored(self) -> int:
        return int((self.kinds == CENSORED).sum())

    @property
    def n_extinct(self) -> int:
        return int((self.kinds == EXTINCT).sum())

    @property
    def hit_times(self) -> np.ndarray:
        return self.times[self.kinds == HIT]

    def outcomes(self) -> list[HittingOutcome]:
        return [HittingOutcome(KIND_NAMES[k], int(n)) for k, n in zip(self.kinds, self.times)]

    def outcome(self, i: int) -> HittingOutcome:
        return HittingOutcome(KIND_NAMES[self.kinds[i]], int(self.times[i]))


def write_samples_csv(path, batch: HittingBatch):
    """Persist raw outcomes: trajectory_index,outcome,n."""
    with open(path, "w", newline="") as fh:
        fh.write("trajectory_index,outcome,n\n")
        for i, (k, n) in enumerate(zip(batch.kinds, batch.times)):
            fh.write(f"{i},{KIND_NAMES[k]},{n}\n")


def read_samples_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """(kinds, times) from a samples CSV written by :func:`write_samples_csv`."""
    kinds, times = [], []
    code = {name: i for i, name in enumerate(KIND_NAMES)}
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["trajectory_index", "outcome", "n"]:
            raise ValueError(f"unexpected samples CSV header: {header}")
        for line in fh:
            _, outcome, n = line.strip().split(",")[:3]
            kinds.append(code[outcome])
            times.append(int(n))
    return np.array(kinds, np.uint8), np.array(times, np.int64)


# ---------------------------------------------------------------------------
# single-species engine

def _chunk_schedule(horizon: int):
    for c in _CHUNKS:
        yield c
    while True:
        yield _CHUNKS[-1]


def _run_cohort(model: GrowthModel, spec: NoiseSpec, L0: float, region: Region,
                horizon: int, master_seed: int, batch_index: int,
                lo: int, n: int, log_floor: float, pool: StreamPool):
    kinds = np.full(n, CENSORED, np.uint8)
    times = np.full(n, horizon, np.int64)
    flog = np.full(n, np.nan)

    gens = [pool.reset(i, master_seed, trajectory_stream(batch_index, lo + i))
            for i in range(n)]
    L = np.full(n, float(L0))
    pos = np.arange(n)
    alive = np.ones(n, bool)
    steps = 0
    sched = _chunk_schedule(horizon)

    while steps < horizon:
        if not alive.all():
            keep = np.nonzero(alive)[0]
            if keep.size == 0:
                break
            L = L[keep]
            pos = pos[keep]
            gens = [gens[i] for i in keep]
            alive = np.ones(keep.size, bool)
        chunk = min(next(sched), horizon - steps)
        y = np.empty((pos.size, chunk))
        for row in range(pos.size):
            y[row] = spec.sample_block(gens[row], chunk)
        for t in range(chunk):
            L += log_increment_arr(model, L)
            L += y[:, t]
            exited = region.exit_mask(L) & alive
            died = (L < log_floor) & alive & ~exited
            newly = exited | died
            if newly.any():
                rows = np.nonzero(newly)[0]
                p = pos[rows]
                kinds[p] = np.where(exited[rows], HIT, EXTINCT).astype(np.uint8)
                times[p] = steps + t + 1
                flog[p] = L[rows]
                alive[rows] = False
                if not alive.any():
                    break
        steps += chunk

    live = np.nonzero(alive)[0]
    if live.size:
        flog[pos[live]] = L[live]
    return kinds, times, flog


def sample_hitting_time(model: GrowthModel, spec: NoiseSpec, x0: float,
                        region: Region, horizon: int, master_seed: int,
                        stream: int, batch_index: int = 0,
                        log_floor: float = LOG_FLOOR) -> HittingOutcome:
    """First step n >= 1 at which the chain leaves the region, or censoring.

    x0 must start strictly inside the region; the step loop and the
    membership tests run on log-density.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    region.validate_x0(x0)
    kinds, times, _ = _run_cohort(model, spec, math.log(x0), region, horizon,
                                  master_seed, batch_index, stream, 1, log_floor,
                                  StreamPool(1))
    return HittingOutcome(KIND_NAMES[kinds[0]], int(times[0]))


def batch_hitting(model: GrowthModel, spec: NoiseSpec, x0: float, region: Region,
                  horizon: int, n_traj: int, master_seed: int, workers: int = 1,
                  batch_index: int = 0, log_floor: float = LOG_FLOOR) -> HittingBatch:
    """n_traj independent outcomes on streams 0..n_traj-1.

    Cohort boundaries are fixed, so the result is byte-for-byte identical
    for any worker count; aggregation is keyed by trajectory index.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    region.validate_x0(x0)
    L0 = math.log(x0)

    kinds = np.empty(n_traj, np.uint8)
    times = np.empty(n_traj, np.int64)
    flog = np.empty(n_traj)
    jobs = [(lo, min(_COHORT, n_traj - lo)) for lo in range(0, n_traj, _COHORT)]
    pools = threading.local()

    def run(job):
        lo, n = job
        pool = getattr(pools, "pool", None)
        if pool is None or len(pool) < n:
            pool = pools.pool = StreamPool(min(_COHORT, n_traj))
        return lo, n, _run_cohort(model, spec, L0, region, horizon,
                                  master_seed, batch_index, lo, n, log_floor, pool)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    for lo, n, (k, t, f) in results:
        kinds[lo:lo + n] = k
        times[lo:lo + n] = t
        flog[lo:lo + n] = f
    return HittingBatch(kinds, times, flog, horizon, master_seed)


# ---------------------------------------------------------------------------
# two-species escape functional

@dataclass(frozen=True)
class TauSpec:
    """Escape functional W = r2*ln(X1) - (r1 -+ eps_margin)*ln(X2).

    Form 1 watches for W dropping below the threshold (started above it);
    form 3 watches for W rising above it (started below).  A censored
    outcome at a large horizon is the Monte Carlo evidence that the
    crossing never happens.
    """

    form: int
    eps_margin: float
    threshold: float

    def __post_init__(self):
        if self.form not in (1, 3):
            raise ValueError("escape functional form must be 1 or 3")
        if not self.eps_margin > 0:
            raise ValueError("eps_margin must be > 0")

    def coefficients(self, model: TwoSpeciesModel) -> tuple[float, float]:
        c2 = model.r1 - self.eps_margin if self.form == 1 else model.r1 + self.eps_margin
        return model.r2, c2

    def value(self, model: TwoSpeciesModel, L1, L2):
        c1, c2 = self.coefficients(model)
        return c1 * L1 - c2 * L2

    def exit_mask(self, W: np.ndarray) -> np.ndarray:
        if self.form == 1:
            return W < self.threshold
        return W > self.threshold

    def validate(self, model: TwoSpeciesModel, x10: float, x20: float):
        if self.form == 1:
            margin = (model.r1 - self.eps_margin) * model.a21 - model.r2 * model.a11
            if margin <= 0:
                raise ValueError(
                    f"form-1 escape needs (r1 - eps)*a21 - r2*a11 > 0, got {margin}")
        else:
            margin = (model.r1 + self.eps_margin) * model.a22 - model.r2 * model.a12
            if margin >= 0:
                raise ValueError(
                    f"form-3 escape needs (r1 + eps)*a22 - r2*a12 < 0, got {margin}")
        w0 = self.value(model, math.log(x10), math.log(x20))
        if self.form == 1 and not w0 > self.threshold:
            raise ValueError(f"functional must start above the threshold: W0={w0} <= {self.threshold}")
        if self.form == 3 and not w0 < self.threshold:
            raise ValueError(f"functional must start below the threshold: W0={w0} >= {self.threshold}")

    def to_config(self):
        return {"form": self.form, "eps_margin": self.eps_margin, "threshold": self.threshold}


@dataclass
class TwoSpeciesBatch:
    """Per-trajectory escape outcome, plus an optional species-1 region exit."""

    tau: HittingBatch
    species1: HittingBatch | None
    final_log1: np.ndarray
    final_log2: np.ndarray


def _run_pair_cohort(model: TwoSpeciesModel, L10: float, L20: float, tau: TauSpec,
                     region1, horizon: int, master_seed: int, batch_index: int,
                     lo: int, n: int, log_floor: float, pool: StreamPool):
    t_kinds = np.full(n, CENSORED, np.uint8)
    t_times = np.full(n, horizon, np.int64)
    r_kinds = np.full(n, CENSORED, np.uint8) if region1 is not None else None
    r_times = np.full(n, horizon, np.int64) if region1 is not None else None
    f1 = np.full(n, np.nan)
    f2 = np.full(n, np.nan)

    g1 = [pool.reset(2 * i, master_seed, pair_stream(batch_index, lo + i, 0)) for i in range(n)]
    g2 = [pool.reset(2 * i + 1, master_seed, pair_stream(batch_index, lo + i, 1)) for i in range(n)]
    L1 = np.full(n, float(L10))
    L2 = np.full(n, float(L20))
    pos = np.arange(n)
    alive = np.ones(n, bool)                    # trajectory still advancing
    tau_open = np.ones(n, bool)                 # tau crossing not seen yet
    r_open = np.ones(n, bool)                   # region exit not seen yet
    steps = 0
    sched = _chunk_schedule(horizon)

    while steps < horizon:
        if not alive.all():
            keep = np.nonzero(alive)[0]
            if keep.size == 0:
                break
            L1, L2 = L1[keep], L2[keep]
            pos = pos[keep]
            tau_open, r_open = tau_open[keep], r_open[keep]
            g1 = [g1[i] for i in keep]
            g2 = [g2[i] for i in keep]
            alive = np.ones(keep.size, bool)
        chunk = min(next(sched), horizon - steps)
        y1 = np.empty((pos.size, chunk))
        y2 = np.empty((pos.size, chunk))
        for row in range(pos.size):
            y1[row] = model.noise1.sample_block(g1[row], chunk)
            y2[row] = model.noise2.sample_block(g2[row], chunk)
        for t in range(chunk):
            d1, d2 = pair_increments(model, L1, L2)
            L1 += d1
            L1 += y1[:, t]
            L2 += d2
            L2 += y2[:, t]
            step_n = steps + t + 1

            died = ((L1 < log_floor) | (L2 < log_floor)) & alive
            with np.errstate(invalid="ignore"):
                W = tau.value(model, L1, L2)
                tau_hit = tau.exit_mask(W) & alive & tau_open & ~died
                r_hit = (region1.exit_mask(L1) & alive & r_open & ~died) \
                    if region1 is not None else None

            if tau_hit.any():
                rows = np.nonzero(tau_hit)[0]
                p = pos[rows]
                t_kinds[p] = HIT
                t_times[p] = step_n
                tau_open[rows] = False
            if region1 is not None and r_hit.any():
                rows = np.nonzero(r_hit)[0]
                p = pos[rows]
                r_kinds[p] = HIT
                r_times[p] = step_n
                r_open[rows] = False
            if died.any():
                rows = np.nonzero(died)[0]
                p = pos[rows]
                open_tau = rows[tau_open[rows]]
                t_kinds[pos[open_tau]] = EXTINCT
                t_times[pos[open_tau]] = step_n
                tau_open[open_tau] = False
                if region1 is not None:
                    open_r = rows[r_open[rows]]
                    r_kinds[pos[open_r]] = EXTINCT
                    r_times[pos[open_r]] = step_n
                    r_open[open_r] = False

            resolved = ~tau_open & (~r_open if region1 is not None else True)
            finished = (resolved | died) & alive
            if finished.any():
                rows = np.nonzero(finished)[0]
                p = pos[rows]
                f1[p] = L1[rows]
                f2[p] = L2[rows]
                alive[rows] = False
                if not alive.any():
                    break
        steps += chunk

    live = np.nonzero(alive)[0]
    if live.size:
        f1[pos[live]] = L1[live]
        f2[pos[live]] = L2[live]
    return t_kinds, t_times, r_kinds, r_times, f1, f2


def batch_two_species(model: TwoSpeciesModel, x0_pair: tuple[float, float],
                      tau: TauSpec, horizon: int, n_traj: int, master_seed: int,
                      region1: Region | None = None, workers: int = 1,
                      batch_index: int = 0, log_floor: float = LOG_FLOOR) -> TwoSpeciesBatch:
    """Escape-functional outcomes (and optional species-1 exits) for n_traj streams."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    x10, x20 = x0_pair
    if not (x10 > 0 and x20 > 0):
        raise ValueError("both starting densities must be > 0")
    tau.validate(model, x10, x20)
    if region1 is not None:
        region1.validate_x0(x10)
    L10, L20 = math.log(x10), math.log(x20)

    t_kinds = np.empty(n_traj, np.uint8)
    t_times = np.empty(n_traj, np.int64)
    r_kinds = np.empty(n_traj, np.uint8) if region1 is not None else None
    r_times = np.empty(n_traj, np.int64) if region1 is not None else None
    f1 = np.empty(n_traj)
    f2 = np.empty(n_traj)
    jobs = [(lo, min(_COHORT, n_traj - lo)) for lo in range(0, n_traj, _COHORT)]
    pools = threading.local()

    def run(job):
        lo, n = job
        pool = getattr(pools, "pool", None)
        if pool is None or len(pool) < 2 * n:
            pool = pools.pool = StreamPool(2 * min(_COHORT, n_traj))
        return lo, n, _run_pair_cohort(model, L10, L20, tau, region1, horizon,
                                       master_seed, batch_index, lo, n, log_floor, pool)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    for lo, n, (tk, tt, rk, rt, a, b) in results:
        t_kinds[lo:lo + n] = tk
        t_times[lo:lo + n] = tt
        if region1 is not None:
            r_kinds[lo:lo + n] = rk
            r_times[lo:lo + n] = rt
        f1[lo:lo + n] = a
        f2[lo:lo + n] = b

    tau_batch = HittingBatch(t_kinds, t_times, f1.copy(), horizon, master_seed)
    sp1 = HittingBatch(r_kinds, r_times, f1.copy(), horizon, master_seed) \
        if region1 is not None else None
    return TwoSpeciesBatch(tau_batch, sp1, f1, f2)


def sample_tau_m(model: TwoSpeciesModel, x0_pair: tuple[float, float],
                 eps_margin: float, threshold: float, horizon: int,
                 master_seed: int, trajectory: int, form: int = 1,
                 batch_index: int = 0, log_floor: float = LOG_FLOOR) -> HittingOutcome:
    """First step at which the escape functional crosses the threshold.

    The margin condition for the selected form and the starting side of the
    functional are validated; mismatches are rejected configurations.
    """
    tau = TauSpec(form=form, eps_margin=eps_margin, threshold=threshold)
    x10, x20 = x0_pair
    if not (x10 > 0 and x20 > 0):
        raise ValueError("both starting densities must be > 0")
    tau.validate(model, x10, x20)
    t_kinds, t_times, *_ = _run_pair_cohort(
        model, math.log(x10), math.log(x20), tau, None, horizon,
        master_seed, batch_index, trajectory, 1, log_floor, StreamPool(2))
    return HittingOutcome(KIND_NAMES[t_kinds[0]], int(t_times[0]))
