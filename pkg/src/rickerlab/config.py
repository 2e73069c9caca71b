"""Experiment configuration: parsing, validation, presets.

Configs are JSON documents.  Validation reports every problem found, not
just the first, and rejects configurations whose starting state violates
the region or escape-functional preconditions.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .dynamics import GrowthModel, TwoSpeciesModel, model_from_config
from .hitting import Region, TauSpec, region_from_config
from .noise import NoiseSpec, noise_from_config


class ConfigError(ValueError):
    """Carries the full list of validation errors."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid experiment config:\n  - " + "\n  - ".join(self.errors))


DEFAULT_HORIZON = 100_000

_TOP_KEYS = {
    "scenario_id", "kind", "model", "noise", "region", "x0", "horizon",
    "n_traj", "master_seed", "workers", "theorem", "estimators", "theory",
    "tau", "stages", "out_dir",
}
_ESTIMATOR_KEYS = {"hill_k", "tail_top", "excess_shift", "s_hi", "s_lo", "exp_fit_window"}
_THEORY_KEYS = {"eps0"}


@dataclass
class EstimatorOptions:
    hill_k: int | str = "auto"
    tail_top: int | None = None
    excess_shift: float | str | None = None
    s_hi: float = 0.2
    s_lo: float | None = None
    exp_fit_window: tuple[int, int] | None = None


@dataclass
class Stage:
    """One starting condition of a two-species scenario."""

    x0_pair: tuple[float, float]
    region: Region | None = None
    region_species: int = 1


@dataclass
class ExperimentConfig:
    scenario_id: str
    kind: str                            # "one_species" | "two_species"
    raw: dict = field(repr=False, default_factory=dict)
    # one-species
    model: GrowthModel | None = None
    noise: NoiseSpec | None = None
    region: Region | None = None
    x0_list: tuple[float, ...] = ()
    # two-species
    two_model: TwoSpeciesModel | None = None
    tau: TauSpec | None = None
    stages: tuple[Stage, ...] = ()
    # shared
    horizon: int = DEFAULT_HORIZON
    n_traj: int = 1000
    master_seed: int = 0
    workers: int = 1
    theorem: str | None = None
    estimators: EstimatorOptions = field(default_factory=EstimatorOptions)
    eps0: float | None = None
    out_dir: str = "results"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()[:16]


def _validate_common(doc: dict, errors: list[str]) -> dict:
    out = {}
    out["horizon"] = doc.get("horizon", DEFAULT_HORIZON)
    if not (isinstance(out["horizon"], int) and out["horizon"] >= 1):
        errors.append(f"horizon must be an integer >= 1, got {out['horizon']!r}")
    out["n_traj"] = doc.get("n_traj", 1000)
    if not (isinstance(out["n_traj"], int) and out["n_traj"] >= 1):
        errors.append(f"n_traj must be an integer >= 1, got {out['n_traj']!r}")
    out["master_seed"] = doc.get("master_seed", 0)
    if not (isinstance(out["master_seed"], int) and 0 <= out["master_seed"] < 2 ** 64):
        errors.append("master_seed must be an unsigned 64-bit integer")
    out["workers"] = doc.get("workers", 1)
    if not (isinstance(out["workers"], int) and out["workers"] >= 1):
        errors.append("workers must be an integer >= 1")
    return out


def _build_estimators(doc: dict, errors: list[str]) -> EstimatorOptions:
    rec = doc.get("estimators", {})
    if not isinstance(rec, dict):
        errors.append("estimators must be an object")
        return EstimatorOptions()
    unknown = set(rec) - _ESTIMATOR_KEYS
    if unknown:
        errors.append(f"unknown estimator options: {sorted(unknown)}")
    opts = EstimatorOptions()
    k = rec.get("hill_k", "auto")
    if k != "auto" and not isinstance(k, int):
        errors.append("hill_k must be 'auto' or an integer")
    else:
        opts.hill_k = k
    opts.tail_top = rec.get("tail_top")
    shift = rec.get("excess_shift")
    if shift is not None and shift != "median" and not isinstance(shift, (int, float)):
        errors.append("excess_shift must be null, 'median', or a number")
    else:
        opts.excess_shift = shift
    opts.s_hi = float(rec.get("s_hi", 0.2))
    opts.s_lo = rec.get("s_lo")
    win = rec.get("exp_fit_window")
    if win is not None:
        if not (isinstance(win, (list, tuple)) and len(win) == 2):
            errors.append("exp_fit_window must be [n_lo, n_hi]")
        else:
            opts.exp_fit_window = (int(win[0]), int(win[1]))
    return opts


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a JSON experiment config.

    Raises ConfigError carrying every validation error found.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"not valid JSON: {exc}"]) from exc
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> ExperimentConfig:
    errors: list[str] = []
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a JSON object"])
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        errors.append(f"unknown keys: {sorted(unknown)}")

    kind = doc.get("kind", "one_species")
    if kind not in ("one_species", "two_species"):
        errors.append(f"kind must be one_species or two_species, got {kind!r}")
    scenario_id = doc.get("scenario_id", "unnamed")
    common = _validate_common(doc, errors)
    est = _build_estimators(doc, errors)
    theory_rec = doc.get("theory", {})
    eps0 = None
    if isinstance(theory_rec, dict):
        unknown = set(theory_rec) - _THEORY_KEYS
        if unknown:
            errors.append(f"unknown theory options: {sorted(unknown)}")
        eps0 = theory_rec.get("eps0")
    else:
        errors.append("theory must be an object")

    cfg = ExperimentConfig(scenario_id=scenario_id, kind=kind, raw=doc,
                           estimators=est, eps0=eps0,
                           out_dir=doc.get("out_dir", "results"),
                           theorem=doc.get("theorem"), **common)

    if kind == "one_species":
        _build_one_species(doc, cfg, errors)
    else:
        _build_two_species(doc, cfg, errors)

    if errors:
        raise ConfigError(errors)
    return cfg


def _build_one_species(doc: dict, cfg: ExperimentConfig, errors: list[str]):
    for key in ("model", "noise", "region"):
        if key not in doc:
            errors.append(f"missing required key {key!r}")
    if "x0" not in doc:
        errors.append("missing required key 'x0'")
    if errors:
        return
    try:
        cfg.model = model_from_config(doc["model"])
    except ValueError as exc:
        errors.append(f"model: {exc}")
    try:
        cfg.noise = noise_from_config(doc["noise"])
    except ValueError as exc:
        errors.append(f"noise: {exc}")
    try:
        cfg.region = region_from_config(doc["region"])
    except ValueError as exc:
        errors.append(f"region: {exc}")

    x0 = doc["x0"]
    x0_list = x0 if isinstance(x0, list) else [x0]
    vals = []
    for v in x0_list:
        if not isinstance(v, (int, float)) or not v > 0:
            errors.append(f"x0 values must be positive numbers, got {v!r}")
        else:
            vals.append(float(v))
    cfg.x0_list = tuple(vals)
    if cfg.region is not None:
        for v in cfg.x0_list:
            try:
                cfg.region.validate_x0(v)
            except ValueError as exc:
                errors.append(str(exc))


def _build_two_species(doc: dict, cfg: ExperimentConfig, errors: list[str]):
    for key in ("model", "tau", "stages"):
        if key not in doc:
            errors.append(f"missing required key {key!r}")
    if errors:
        return
    rec = doc["model"]
    try:
        needed = {"r1", "r2", "a11", "a12", "a21", "a22", "noise1", "noise2"}
        missing = needed - set(rec)
        if missing:
            raise ValueError(f"missing model keys {sorted(missing)}")
        extra = set(rec) - needed
        if extra:
            raise ValueError(f"unknown model keys {sorted(extra)}")
        cfg.two_model = TwoSpeciesModel(
            r1=float(rec["r1"]), r2=float(rec["r2"]),
            a11=float(rec["a11"]), a12=float(rec["a12"]),
            a21=float(rec["a21"]), a22=float(rec["a22"]),
            noise1=noise_from_config(rec["noise1"]),
            noise2=noise_from_config(rec["noise2"]))
    except (ValueError, TypeError) as exc:
        errors.append(f"model: {exc}")

    trec = doc["tau"]
    try:
        cfg.tau = TauSpec(form=int(trec.get("form", 1)),
                          eps_margin=float(trec["eps_margin"]),
                          threshold=float(trec["threshold"]))
    except (ValueError, TypeError, KeyError) as exc:
        errors.append(f"tau: {exc}")

    stages = []
    for i, srec in enumerate(doc["stages"] if isinstance(doc["stages"], list) else []):
        try:
            pair = srec["x0_pair"]
            region = region_from_config(srec["region1"]) if srec.get("region1") else None
            species = int(srec.get("region_species", 1))
            if species not in (1, 2):
                raise ValueError("region_species must be 1 or 2")
            stage = Stage((float(pair[0]), float(pair[1])), region, species)
            stages.append(stage)
        except (ValueError, TypeError, KeyError, IndexError) as exc:
            errors.append(f"stage {i}: {exc}")
    if not stages:
        errors.append("stages must be a non-empty list")
    cfg.stages = tuple(stages)

    if cfg.two_model is not None and cfg.tau is not None:
        for i, st in enumerate(cfg.stages):
            try:
                cfg.tau.validate(cfg.two_model, *st.x0_pair)
            except ValueError as exc:
                errors.append(f"stage {i}: {exc}")
            if st.region is not None:
                try:
                    st.region.validate_x0(st.x0_pair[st.region_species - 1])
                except ValueError as exc:
                    errors.append(f"stage {i} region: {exc}")


# ---------------------------------------------------------------------------
# presets: one scenario per theorem-level claim, sized for the acceptance runs

PRESETS: dict[str, dict] = {
    "T2.1a": {
        "scenario_id": "T2.1a-commonness-mean",
        "kind": "one_species", "theorem": "T2.1a",
        "model": {"type": "ricker", "r": 1.0, "a": 1.0},
        "noise": {"type": "gaussian", "sigma": 1.0},
        "region": {"type": "commonness", "m": 10.0},
        "x0": [1.0e3, 1.0e6],
        "horizon": 1000, "n_traj": 100_000, "master_seed": 20240211,
    },
    "T2.1b": {
        "scenario_id": "T2.1b-commonness-tail",
        "kind": "one_species", "theorem": "T2.1b",
        "model": {"type": "ricker", "r": 1.0, "a": 1.0},
        "noise": {"type": "gaussian", "sigma": 1.0},
        "region": {"type": "commonness", "m": 3.0},
        "x0": 10.0,
        "horizon": 200, "n_traj": 1_000_000, "master_seed": 20240212,
    },
    "T2.2": {
        "scenario_id": "T2.2-medium-band",
        "kind": "one_species", "theorem": "T2.2",
        "model": {"type": "ricker", "r": 1.0, "a": 1.0},
        "noise": {"type": "gaussian", "sigma": 1.0},
        "region": {"type": "medium_band", "eps": 0.5, "m": 2.0},
        "x0": 1.0,
        "horizon": 200, "n_traj": 1_000_000, "master_seed": 20240220,
    },
    "T3.1": {
        "scenario_id": "T3.1-transience",
        "kind": "one_species", "theorem": "T3.1",
        "model": {"type": "ricker", "r": -0.5, "a": 1.0},
        "noise": {"type": "gaussian", "sigma": 1.0},
        "region": {"type": "rarity", "eps": 0.1},
        "x0": 0.05,
        "horizon": 10_000, "n_traj": 10_000, "master_seed": 20240231,
    },
    "T4.1": {
        "scenario_id": "T4.1-rarity-mean",
        "kind": "one_species", "theorem": "T4.1",
        "model": {"type": "ricker", "r": 1.0, "a": 1.0},
        "noise": {"type": "gaussian", "sigma": 1.0},
        "region": {"type": "rarity", "eps": 0.1},
        "x0": [1.0e-3, 1.0e-6, 1.0e-9],
        "horizon": 100_000, "n_traj": 100_000, "master_seed": 20240241,
        "theory": {"eps0": 0.2},
    },
    "T4.1-exp": {
        "scenario_id": "T4.1-rarity-tail",
        "kind": "one_species", "theorem": "T4.1-exp",
        "model": {"type": "ricker", "r": 1.0, "a": 1.0},
        "noise": {"type": "gaussian", "sigma": 1.0},
        "region": {"type": "rarity", "eps": 0.1},
        "x0": 1.0e-3,
        "horizon": 100_000, "n_traj": 100_000, "master_seed": 20240247,
        "theory": {"eps0": 0.2},
    },
    "T4.2": {
        "scenario_id": "T4.2-extremes-heavy-tail",
        "kind": "one_species", "theorem": "T4.2",
        "model": {"type": "ricker", "r": 1.0, "a": 1.0},
        "noise": {"type": "shifted_exponential", "rate": 2.0},
        "region": {"type": "extremes", "eps": 0.1, "m": 10.0},
        "x0": 20.0,
        "horizon": 1_000_000, "n_traj": 1_000_000, "master_seed": 11,
        "estimators": {"tail_top": 150, "excess_shift": "median"},
    },
    "T4.2-gaussian": {
        "scenario_id": "T4.2-extremes-gaussian-crosscheck",
        "kind": "one_species", "theorem": "T4.2-gaussian",
        "model": {"type": "ricker", "r": 1.0, "a": 1.0},
        "noise": {"type": "gaussian", "sigma": 1.0},
        "region": {"type": "extremes", "eps": 0.1, "m": 10.0},
        "x0": 20.0,
        "horizon": 1_000_000, "n_traj": 1_000_000, "master_seed": 11,
        "estimators": {"tail_top": 150, "excess_shift": "median"},
    },
    "T5.1": {
        "scenario_id": "T5.1-neutral-gaussian",
        "kind": "one_species", "theorem": "T5.1",
        "model": {"type": "ricker", "r": 0.0, "a": 1.0},
        "noise": {"type": "gaussian", "sigma": 1.0},
        "region": {"type": "rarity", "eps": 0.01},
        "x0": 0.005,
        "horizon": 100_000, "n_traj": 100_000, "master_seed": 20240351,
    },
    "T5.1-pareto": {
        "scenario_id": "T5.1-neutral-pareto",
        "kind": "one_species", "theorem": "T5.1",
        "model": {"type": "ricker", "r": 0.0, "a": 1.0},
        "noise": {"type": "symmetric_pareto", "tail_index": 2.5, "scale": 1.0},
        "region": {"type": "rarity", "eps": 0.01},
        "x0": 0.005,
        "horizon": 100_000, "n_traj": 100_000, "master_seed": 20240352,
    },
    "T6.1-case1": {
        "scenario_id": "T6.1-case1-escape",
        "kind": "two_species", "theorem": "T6.1-case1",
        "model": {"r1": 2.0, "r2": 1.0, "a11": 1.0, "a12": 1.0, "a21": 1.0, "a22": 1.0,
                  "noise1": {"type": "gaussian", "sigma": 0.5},
                  "noise2": {"type": "gaussian", "sigma": 0.5}},
        "tau": {"form": 1, "eps_margin": 0.5, "threshold": 0.0},
        "stages": [
            {"x0_pair": [10.0, 0.1], "region1": {"type": "commonness", "m": 5.0}},
            {"x0_pair": [0.05, 0.05], "region1": {"type": "rarity", "eps": 0.5}},
        ],
        "horizon": 10_000, "n_traj": 10_000, "master_seed": 20240611,
    },
    "T6.1-case2": {
        "scenario_id": "T6.1-case2-escape",
        "kind": "two_species", "theorem": "T6.1-case2",
        "model": {"r1": 2.0, "r2": 1.0, "a11": 1.0, "a12": 3.0, "a21": 1.0, "a22": 1.0,
                  "noise1": {"type": "gaussian", "sigma": 0.5},
                  "noise2": {"type": "gaussian", "sigma": 0.5}},
        "tau": {"form": 1, "eps_margin": 0.5, "threshold": 0.0},
        "stages": [
            {"x0_pair": [10.0, 0.1], "region1": {"type": "commonness", "m": 5.0}},
        ],
        "horizon": 10_000, "n_traj": 10_000, "master_seed": 20240612,
    },
    "T6.1-case3": {
        "scenario_id": "T6.1-case3-escape",
        "kind": "two_species", "theorem": "T6.1-case3",
        "model": {"r1": 1.0, "r2": 2.0, "a11": 1.0, "a12": 1.0, "a21": 1.0, "a22": 1.0,
                  "noise1": {"type": "gaussian", "sigma": 0.5},
                  "noise2": {"type": "gaussian", "sigma": 0.5}},
        "tau": {"form": 3, "eps_margin": 0.5, "threshold": 0.0},
        "stages": [
            {"x0_pair": [0.1, 10.0], "region1": {"type": "commonness", "m": 5.0},
             "region_species": 2},
        ],
        "horizon": 10_000, "n_traj": 10_000, "master_seed": 20240613,
    },
}


def preset_config(name: str, **overrides) -> ExperimentConfig:
    """Named scenario with optional overrides (n_traj, master_seed, ...)."""
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; available: {sorted(PRESETS)}"])
    doc = json.loads(json.dumps(PRESETS[name]))  # deep copy
    doc.update(overrides)
    return config_from_dict(doc)
