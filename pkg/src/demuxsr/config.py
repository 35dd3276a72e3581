"""Experiment configuration files.

Configs are YAML documents restricted to plain mappings, lists and scalars.
Top-level keys::

    sources:        list of {x: float, w: float}; weights must sum to 1
    sigma:          PSF width (length units)
    psf:            "gaussian" or a path to a "# psf v1" table
    n_photons:      photons per scan
    scan_grid:      {min: float, max: float, points: int} or a list of x_R
    allocation:     "equal" or a list of relative per-point weights
    weighting:      parabola fit weighting: irls | observed | unweighted
    probability:    detection model for the scan: exact | linearized
    repetitions:    Monte-Carlo repetitions for fig2
    seed:           master seed (unsigned 64-bit)
    output_path:    output directory
    histogram_bins: "fd" (Freedman-Diaconis) or a bin count
    sweep:          {d_values: [...], n_values: [...], repetitions: int}
    budget:         {n_total: int, repetitions: int, alpha_points: int}
    qubit:          {eps: float, theta: float, n: int}
    fisher:         {d: float, n: int}

Unknown keys anywhere are rejected.  Missing keys take the defaults in
``DEFAULTS``, which reproduce the two-source example used throughout.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, ValidationError
from .sources import SourceEnsemble

DEFAULTS = {
    "sources": [{"x": -0.025, "w": 0.5}, {"x": 0.075, "w": 0.5}],
    "sigma": 1.0,
    "psf": "gaussian",
    "n_photons": 100_000,
    "scan_grid": {"min": -0.2, "max": 0.2, "points": 21},
    "allocation": "equal",
    "weighting": "irls",
    "probability": "exact",
    "repetitions": 20_000,
    "seed": 0,
    "output_path": "out",
    "histogram_bins": "fd",
    "sweep": {
        "d_values": [0.01, 0.02, 0.05, 0.1],
        "n_values": [10_000, 100_000, 1_000_000],
        "repetitions": 2000,
    },
    "budget": {"n_total": 1_000_000, "repetitions": 2000, "alpha_points": 9},
    "qubit": {"eps": 0.05, "theta": 0.025, "n": 10_000},
    "fisher": {"d": 0.05, "n": 100_000},
}

_SECTION_KEYS = {
    "scan_grid": {"min", "max", "points"},
    "sweep": {"d_values", "n_values", "repetitions"},
    "budget": {"n_total", "repetitions", "alpha_points"},
    "qubit": {"eps", "theta", "n"},
    "fisher": {"d", "n"},
}


def _merge(defaults: dict, given: dict, where: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        path = f"{where}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config key {path!r}")
        if key in _SECTION_KEYS and key != "scan_grid" and not isinstance(value, dict):
            raise ConfigError(f"{path!r} must be a mapping")
        if key in _SECTION_KEYS and isinstance(value, dict):
            unknown = set(value) - _SECTION_KEYS[key]
            if unknown:
                raise ConfigError(f"unknown keys under {path!r}: {sorted(unknown)}")
            if key == "scan_grid":
                missing = _SECTION_KEYS[key] - set(value)
                if missing:
                    raise ConfigError(f"scan_grid is missing {sorted(missing)}")
                out[key] = dict(value)
            else:
                out[key] = {**defaults[key], **value}
        else:
            out[key] = value
    return out


def _int(value, name, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def _float(value, name) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        self._validate()

    def _validate(self):
        r = self.raw
        try:
            self.ensemble
        except ValidationError as exc:
            raise ConfigError(f"sources: {exc}") from exc
        if not _float(r["sigma"], "sigma") > 0:
            raise ConfigError("sigma must be positive")
        if not isinstance(r["psf"], str):
            raise ConfigError("psf must be 'gaussian' or a file path")
        n = _int(r["n_photons"], "n_photons", 1)
        grid = self.scan_grid
        if grid.size < 3:
            raise ConfigError("scan experiments need at least 3 grid points")
        if np.unique(grid).size != grid.size:
            raise ConfigError("scan grid points must be distinct")
        if n < grid.size:
            raise ConfigError("n_photons must be at least the number of scan points")
        alloc = r["allocation"]
        if alloc != "equal":
            if not isinstance(alloc, list) or len(alloc) != grid.size:
                raise ConfigError("allocation must be 'equal' or one weight per scan point")
            if any(_float(a, "allocation weight") < 0 for a in alloc) or sum(alloc) <= 0:
                raise ConfigError("allocation weights must be nonnegative with positive sum")
        if r["weighting"] not in ("irls", "observed", "unweighted"):
            raise ConfigError(f"unknown weighting {r['weighting']!r}")
        if r["probability"] not in ("exact", "linearized"):
            raise ConfigError(f"unknown probability model {r['probability']!r}")
        _int(r["repetitions"], "repetitions", 1)
        seed = _int(r["seed"], "seed", 0)
        if seed >= 2 ** 64:
            raise ConfigError("seed must fit in 64 bits")
        bins = r["histogram_bins"]
        if bins != "fd":
            _int(bins, "histogram_bins", 1)
        sw = r["sweep"]
        for d in sw["d_values"]:
            if not 0 < _float(d, "sweep.d_values") < 2 * self.sigma:
                raise ConfigError("sweep d values must lie in (0, 2 sigma)")
        for v in sw["n_values"]:
            _int(v, "sweep.n_values", 1)
        _int(sw["repetitions"], "sweep.repetitions", 2)
        _int(r["budget"]["n_total"], "budget.n_total", 10)
        _int(r["budget"]["repetitions"], "budget.repetitions", 100)
        _int(r["budget"]["alpha_points"], "budget.alpha_points", 1)
        q = r["qubit"]
        if _float(q["eps"], "qubit.eps") < 0:
            raise ConfigError("qubit.eps must be nonnegative")
        _float(q["theta"], "qubit.theta")
        _int(q["n"], "qubit.n", 1)
        _float(r["fisher"]["d"], "fisher.d")
        _int(r["fisher"]["n"], "fisher.n", 1)
        if not isinstance(r["output_path"], str):
            raise ConfigError("output_path must be a string")

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def ensemble(self) -> SourceEnsemble:
        src = self.raw["sources"]
        if not isinstance(src, list):
            raise ConfigError("sources must be a list of {x, w} records")
        for rec in src:
            if not isinstance(rec, dict) or set(rec) != {"x", "w"}:
                raise ConfigError(f"source records need exactly the keys x and w, got {rec!r}")
        return SourceEnsemble.from_records(src)

    @property
    def sigma(self) -> float:
        return float(self.raw["sigma"])

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def n_photons(self) -> int:
        return int(self.raw["n_photons"])

    @property
    def repetitions(self) -> int:
        return int(self.raw["repetitions"])

    @property
    def scan_grid(self) -> np.ndarray:
        g = self.raw["scan_grid"]
        if isinstance(g, dict):
            pts = _int(g["points"], "scan_grid.points", 1)
            return np.linspace(_float(g["min"], "scan_grid.min"), _float(g["max"], "scan_grid.max"), pts)
        if isinstance(g, list):
            return np.array([_float(v, "scan_grid entry") for v in g])
        raise ConfigError("scan_grid must be {min, max, points} or a list")

    @property
    def psf_path(self) -> Path | None:
        psf = self.raw["psf"]
        if psf == "gaussian":
            return None
        path = Path(psf)
        return path if path.is_absolute() else self.base_dir / path

    def replace(self, **changes) -> ExperimentConfig:
        return ExperimentConfig(_merge(self.raw, changes), self.base_dir)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def hash(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def default_config(**changes) -> ExperimentConfig:
    return ExperimentConfig(_merge(DEFAULTS, changes))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return ExperimentConfig(_merge(DEFAULTS, data), path.parent)
