"""Ensembles of mutually incoherent point sources in one dimension."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError

WEIGHT_SUM_TOL = 1e-12


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float).ravel()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SourceEnsemble:
    """Point-source positions ``x_j`` with relative strengths ``w_j``.

    Weights are checked, never renormalized: they must be positive and sum
    to one within ``WEIGHT_SUM_TOL``. Duplicate positions are allowed.
    """

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = _frozen(self.positions)
        w = _frozen(self.weights)
        if x.size == 0 or x.size != w.size:
            raise ValidationError(
                f"positions ({x.size}) and weights ({w.size}) must have equal, nonzero length"
            )
        if not np.all(np.isfinite(x)):
            raise ValidationError("source positions must be finite")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValidationError("source weights must be finite and strictly positive")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(f"source weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.positions.size

    def __repr__(self) -> str:
        return f"SourceEnsemble(positions={self.positions.tolist()}, weights={self.weights.tolist()})"

    @classmethod
    def from_records(cls, records) -> SourceEnsemble:
        """Build from ``[{"x": ..., "w": ...}, ...]`` as found in config files."""
        try:
            xs = [float(r["x"]) for r in records]
            ws = [float(r["w"]) for r in records]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad source record: {exc}") from exc
        return cls(xs, ws)

    def to_records(self) -> list[dict]:
        return [{"x": float(x), "w": float(w)} for x, w in zip(self.positions, self.weights)]


@dataclass(frozen=True)
class EnsembleSummary:
    centroid: float
    offsets: tuple[float, ...]
    second_moment: float
    effective_radius_eps: float


def centroid(ensemble: SourceEnsemble) -> float:
    """Intensity-weighted mean position ``sum_j w_j x_j``."""
    return float(np.dot(ensemble.weights, ensemble.positions))


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not sigma > 0 or not np.isfinite(sigma):
        raise DomainError(f"sigma must be positive and finite, got {sigma!r}")
    return sigma


def second_moment(ensemble: SourceEnsemble) -> float:
    """Weighted second moment of the offsets from the centroid."""
    d = ensemble.positions - centroid(ensemble)
    return float(np.dot(ensemble.weights, d * d))


def summarize(ensemble: SourceEnsemble, sigma: float) -> EnsembleSummary:
    sigma = _check_sigma(sigma)
    xc = centroid(ensemble)
    d = ensemble.positions - xc
    m2 = float(np.dot(ensemble.weights, d * d))
    eps = float(np.sqrt(np.dot(ensemble.weights, (d / sigma) ** 2)))
    return EnsembleSummary(
        centroid=xc,
        offsets=tuple(float(v) for v in d),
        second_moment=m2,
        effective_radius_eps=eps,
    )


def symmetric_pair(d: float, x_c: float = 0.0) -> SourceEnsemble:
    """Two equally bright sources at ``x_c - d`` and ``x_c + d`` (separation ``2d``)."""
    if not d >= 0:
        raise DomainError(f"half-separation d must be nonnegative, got {d!r}")
    return SourceEnsemble([x_c - d, x_c + d], [0.5, 0.5])
