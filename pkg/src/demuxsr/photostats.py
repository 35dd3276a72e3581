"""Detection probabilities for direct imaging and demultiplexing, and samplers.

Mode-``v`` counts at a reference position are binomial: every photon
independently lands in ``v`` with probability ``I(x_R)`` and in ``u``
otherwise.  Direct-imaging photons are drawn from the mixture density
``p(x) = sum_j w_j u(x - x_j)^2``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, UnsupportedSamplerError, ValidationError
from .optics import GaussianPSF, ModeBasis, TransferFunction, projection_amplitude
from .quadrature import adaptive_simpson
from .sources import SourceEnsemble, second_moment

PROBABILITY_SLACK = 1e-9


@dataclass(frozen=True)
class ScanPoint:
    """One reference position of a demultiplexed scan.

    ``counts_v`` is normally an integer count; noiseless (expected-count)
    scans store the real-valued mean ``photons_allocated * I(x_R)`` instead.
    """

    x_R: float
    photons_allocated: int
    counts_v: float

    def __post_init__(self):
        if self.photons_allocated < 0:
            raise ValidationError("photons_allocated must be nonnegative")
        if not 0 <= self.counts_v <= self.photons_allocated:
            raise ValidationError(
                f"counts_v={self.counts_v} outside [0, {self.photons_allocated}] at x_R={self.x_R}"
            )

    @property
    def fraction(self) -> float:
        return self.counts_v / self.photons_allocated if self.photons_allocated else 0.0


@dataclass(frozen=True)
class ScanDataset:
    points: tuple[ScanPoint, ...]
    sigma: float
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise ValidationError("a scan needs at least one point")
        if not self.sigma > 0:
            raise ValidationError("scan sigma must be positive")
        xs = [p.x_R for p in self.points]
        if len(set(xs)) != len(xs):
            raise ValidationError("scan x_R values must be distinct")

    @property
    def x_R(self) -> np.ndarray:
        return np.array([p.x_R for p in self.points])

    @property
    def photons(self) -> np.ndarray:
        return np.array([p.photons_allocated for p in self.points], dtype=float)

    @property
    def counts(self) -> np.ndarray:
        return np.array([p.counts_v for p in self.points], dtype=float)

    @classmethod
    def from_arrays(cls, x_r, photons, counts, sigma, seed=None) -> ScanDataset:
        pts = tuple(ScanPoint(float(x), int(n), _count_value(k))
                    for x, n, k in zip(x_r, photons, counts))
        return cls(pts, float(sigma), seed)

    def to_csv(self, metadata: dict | None = None) -> str:
        buf = io.StringIO()
        buf.write(f"# sigma: {self.sigma!r}\n")
        buf.write(f"# seed: {self.seed}\n")
        for key, value in (metadata or {}).items():
            if key in ("sigma", "seed"):
                continue
            buf.write(f"# {key}: {value}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x_R", "photons_allocated", "counts_v"])
        for p in self.points:
            writer.writerow([repr(float(p.x_R)), p.photons_allocated, _format_count(p.counts_v)])
        return buf.getvalue()

    @classmethod
    def read_csv(cls, path) -> ScanDataset:
        meta = {}
        rows = []
        with Path(path).open() as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, value = line[1:].partition(":")
                    meta[key.strip()] = value.strip()
                    continue
                rows.append(line)
        reader = csv.DictReader(rows)
        x, n, k = [], [], []
        for row in reader:
            x.append(float(row["x_R"]))
            n.append(int(row["photons_allocated"]))
            k.append(float(row["counts_v"]))
        if "sigma" not in meta:
            raise ValidationError(f"{path}: missing '# sigma:' header line")
        seed = meta.get("seed")
        seed = None if seed in (None, "None") else int(seed)
        return cls.from_arrays(x, n, k, float(meta["sigma"]), seed)


def _count_value(k) -> float | int:
    k = float(k)
    return int(k) if k.is_integer() else k


def _format_count(k) -> str:
    return str(int(k)) if float(k).is_integer() else repr(float(k))


@dataclass(frozen=True, eq=False)
class DirectSamples:
    positions: np.ndarray

    def __post_init__(self):
        x = np.array(self.positions, dtype=float).ravel()
        if not np.all(np.isfinite(x)):
            raise ValidationError("direct-imaging samples must be finite")
        x.flags.writeable = False
        object.__setattr__(self, "positions", x)

    def __len__(self) -> int:
        return self.positions.size


def _clamp_probability(p: float) -> float:
    if p < -PROBABILITY_SLACK or p > 1 + PROBABILITY_SLACK:
        raise DomainError(f"probability {p!r} outside [0, 1] beyond quadrature slack")
    return min(max(p, 0.0), 1.0)


def detection_probability_exact(ensemble: SourceEnsemble, basis: ModeBasis, x_r: float) -> float:
    """Fraction of the source intensity coupled into ``v(x - x_R)``."""
    amps = np.array([projection_amplitude(basis, x_r, xj) for xj in ensemble.positions])
    return _clamp_probability(float(np.dot(ensemble.weights, amps * amps)))


def detection_probability_linearized(ensemble: SourceEnsemble, sigma: float, x_r: float) -> float:
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    d = ensemble.positions - x_r
    return float(np.dot(ensemble.weights, d * d)) / (4 * sigma * sigma)


def i_centroid(ensemble: SourceEnsemble, sigma: float) -> float:
    """Mode-``v`` probability with the demultiplexer centred on the centroid."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return second_moment(ensemble) / (4 * sigma * sigma)


def steiner_probability(i_c: float, x_c: float, sigma: float, x_r: float):
    """``i_c + (x_R - x_C)^2 / (4 sigma^2)``; ``x_r`` may be an array."""
    if i_c < 0 or not sigma > 0:
        raise DomainError("need i_c >= 0 and sigma > 0")
    return i_c + np.square(np.asarray(x_r, dtype=float) - x_c) / (4 * sigma * sigma)


def direct_pdf(ensemble: SourceEnsemble, psf: TransferFunction, x):
    """Direct-imaging photon density; vectorized over ``x``."""
    x = np.asarray(x, dtype=float)
    shifted = x[..., None] - ensemble.positions
    return np.sum(ensemble.weights * np.square(psf(shifted)), axis=-1)


def psf_second_moment(psf: TransferFunction) -> float:
    """``int x^2 u(x)^2 dx``; equals sigma^2 for the Gaussian."""
    if isinstance(psf, GaussianPSF):
        return psf.sigma ** 2
    lo, hi = psf.support
    return adaptive_simpson(lambda x: x * x * np.square(psf(x)), lo, hi)


def direct_variance(ensemble: SourceEnsemble, psf: TransferFunction) -> float:
    return second_moment(ensemble) + psf_second_moment(psf)


def direct_pdf_support(ensemble: SourceEnsemble, psf: TransferFunction) -> tuple[float, float]:
    lo, hi = psf.support
    return float(ensemble.positions.min() + lo), float(ensemble.positions.max() + hi)


def sample_mode_counts(p: float, n: int, rng: np.random.Generator) -> int:
    """Binomial number of mode-``v`` clicks among ``n`` photons."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability {p!r} outside [0, 1]")
    if n < 0:
        raise DomainError("photon number must be nonnegative")
    return int(rng.binomial(n, p))


def sample_positions(ensemble: SourceEnsemble, psf: TransferFunction, n: int,
                     rng: np.random.Generator) -> DirectSamples:
    """``n`` direct-imaging photon positions: a source index, then a Gaussian offset."""
    if not isinstance(psf, GaussianPSF):
        raise UnsupportedSamplerError("direct-imaging sampling is implemented for Gaussian PSFs only")
    if n < 0:
        raise DomainError("photon number must be nonnegative")
    idx = rng.choice(len(ensemble), size=n, p=ensemble.weights)
    x = ensemble.positions[idx] + psf.sigma * rng.standard_normal(n)
    return DirectSamples(x)


def sample_centroid_mean(ensemble: SourceEnsemble, psf: GaussianPSF, n: int,
                         rng: np.random.Generator) -> float:
    """Draw the sample mean of ``n`` direct-imaging photons without drawing them.

    Source occupation numbers are multinomial and the summed Gaussian
    offsets are a single normal variate, so the result has exactly the
    distribution of ``sample_positions(...).positions.mean()``.
    """
    if not isinstance(psf, GaussianPSF):
        raise UnsupportedSamplerError("centroid sampling is implemented for Gaussian PSFs only")
    if n < 1:
        raise DomainError("need at least one photon")
    occupation = rng.multinomial(n, ensemble.weights)
    return float(np.dot(occupation, ensemble.positions) / n
                 + psf.sigma * rng.standard_normal() / np.sqrt(n))

