"""Estimators and classical Fisher-information bounds.

Covers the direct-imaging centroid estimate, the binomial inversion for the
half-separation of an equal-brightness pair, the fixed-curvature parabola
fit to a demultiplexed scan, and the split of a photon budget between
centroid finding and demultiplexing.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, DomainError, FitError, InsufficientDataError
from .optics import GAUSS_SUPPORT, GaussianPSF, gaussian_basis
from .photostats import (
    DirectSamples,
    ScanDataset,
    detection_probability_exact,
    sample_centroid_mean,
    sample_mode_counts,
)
from .quadrature import adaptive_simpson
from .rng import substream
from .sources import SourceEnsemble, second_moment

FIT_MAX_ITER = 100
FIT_RTOL = 1e-12
FD_REL_STEP = 1e-6
# relative accuracy of the direct-imaging information integral; the
# difference quotient carries rounding noise near 1e-10 * sigma / d
FISHER_RTOL = 1e-8
WEIGHTINGS = ("irls", "observed", "unweighted")


@dataclass(frozen=True)
class EstimateReport:
    value: float
    std_error: float
    n_used: int
    bias_estimate: float | None = None


@dataclass(frozen=True, eq=False)
class ParabolaFitResult:
    i_c_hat: float
    x_c_hat: float
    covariance: np.ndarray
    chi_square: float
    dof: int
    residuals: np.ndarray = field(repr=False)
    iterations: int = 1
    weighting: str = "irls"

    @property
    def std_errors(self) -> tuple[float, float]:
        return tuple(float(v) for v in np.sqrt(np.diag(self.covariance)))

    def to_dict(self) -> dict:
        return {
            "i_c_hat": float(self.i_c_hat),
            "x_c_hat": float(self.x_c_hat),
            "cov": [[float(v) for v in row] for row in self.covariance],
            "chi_square": float(self.chi_square),
            "dof": int(self.dof),
        }


@dataclass(frozen=True)
class BudgetPlan:
    n_total: int
    n_centroid: int
    alpha: float

    def __post_init__(self):
        if not 0 < self.n_centroid < self.n_total:
            raise DomainError(f"need 0 < n_centroid < n_total, got {self.n_centroid}, {self.n_total}")


@dataclass(frozen=True)
class BudgetPoint:
    alpha: float
    n_centroid: int
    rmse: float
    rmse_stderr: float


@dataclass(frozen=True)
class BudgetResult:
    plan: BudgetPlan
    rmse: float
    rmse_stderr: float
    curve: tuple[BudgetPoint, ...]
    d_true: float


def estimate_centroid(samples: DirectSamples) -> EstimateReport:
    x = samples.positions
    if x.size < 2:
        raise InsufficientDataError("centroid estimate needs at least two photons")
    return EstimateReport(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), int(x.size))


def mle_separation(counts_v: int, n: int, sigma: float) -> EstimateReport:
    """Half-separation of an equal pair from mode-``v`` counts at the centroid.

    Inverts ``p_v = d^2 / (4 sigma^2)``; the standard error is the delta-method
    value ``(sigma / sqrt(n)) sqrt(1 - p_hat)``.
    """
    if n < 1 or not sigma > 0:
        raise DomainError("need n >= 1 and sigma > 0")
    if not 0 <= counts_v <= n:
        raise DomainError(f"counts_v={counts_v} outside [0, n={n}]")
    p_hat = counts_v / n
    if counts_v == n:
        warnings.warn("all photons in the v mode: estimate sits on the linearized-model boundary d = 2 sigma",
                      RuntimeWarning, stacklevel=2)
    return EstimateReport(
        value=2.0 * sigma * math.sqrt(p_hat),
        std_error=sigma / math.sqrt(n) * math.sqrt(1.0 - p_hat),
        n_used=int(n),
    )


def _weighted_affine(x, y, w):
    s, sx, sxx = w.sum(), (w * x).sum(), (w * x * x).sum()
    sy, sxy = (w * y).sum(), (w * x * y).sum()
    det = s * sxx - sx * sx
    if not det > 1e-300 * max(s * sxx, 1e-300):
        raise FitError("degenerate scan design: the x_R values do not span a line")
    a = (sxx * sy - sx * sxy) / det
    b = (s * sxy - sx * sy) / det
    cov = np.array([[sxx, -sx], [-sx, s]]) / det
    return a, b, cov


def fit_parabola(scan: ScanDataset, weighting: str = "irls") -> ParabolaFitResult:
    """Fit ``I_C + (x_R - x_C)^2 / (4 sigma^2)`` to the observed fractions.

    The curvature is known, so the model is affine in ``A = I_C + x_C^2/4sigma^2``
    and ``B = -x_C / 2sigma^2`` after moving ``x_R^2 / 4sigma^2`` to the data side.

    Weights are inverse binomial variances ``N_i / (p (1 - p))``, with ``p``
    clipped to ``[1/(2N_i), 1 - 1/(2N_i)]``:

    * ``"observed"`` takes ``p`` from the observed fraction (one pass);
    * ``"irls"`` starts there and re-evaluates ``p`` from the fitted model
      until the parameters settle (at most ``FIT_MAX_ITER`` passes);
    * ``"unweighted"`` uses equal weights.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}, got {weighting!r}")
    sigma = scan.sigma
    used = scan.photons > 0
    x, n, k = scan.x_R[used], scan.photons[used], scan.counts[used]
    if np.unique(x).size < 3:
        raise FitError("parabola fit needs at least three distinct x_R with photons")
    if not np.any(k > 0):
        raise FitError("no mode-v counts anywhere in the scan")

    curv = 1.0 / (4 * sigma * sigma)
    frac = k / n
    y = frac - curv * x * x
    floor = 0.5 / n

    def weights(p):
        p = np.clip(p, floor, 1.0 - floor)
        return n / (p * (1.0 - p))

    w = np.ones_like(x) if weighting == "unweighted" else weights(frac)
    a, b, cov_ab = _weighted_affine(x, y, w)
    iterations = 1
    if weighting == "irls":
        for iterations in range(2, FIT_MAX_ITER + 1):
            w = weights(a + b * x + curv * x * x)
            a_new, b_new, cov_ab = _weighted_affine(x, y, w)
            step = max(abs(a_new - a), abs(b_new - b))
            scale = max(abs(a_new), abs(b_new))
            a, b = a_new, b_new
            if step <= FIT_RTOL * scale:
                break
        else:
            raise FitError(f"IRLS parabola fit did not converge in {FIT_MAX_ITER} iterations")

    x_c = -2.0 * sigma * sigma * b
    i_c = a - sigma * sigma * b * b
    jac = np.array([[1.0, -2.0 * sigma * sigma * b], [0.0, -2.0 * sigma * sigma]])
    cov = jac @ cov_ab @ jac.T
    cov = 0.5 * (cov + cov.T)
    resid = frac - (i_c + curv * (x - x_c) ** 2)
    # weights stay defined for the unweighted fit so chi_square is comparable
    w_chi = w if weighting != "unweighted" else weights(frac)
    return ParabolaFitResult(
        i_c_hat=float(i_c),
        x_c_hat=float(x_c),
        covariance=cov,
        chi_square=float(np.sum(w_chi * resid * resid)),
        dof=int(x.size - 2),
        residuals=resid,
        iterations=iterations,
        weighting=weighting,
    )


def fisher_demux(d: float, sigma: float) -> float:
    """Per-photon Fisher information on ``d`` of the two-outcome {u, v} measurement."""
    if not sigma > 0 or d < 0:
        raise DomainError("need d >= 0 and sigma > 0")
    if d >= 2 * sigma:
        raise DomainError(f"d={d} >= 2 sigma: the linearized demultiplexing model does not apply")
    return 1.0 / (sigma * sigma * (1.0 - d * d / (4 * sigma * sigma)))


def demux_precision(d: float, sigma: float, n: int) -> float:
    """Cramer-Rao limit on ``d`` for ``n`` photons demultiplexed at the centroid."""
    return 1.0 / math.sqrt(n * fisher_demux(d, sigma))


def direct_precision_asymptote(d: float, sigma: float, n: int) -> float:
    """Small-separation direct-imaging limit ``(sigma^2 / d) sqrt(2 / n)``."""
    return sigma * sigma / d * math.sqrt(2.0 / n)


def _pair_density(x, d, sigma):
    g = lambda t: np.exp(-t * t / (2 * sigma * sigma))
    return (g(x - d) + g(x + d)) / (2 * math.sqrt(2 * math.pi) * sigma)


def fisher_direct(d: float, sigma: float) -> float:
    """Per-photon Fisher information on ``d`` of direct imaging of an equal pair.

    ``dp/dd`` is a Richardson-extrapolated central difference with step
    ``FD_REL_STEP * sigma``; the information integral uses adaptive Simpson
    to ``max(FISHER_RTOL, 1e-9 sigma / d)`` relative to the scale
    ``min(2 d^2, sigma^2) / sigma^4``, the looser term covering the
    difference-quotient noise at very small ``d``.
    """
    if not (d > 0 and sigma > 0):
        raise DomainError("need d > 0 and sigma > 0")
    h = FD_REL_STEP * sigma

    def integrand(x):
        p = _pair_density(x, d, sigma)
        d1 = (_pair_density(x, d + h, sigma) - _pair_density(x, d - h, sigma)) / (2 * h)
        d2 = (_pair_density(x, d + h / 2, sigma) - _pair_density(x, d - h / 2, sigma)) / h
        dp = (4 * d2 - d1) / 3
        return dp * dp / p

    half = GAUSS_SUPPORT * sigma + d
    scale = min(2 * d * d, sigma * sigma) / sigma ** 4
    rtol = max(FISHER_RTOL, 1e-9 * sigma / d)
    value = adaptive_simpson(integrand, -half, half, tol=rtol * scale)
    if not (np.isfinite(value) and value >= 0):
        raise AccuracyError(f"direct-imaging Fisher information evaluated to {value!r}")
    return value


def direct_precision(d: float, sigma: float, n: int) -> float:
    return 1.0 / math.sqrt(n * fisher_direct(d, sigma))


def budget_grid(n_total: int, points: int = 9) -> list[tuple[float, int]]:
    """Candidate ``(alpha, n_centroid)`` splits: ``ceil(N^alpha)`` plus the endpoints 2 and N-1."""
    if n_total < 10:
        raise DomainError("photon budget must be at least 10")
    alphas = [k / (points + 1) for k in range(1, points + 1)]
    ns = {2: math.log(2) / math.log(n_total), n_total - 1: math.log(n_total - 1) / math.log(n_total)}
    for a in alphas:
        n = math.ceil(n_total ** a)
        if 2 <= n <= n_total - 1:
            ns.setdefault(n, a)
    if len(ns) < 3:
        raise DomainError(f"photon budget {n_total} too small for a split grid")
    return sorted(((alpha, n) for n, alpha in ns.items()), key=lambda t: t[1])


def _budget_repetition(seed, k, splits, ensemble, psf, basis, n_total):
    rng_centroid, rng_demux = substream(seed, k, n_children=2)
    state_c, state_d = rng_centroid.bit_generator.state, rng_demux.bit_generator.state
    out = np.empty(len(splits))
    for i, (_, n) in enumerate(splits):
        # common random numbers: every split restarts from the same stream state
        rng_centroid.bit_generator.state = state_c
        rng_demux.bit_generator.state = state_d
        x_hat = sample_centroid_mean(ensemble, psf, n, rng_centroid)
        p = detection_probability_exact(ensemble, basis, x_hat)
        m = n_total - n
        counts = sample_mode_counts(p, m, rng_demux)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            out[i] = mle_separation(counts, m, psf.sigma).value
    return out


def optimize_budget(n_total: int, ensemble: SourceEnsemble, sigma: float, repetitions: int,
                    seed: int, threads: int = 1, alpha_points: int = 9) -> BudgetResult:
    """Choose the centroid/demultiplexing split minimizing the RMSE of ``d_hat``.

    Each repetition estimates the centroid from ``n`` direct-imaging
    photons, demultiplexes the remaining ``N - n`` at the estimate and
    inverts the counts with ``mle_separation``.  The true ``d`` is the root
    second moment of the ensemble.
    """
    if repetitions < 100:
        raise DomainError("budget optimization needs at least 100 repetitions")
    splits = budget_grid(n_total, alpha_points)
    psf = GaussianPSF(sigma)
    basis = gaussian_basis(sigma)
    d_true = math.sqrt(second_moment(ensemble))

    def run(k):
        return _budget_repetition(seed, k, splits, ensemble, psf, basis, n_total)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, range(repetitions)))
    else:
        rows = [run(k) for k in range(repetitions)]
    sq = (np.array(rows) - d_true) ** 2
    mse = sq.mean(axis=0)
    rmse = np.sqrt(mse)
    se = sq.std(axis=0, ddof=1) / math.sqrt(repetitions) / (2 * np.maximum(rmse, 1e-300))
    curve = tuple(BudgetPoint(float(a), int(n), float(r), float(s))
                  for (a, n), r, s in zip(splits, rmse, se))
    best = int(np.argmin(rmse))
    alpha, n_best = splits[best]
    return BudgetResult(
        plan=BudgetPlan(n_total, n_best, float(alpha)),
        rmse=float(rmse[best]),
        rmse_stderr=float(se[best]),
        curve=curve,
        d_true=d_true,
    )


def curve_is_unimodal(values, errors, n_sigma: float = 3.0) -> bool:
    """True if ``values`` falls to its minimum and rises after it, up to noise.

    A step against the expected direction is tolerated when it is within
    ``n_sigma`` combined standard errors.
    """
    v = np.asarray(values, float)
    e = np.asarray(errors, float)
    m = int(np.argmin(v))
    for i in range(v.size - 1):
        slack = n_sigma * math.hypot(e[i], e[i + 1])
        step = v[i + 1] - v[i]
        if i < m and step > slack:
            return False
        if i >= m and step < -slack:
            return False
    return True
