"""Config-driven experiments: scans, the repeated-scan histogram, sweeps, reports.

Repetition ``k`` always draws from ``rng.substream(seed, k)`` and results are
collected in repetition order, so the thread count never changes a result.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from . import qubit
from .config import ExperimentConfig
from .errors import ConfigError, FitError
from .inference import (
    ParabolaFitResult,
    demux_precision,
    direct_precision,
    direct_precision_asymptote,
    fisher_demux,
    fisher_direct,
    fit_parabola,
    mle_separation,
)
from .optics import ModeBasis, derivative_mode, gaussian_basis, load_psf
from .photostats import ScanDataset, detection_probability_exact, detection_probability_linearized
from .rng import substream
from .sources import centroid, symmetric_pair

SIGMA_MATCH_RTOL = 1e-6


@dataclass(frozen=True)
class ScanResult:
    dataset: ScanDataset
    fit: ParabolaFitResult


@dataclass(frozen=True, eq=False)
class Fig2Result:
    i_c_values: np.ndarray
    x_c_values: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    sem: float
    std: float
    gaussian_mean: float
    gaussian_mean_err: float
    failed_fits: int

    def summary(self) -> dict:
        return {
            "repetitions": int(self.i_c_values.size),
            "failed_fits": self.failed_fits,
            "mean_i_c": self.mean,
            "sem_i_c": self.sem,
            "std_i_c": self.std,
            "gaussian_fit_mean_i_c": self.gaussian_mean,
            "gaussian_fit_mean_err": self.gaussian_mean_err,
            "mean_x_c": float(np.nanmean(self.x_c_values)),
        }


def mode_basis(cfg: ExperimentConfig) -> ModeBasis:
    path = cfg.psf_path
    if path is None:
        return gaussian_basis(cfg.sigma)
    basis = derivative_mode(load_psf(path))
    if abs(basis.sigma - cfg.sigma) > SIGMA_MATCH_RTOL * cfg.sigma:
        raise ConfigError(
            f"config sigma {cfg.sigma} disagrees with the tabulated PSF width {basis.sigma}"
        )
    return basis


def allocate_photons(n_total: int, points: int, allocation="equal") -> np.ndarray:
    """Split ``n_total`` photons over scan points.

    Equal split gives the remainder to the leftmost points; explicit weights
    use largest-remainder rounding with ties going left.
    """
    if allocation == "equal":
        alloc = np.full(points, n_total // points, dtype=np.int64)
        alloc[: n_total % points] += 1
        return alloc
    w = np.asarray(allocation, dtype=float)
    share = n_total * w / w.sum()
    alloc = np.floor(share).astype(np.int64)
    short = n_total - int(alloc.sum())
    order = np.argsort(-(share - alloc), kind="stable")
    alloc[order[:short]] += 1
    return alloc


def scan_probabilities(cfg: ExperimentConfig, basis: ModeBasis | None = None) -> np.ndarray:
    ensemble = cfg.ensemble
    grid = cfg.scan_grid
    if cfg["probability"] == "linearized":
        return np.array([detection_probability_linearized(ensemble, cfg.sigma, x) for x in grid])
    basis = basis or mode_basis(cfg)
    return np.array([detection_probability_exact(ensemble, basis, x) for x in grid])


def simulate_scan(grid, alloc, probs, sigma, rng=None, seed=None, expected_counts=False) -> ScanDataset:
    if expected_counts:
        counts = alloc * probs
    else:
        counts = rng.binomial(alloc, probs)
    return ScanDataset.from_arrays(grid, alloc, counts, sigma, seed)


def run_scan(cfg: ExperimentConfig, expected_counts: bool = False, repetition: int = 0) -> ScanResult:
    """One demultiplexed scan over the configured grid followed by the parabola fit."""
    grid = cfg.scan_grid
    alloc = allocate_photons(cfg.n_photons, grid.size, cfg["allocation"])
    probs = scan_probabilities(cfg)
    rng = None if expected_counts else substream(cfg.seed, repetition)
    data = simulate_scan(grid, alloc, probs, cfg.sigma, rng, cfg.seed, expected_counts)
    return ScanResult(data, fit_parabola(data, cfg["weighting"]))


def _histogram_edges(values: np.ndarray, bins) -> np.ndarray:
    if bins == "fd":
        return np.histogram_bin_edges(values, bins="fd")
    return np.histogram_bin_edges(values, bins=int(bins))


def _gaussian(x, amp, mu, sd):
    return amp * np.exp(-0.5 * ((x - mu) / sd) ** 2)


def gaussian_fit_mean(edges, counts, mean, std) -> tuple[float, float]:
    centers = 0.5 * (edges[:-1] + edges[1:])
    if counts.size < 3 or std <= 0:
        return float(mean), float("nan")
    try:
        popt, pcov = curve_fit(_gaussian, centers, counts, p0=[counts.max(), mean, std],
                               sigma=np.sqrt(np.maximum(counts, 1.0)), maxfev=10_000)
    except RuntimeError:
        return float("nan"), float("nan")
    return float(popt[1]), float(math.sqrt(pcov[1, 1])) if np.isfinite(pcov[1, 1]) else float("nan")


def replicate_fig2(cfg: ExperimentConfig, threads: int = 1, repetitions: int | None = None,
                   expected_counts: bool = False) -> Fig2Result:
    """Repeat the scan-and-fit procedure and histogram the fitted ``I_C``."""
    reps = cfg.repetitions if repetitions is None else int(repetitions)
    grid = cfg.scan_grid
    alloc = allocate_photons(cfg.n_photons, grid.size, cfg["allocation"])
    probs = scan_probabilities(cfg)
    weighting = cfg["weighting"]

    def one(k):
        rng = None if expected_counts else substream(cfg.seed, k)
        data = simulate_scan(grid, alloc, probs, cfg.sigma, rng, cfg.seed, expected_counts)
        try:
            fit = fit_parabola(data, weighting)
        except FitError:
            return math.nan, math.nan
        return fit.i_c_hat, fit.x_c_hat

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, range(reps), chunksize=1))
    else:
        out = [one(k) for k in range(reps)]
    arr = np.array(out, dtype=float).reshape(reps, 2)
    i_c, x_c = arr[:, 0], arr[:, 1]
    ok = np.isfinite(i_c)
    good = i_c[ok]
    if good.size == 0:
        raise FitError("every repetition failed to fit")
    mean = float(good.mean())
    std = float(good.std(ddof=1)) if good.size > 1 else 0.0
    sem = std / math.sqrt(good.size)
    edges = _histogram_edges(good, cfg["histogram_bins"])
    counts, _ = np.histogram(good, bins=edges)
    g_mean, g_err = gaussian_fit_mean(edges, counts.astype(float), mean, std)
    return Fig2Result(i_c, x_c, edges, counts, mean, sem, std, g_mean, g_err, int((~ok).sum()))


def sweep_precision(cfg: ExperimentConfig, d_values=None, n_values=None, repetitions=None) -> list[dict]:
    """Demultiplexing vs direct-imaging precision on ``d`` for an equal pair.

    Row ``i`` of the sweep draws its Monte-Carlo counts from
    ``substream(seed, i)``; the centroid is taken as known.
    """
    sw = cfg["sweep"]
    d_values = sw["d_values"] if d_values is None else d_values
    n_values = sw["n_values"] if n_values is None else n_values
    reps = int(sw["repetitions"] if repetitions is None else repetitions)
    sigma = cfg.sigma
    basis = gaussian_basis(sigma)
    rows = []
    index = 0
    for d in d_values:
        pair = symmetric_pair(float(d), 0.0)
        p = detection_probability_exact(pair, basis, centroid(pair))
        f_direct = fisher_direct(float(d), sigma)
        for n in n_values:
            n = int(n)
            rng = substream(cfg.seed, index)
            index += 1
            counts = rng.binomial(n, p, size=reps)
            d_hat = np.array([mle_separation(int(k), n, sigma).value for k in counts])
            direct = 1.0 / math.sqrt(n * f_direct)
            demux = demux_precision(float(d), sigma, n)
            rows.append({
                "d": float(d),
                "n_photons": n,
                "demux_mc_std": float(d_hat.std(ddof=1)),
                "demux_crlb": demux,
                "direct_crlb": direct,
                "direct_asymptote": direct_precision_asymptote(float(d), sigma, n),
                "advantage": direct / demux,
            })
    return rows


def report_qubit(eps: float, theta: float, n: int) -> dict:
    """Qubit-model quantities at one operating point, JSON-ready."""
    state = qubit.density_matrix(eps, theta)
    qfi = qubit.qfi_matrix(eps, theta)
    comp = qubit.compatibility_diagnostics(eps, theta)
    d_eps, d_theta = qubit.precision_bounds(eps, theta, n)
    q_eps, q_theta = qubit.qfi_bounds(eps, theta, n)
    return {
        "eps": float(eps),
        "theta": float(theta),
        "n": int(n),
        "density_matrix": [[float(v.real) for v in row] for row in state.matrix],
        "bloch": qubit.bloch_vector(state).as_list(),
        "qfi": qfi.tolist(),
        "qfi_expansion": qubit.qfi_expansion(eps).tolist(),
        "bounds": {
            "delta_eps_leading_order": d_eps,
            "delta_theta_leading_order": d_theta,
            "delta_eps_exact_qfi": q_eps,
            "delta_theta_exact_qfi": q_theta,
        },
        "traced_commutator": comp.traced_commutator,
        "commutator_norm": comp.commutator_norm,
        "slds_commute": comp.bases_commute,
    }


def report_fisher(d: float, sigma: float, n: int) -> dict:
    return {
        "d": float(d),
        "sigma": float(sigma),
        "n_photons": int(n),
        "fisher_demux": fisher_demux(d, sigma),
        "delta_d_demux": demux_precision(d, sigma, n),
        "fisher_direct": fisher_direct(d, sigma),
        "delta_d_direct": direct_precision(d, sigma, n),
        "delta_d_direct_asymptote": direct_precision_asymptote(d, sigma, n),
    }
