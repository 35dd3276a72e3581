import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demuxsr.errors import DomainError, UnsupportedSamplerError, ValidationError
from demuxsr.optics import GaussianPSF, gaussian_basis, tabulate
from demuxsr.photostats import (
    ScanDataset,
    ScanPoint,
    detection_probability_exact,
    detection_probability_linearized,
    direct_pdf,
    direct_pdf_support,
    direct_variance,
    i_centroid,
    sample_centroid_mean,
    sample_mode_counts,
    sample_positions,
    steiner_probability,
)
from demuxsr.quadrature import adaptive_simpson
from demuxsr.rng import substream
from demuxsr.sources import SourceEnsemble, centroid, symmetric_pair
from oracles import overlap_quad

FIG1 = symmetric_pair(0.05, 0.025)


def test_exact_probability_at_centroid():
    p = detection_probability_exact(FIG1, gaussian_basis(1.0), centroid(FIG1))
    assert p == pytest.approx(overlap_quad(0.05) ** 2, rel=1e-10)
    assert p == pytest.approx(6.246e-4, rel=1e-3)


def test_exact_probability_off_centroid_matches_oracle():
    p = detection_probability_exact(FIG1, gaussian_basis(1.0), 0.0)
    ref = 0.5 * overlap_quad(-0.025) ** 2 + 0.5 * overlap_quad(0.075) ** 2
    assert p == pytest.approx(ref, rel=1e-10)


def test_linearized_probability_values():
    assert detection_probability_linearized(FIG1, 1.0, centroid(FIG1)) == pytest.approx(6.25e-4, rel=1e-12)
    assert i_centroid(FIG1, 1.0) == pytest.approx(6.25e-4, rel=1e-12)


def test_single_source_on_axis_is_dark():
    e = SourceEnsemble([0.4], [1.0])
    assert detection_probability_exact(e, gaussian_basis(1.0), 0.4) == 0.0
    assert detection_probability_linearized(e, 1.0, 0.4) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 1), st.floats(0, 0.5), st.floats(-1, 1), st.floats(0.3, 3))
def test_linearized_equals_steiner(xc, d, xr, sigma):
    e = symmetric_pair(d, xc)
    lin = detection_probability_linearized(e, sigma, xr)
    st_ = steiner_probability(i_centroid(e, sigma), centroid(e), sigma, xr)
    assert lin == pytest.approx(float(st_), rel=1e-9, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.2, 0.2), st.floats(0, 0.2))
def test_exact_below_linearized_with_fourth_order_gap(xr, d):
    # c^2 = (delta/2)^2 exp(-delta^2/4) lies between (delta/2)^2 (1 - delta^2/4) and (delta/2)^2
    e = symmetric_pair(d, 0.0)
    ex = detection_probability_exact(e, gaussian_basis(1.0), xr)
    lin = detection_probability_linearized(e, 1.0, xr)
    quartic = sum(0.5 * (x - xr) ** 4 / 16 for x in e.positions)
    assert ex <= lin + 1e-16
    assert lin - ex <= quartic + 1e-16


def test_steiner_is_vectorized_and_validated():
    x = np.array([0.0, 0.1, 0.2])
    np.testing.assert_allclose(steiner_probability(1e-3, 0.1, 1.0, x), 1e-3 + (x - 0.1) ** 2 / 4)
    with pytest.raises(DomainError):
        steiner_probability(-1.0, 0.0, 1.0, 0.0)


def test_tabulated_psf_probability_matches_gaussian():
    from demuxsr.optics import derivative_mode
    basis = derivative_mode(tabulate(GaussianPSF(1.0)))
    p = detection_probability_exact(FIG1, basis, 0.0)
    assert p == pytest.approx(detection_probability_exact(FIG1, gaussian_basis(1.0), 0.0), rel=1e-5)


@pytest.mark.parametrize("sigma", [0.5, 1.0])
def test_direct_pdf_normalized(sigma):
    psf = GaussianPSF(sigma)
    lo, hi = direct_pdf_support(FIG1, psf)
    assert adaptive_simpson(lambda x: direct_pdf(FIG1, psf, x), lo, hi) == pytest.approx(1.0, abs=1e-10)


def test_direct_variance_monte_carlo():
    psf = GaussianPSF(1.0)
    x = sample_positions(FIG1, psf, 1_000_000, np.random.default_rng(5)).positions
    var = direct_variance(FIG1, psf)
    assert var == pytest.approx(1.0025, rel=1e-12)
    # standard error of the sample variance of a near-normal sample is var*sqrt(2/n)
    assert abs(x.var() - var) < 4 * var * np.sqrt(2 / x.size)


def test_sampler_reproducible():
    psf = GaussianPSF(1.0)
    a = sample_positions(FIG1, psf, 100, substream(3, 7)).positions
    b = sample_positions(FIG1, psf, 100, substream(3, 7)).positions
    np.testing.assert_array_equal(a, b)
    assert sample_mode_counts(0.3, 1000, substream(1, 2)) == sample_mode_counts(0.3, 1000, substream(1, 2))


def test_sampler_rejects_non_gaussian():
    with pytest.raises(UnsupportedSamplerError):
        sample_positions(FIG1, tabulate(GaussianPSF(1.0)), 10, np.random.default_rng(0))


def test_binomial_counts_mean():
    rng = np.random.default_rng(2)
    k = np.array([sample_mode_counts(6.246e-4, 100_000, rng) for _ in range(4000)])
    assert abs(k.mean() - 62.46) < 4 * np.sqrt(62.46 / 4000)
    with pytest.raises(DomainError):
        sample_mode_counts(1.5, 10, rng)


def test_centroid_mean_sampler_distribution():
    psf = GaussianPSF(1.0)
    rng = np.random.default_rng(9)
    n = 50
    means = np.array([sample_centroid_mean(FIG1, psf, n, rng) for _ in range(20000)])
    assert abs(means.mean() - 0.025) < 4 * np.sqrt(1.0025 / n / 20000)
    assert means.var() == pytest.approx(1.0025 / n, rel=0.05)


def test_scan_point_validation():
    with pytest.raises(ValidationError):
        ScanPoint(0.0, 10, 11)
    with pytest.raises(ValidationError):
        ScanDataset.from_arrays([0.0, 0.0], [10, 10], [1, 2], 1.0)


def test_scan_csv_round_trip(tmp_path):
    data = ScanDataset.from_arrays([-0.1, 0.0, 0.1], [100, 100, 100], [3, 0, 2.5], 1.0, seed=4)
    path = tmp_path / "scan.csv"
    path.write_text(data.to_csv({"config_hash": "abc"}))
    back = ScanDataset.read_csv(path)
    assert back.seed == 4 and back.sigma == 1.0
    np.testing.assert_array_equal(back.counts, data.counts)
    np.testing.assert_array_equal(back.x_R, data.x_R)
