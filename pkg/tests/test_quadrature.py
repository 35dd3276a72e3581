import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from demuxsr.errors import AccuracyError
from demuxsr.quadrature import adaptive_simpson


def test_polynomial_exact():
    # Simpson is exact for cubics
    assert adaptive_simpson(lambda x: x ** 3 - 2 * x + 1, -1.0, 2.0) == pytest.approx(3.75 - 3 + 3, abs=1e-13)


def test_reversed_and_empty_interval():
    f = np.exp
    assert adaptive_simpson(f, 1.0, 0.0) == pytest.approx(-(math.e - 1), abs=1e-10)
    assert adaptive_simpson(f, 0.5, 0.5) == 0.0


def test_gaussian_normalization():
    val = adaptive_simpson(lambda x: np.exp(-x * x / 2) / math.sqrt(2 * math.pi), -12, 12)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_nonfinite_integrand_raises():
    with pytest.raises(AccuracyError):
        adaptive_simpson(lambda x: np.where(x == 0, np.nan, x), -1.0, 1.0)


def test_nonconvergence_raises():
    with pytest.raises(AccuracyError):
        adaptive_simpson(lambda x: np.sin(1.0 / np.maximum(np.abs(x), 1e-300)), 1e-12, 1.0,
                         tol=1e-14, max_rounds=3)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.2, 3))
def test_matches_scipy_quad(mu, sd):
    f = lambda x: np.exp(-0.5 * ((x - mu) / sd) ** 2) * np.cos(x)
    ref, _ = integrate.quad(f, -8, 8, epsabs=1e-14, limit=200)
    assert adaptive_simpson(f, -8, 8) == pytest.approx(ref, abs=1e-9)
