import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demuxsr import qubit
from demuxsr.errors import DomainError, SingularModelError, ValidationError
from demuxsr.qubit import (
    KET0,
    KET1,
    KET_MINUS,
    KET_PLUS,
    PAULI,
    QubitState,
    basis_overlap,
    bloch_vector,
    classical_fisher,
    compatibility_diagnostics,
    density_derivatives,
    density_matrix,
    eigenbasis,
    precision_bounds,
    qfi_bounds,
    qfi_matrix,
    sld,
    sld_pair,
)
from oracles import exact_qfi_closed_form, fidelity_qfi, rho_plain


def test_density_matrix_examples():
    np.testing.assert_array_equal(density_matrix(0, 0).matrix.real, [[1, 0], [0, 0]])
    m = density_matrix(0.05, 0).matrix.real
    assert m[1, 1] == pytest.approx(0.000625 / 1.000625, rel=1e-14)
    assert m[0, 1] == 0 and np.trace(m) == pytest.approx(1.0, abs=1e-15)
    assert abs(np.linalg.det(density_matrix(0, 0.1).matrix)) < 1e-15


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(-1, 1))
def test_density_matrix_invariants(eps, theta):
    s = density_matrix(eps, theta)
    lam, _ = s.eigh
    assert lam[0] >= -1e-12 and abs(lam.sum() - 1) < 1e-12
    b = bloch_vector(s)
    assert sum(v * v for v in b.as_list()) <= 1 + 1e-12


def test_state_validation():
    with pytest.raises(ValidationError):
        QubitState(np.eye(2))
    with pytest.raises(ValidationError):
        QubitState(np.array([[1.5, 0], [0, -0.5]]))
    with pytest.raises(ValidationError):
        QubitState(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(DomainError):
        density_matrix(-0.1, 0.0)


def test_bloch_examples():
    assert bloch_vector(density_matrix(0, 0)).as_list() == pytest.approx([0, 0, 1])
    eps, theta = 0.05, 0.025
    z = 1 + eps ** 2 / 4 + theta ** 2 / 4
    b = bloch_vector(density_matrix(eps, theta))
    assert b.s1 == pytest.approx(theta / z, rel=1e-14)
    assert b.s2 == pytest.approx(0.0, abs=1e-16)
    assert b.s3 == pytest.approx((1 - eps ** 2 / 4 - theta ** 2 / 4) / z, rel=1e-14)


@pytest.mark.parametrize("eps, theta", [(0.03, 0.03), (0.01, 0.02), (0.05, 0.0), (0.0, 0.01)])
def test_bloch_small_parameter_form(eps, theta):
    b = bloch_vector(density_matrix(eps, theta))
    assert abs(b.s1 - (1 - eps ** 2 / 2) * math.sin(theta)) <= 1e-5
    assert abs(b.s3 - (1 - eps ** 2 / 2) * math.cos(theta)) <= 1e-5


@pytest.mark.parametrize("eps, theta", [(0.05, 0.025), (0.2, -0.1)])
def test_derivatives_match_finite_differences(eps, theta):
    h = 1e-6
    d_eps, d_theta = density_derivatives(eps, theta)
    fd_eps = (rho_plain(eps + h, theta) - rho_plain(eps - h, theta)) / (2 * h)
    fd_theta = (rho_plain(eps, theta + h) - rho_plain(eps, theta - h)) / (2 * h)
    np.testing.assert_allclose(d_eps.real, fd_eps, atol=1e-9)
    np.testing.assert_allclose(d_theta.real, fd_theta, atol=1e-9)


def test_sld_of_pure_zero_state_is_pauli_x():
    l = sld(density_matrix(0, 0), [[0, 0.5], [0.5, 0]])
    np.testing.assert_allclose(l, PAULI[0], atol=1e-15)
    assert basis_overlap(eigenbasis(l), [KET_PLUS, KET_MINUS]) == pytest.approx(1.0, abs=1e-15)


def test_sld_commuting_case():
    s = QubitState(np.diag([0.7, 0.3]))
    l = sld(s, np.diag([0.1, -0.1]))
    np.testing.assert_allclose(l, np.diag([0.1 / 0.7, -0.1 / 0.3]), atol=1e-15)


def test_sld_kernel_inconsistency_raises():
    with pytest.raises(SingularModelError):
        sld(density_matrix(0, 0), np.diag([-0.1, 0.1]))


def random_state(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    m = a @ a.conj().T + 0.05 * np.eye(2)
    return QubitState(m / np.trace(m).real)


@pytest.mark.parametrize("seed", range(20))
def test_sld_residual_random_states(seed):
    rng = np.random.default_rng(seed)
    s = random_state(rng)
    b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    d = b + b.conj().T
    d -= np.trace(d) / 2 * np.eye(2)
    l = sld(s, d)
    assert np.linalg.norm(l - l.conj().T) <= 1e-12
    assert np.linalg.norm(d - 0.5 * (l @ s.matrix + s.matrix @ l)) <= 1e-10


def test_origin_is_refused():
    with pytest.raises(SingularModelError):
        qfi_matrix(0.0, 0.0)
    with pytest.raises(SingularModelError):
        sld_pair(0.0, 0.0)


@pytest.mark.parametrize("eps, theta", [(0.02, 0.0), (0.05, 0.025), (0.1, 0.05), (0.3, -0.2), (0.01, 0.1)])
def test_qfi_matches_fidelity_oracle(eps, theta):
    q = qfi_matrix(eps, theta).matrix
    np.testing.assert_allclose(q, fidelity_qfi(eps, theta), atol=1e-5)


@settings(max_examples=80, deadline=None)
@given(st.floats(1e-3, 0.3), st.floats(-0.3, 0.3))
def test_qfi_closed_form_and_psd(eps, theta):
    q = qfi_matrix(eps, theta).matrix
    np.testing.assert_allclose(q, exact_qfi_closed_form(eps, theta), atol=1e-10)
    assert q[0, 1] == pytest.approx(q[1, 0], abs=1e-14)
    assert np.linalg.eigvalsh(q).min() >= -1e-10


def test_qfi_small_eps_limit_and_offdiagonal():
    assert qfi_matrix(1e-4, 0.0).eps_eps == pytest.approx(1.0, abs=1e-7)
    assert abs(qfi_matrix(0.05, 0.025).eps_theta) <= 1e-3


def test_qfi_eps_value_at_theta_zero():
    # two-outcome diagonal model p = (eps^2/4) / (1 + eps^2/4)
    eps = 0.1
    p = lambda e: (e * e / 4) / (1 + e * e / 4)
    h = 1e-6
    dp = (p(eps + h) - p(eps - h)) / (2 * h)
    classical = dp * dp / p(eps) + dp * dp / (1 - p(eps))
    assert qfi_matrix(eps, 0.0).eps_eps == pytest.approx(classical, rel=1e-8)
    assert qfi_matrix(eps, 0.0).eps_eps == pytest.approx(0.995019, rel=1e-6)


@pytest.mark.parametrize("eps", [0.02, 0.05, 0.1, 0.3])
def test_demux_measurement_saturates_eps(eps):
    s = density_matrix(eps, 0.0)
    d_eps, _ = density_derivatives(eps, 0.0)
    assert classical_fisher(s, d_eps, [KET0, KET1]) == pytest.approx(qfi_matrix(eps, 0.0).eps_eps, abs=1e-10)


@pytest.mark.parametrize("theta", [1e-2, 1e-3, 1e-4])
def test_phase_measurement_saturates_theta(theta):
    s = density_matrix(0.0, theta)
    _, d_theta = density_derivatives(0.0, theta)
    cf = classical_fisher(s, d_theta, [KET_PLUS, KET_MINUS])
    assert cf == pytest.approx(qfi_matrix(0.0, theta).theta_theta, abs=1e-6 + theta ** 2)


def test_compatibility_at_reference_point():
    c = compatibility_diagnostics(0.05, 0.025)
    assert c.traced_commutator <= 1e-10
    assert not c.bases_commute
    assert c.commutator_norm > 0.1


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 0.3), st.floats(-0.3, 0.3))
def test_weak_commutativity_everywhere(eps, theta):
    assert compatibility_diagnostics(eps, theta).traced_commutator <= 1e-10


def test_sld_eigenbases_near_origin():
    pair = sld_pair(1e-3, 1e-3)
    assert basis_overlap(eigenbasis(pair.L_eps), [KET0, KET1]) >= 1 - 1e-4
    assert basis_overlap(eigenbasis(pair.L_theta), [KET_PLUS, KET_MINUS]) >= 1 - 1e-4


def test_precision_bounds_examples():
    assert precision_bounds(0.0, 0.0, 10_000) == pytest.approx((0.01, 0.01))
    assert precision_bounds(0.05, 0.0, 100_000)[0] == pytest.approx(3.1613e-3, rel=1e-4)
    assert precision_bounds(0.05, 0.0, 10_000)[1] == pytest.approx(0.0100125, rel=1e-6)
    with pytest.raises(DomainError):
        precision_bounds(0.05, 0.0, 0)


def test_exact_bounds_track_leading_order():
    # the exact bounds are Z / sqrt(N) in both parameters
    for eps in (0.02, 0.05):
        z = 1 + eps ** 2 / 4
        q_eps, q_theta = qfi_bounds(eps, 0.0, 10_000)
        assert q_eps == pytest.approx(z / 100, rel=1e-10)
        assert q_theta == pytest.approx(z / 100, rel=1e-10)
        lead = precision_bounds(eps, 0.0, 10_000)
        assert abs(q_theta - lead[1]) <= eps ** 2 / 100
