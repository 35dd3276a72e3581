"""Two-parameter qubit model in the {u, v} mode basis.

The state is

    rho(eps, theta) = [[1, theta/2], [theta/2, (eps^2 + theta^2)/4]] / Z,
    Z = 1 + eps^2/4 + theta^2/4,

with ``theta = (x_C - x_R)/sigma`` the centroid offset and ``eps`` the
effective source radius, both in units of sigma.  Everything here works on
2x2 matrices with closed-form eigendecompositions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, SingularModelError, ValidationError

STATE_TOL = 1e-12
KERNEL_TOL = 1e-14
COMMUTE_TOL = 1e-10

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)
KET_PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2)
KET_MINUS = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2)


def _hermitian(m, what="matrix") -> np.ndarray:
    m = np.array(m, dtype=complex)
    if m.shape != (2, 2):
        raise ValidationError(f"{what} must be 2x2, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > STATE_TOL:
        raise ValidationError(f"{what} is not Hermitian")
    return m


def eigh2(m):
    """Ascending eigenvalues and column eigenvectors of a 2x2 Hermitian matrix."""
    a, c = m[0, 0].real, m[1, 1].real
    b = m[0, 1]
    mean, half = 0.5 * (a + c), 0.5 * (a - c)
    r = math.hypot(half, abs(b))
    if r == 0.0:
        return np.array([mean, mean]), np.eye(2, dtype=complex)
    phi = 0.5 * math.atan2(2 * abs(b), 2 * half)
    phase = np.exp(-1j * np.angle(b)) if abs(b) > 0 else 1.0
    cos, sin = math.cos(phi), math.sin(phi)
    vecs = np.array([[-sin, cos], [cos * phase, sin * phase]], dtype=complex)
    return np.array([mean - r, mean + r]), vecs


@dataclass(frozen=True, eq=False)
class QubitState:
    matrix: np.ndarray

    def __post_init__(self):
        m = _hermitian(self.matrix, "density matrix")
        if abs(np.trace(m) - 1) > STATE_TOL:
            raise ValidationError("density matrix must have unit trace")
        if eigh2(m)[0][0] < -STATE_TOL:
            raise ValidationError("density matrix must be positive semidefinite")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def eigh(self):
        return eigh2(self.matrix)


@dataclass(frozen=True)
class BlochVector:
    s1: float
    s2: float
    s3: float

    def __post_init__(self):
        if self.s1 ** 2 + self.s2 ** 2 + self.s3 ** 2 > 1 + STATE_TOL:
            raise ValidationError("Bloch vector longer than one")

    def as_list(self) -> list[float]:
        return [self.s1, self.s2, self.s3]


@dataclass(frozen=True, eq=False)
class SLDPair:
    L_eps: np.ndarray
    L_theta: np.ndarray


@dataclass(frozen=True, eq=False)
class QFIMatrix:
    """Symmetrized quantum Fisher information, ordered (eps, theta)."""

    matrix: np.ndarray

    @property
    def eps_eps(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def eps_theta(self) -> float:
        return float(self.matrix[0, 1])

    @property
    def theta_theta(self) -> float:
        return float(self.matrix[1, 1])

    def tolist(self) -> list[list[float]]:
        return [[float(v) for v in row] for row in self.matrix]


class Compatibility(NamedTuple):
    traced_commutator: float
    bases_commute: bool
    commutator_norm: float


def _coherence(eps, theta):
    return np.array([[1.0, theta / 2], [theta / 2, (eps * eps + theta * theta) / 4]])


def density_matrix(eps: float, theta: float) -> QubitState:
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    z = 1 + eps * eps / 4 + theta * theta / 4
    return QubitState(_coherence(eps, theta) / z)


def density_derivatives(eps: float, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Analytic ``d rho / d eps`` and ``d rho / d theta`` (quotient rule)."""
    z = 1 + eps * eps / 4 + theta * theta / 4
    m = _coherence(eps, theta)
    dm_eps = np.array([[0.0, 0.0], [0.0, eps / 2]])
    dm_theta = np.array([[0.0, 0.5], [0.5, theta / 2]])
    d_eps = dm_eps / z - m * (eps / 2) / z ** 2
    d_theta = dm_theta / z - m * (theta / 2) / z ** 2
    return d_eps.astype(complex), d_theta.astype(complex)


def bloch_vector(state: QubitState) -> BlochVector:
    s = [float(np.trace(state.matrix @ p).real) for p in PAULI]
    return BlochVector(*s)


def sld(state: QubitState, d_state) -> np.ndarray:
    """Solve ``d_state = (L rho + rho L) / 2`` for the Hermitian ``L``.

    Works in the eigenbasis of ``rho``; matrix elements between two null
    eigenvectors are set to zero when ``d_state`` vanishes there too.
    """
    d_state = _hermitian(d_state, "state derivative")
    lam, u = state.eigh
    d = u.conj().T @ d_state @ u
    l = np.zeros((2, 2), dtype=complex)
    for m in range(2):
        for n in range(2):
            s = lam[m] + lam[n]
            if s < KERNEL_TOL:
                if abs(d[m, n]) >= KERNEL_TOL:
                    raise SingularModelError(
                        "state derivative has weight on the kernel of rho; no SLD exists"
                    )
                continue
            l[m, n] = 2 * d[m, n] / s
    out = u @ l @ u.conj().T
    return 0.5 * (out + out.conj().T)


def _check_origin(eps, theta):
    if eps == 0 and theta == 0:
        raise SingularModelError(
            "eps = theta = 0 is the singular boundary of the model; the eps-QFI "
            "exists there only as a limit, evaluate at small positive eps"
        )
    if eps < 0:
        raise DomainError("eps must be nonnegative")


def sld_pair(eps: float, theta: float) -> SLDPair:
    _check_origin(eps, theta)
    state = density_matrix(eps, theta)
    d_eps, d_theta = density_derivatives(eps, theta)
    return SLDPair(sld(state, d_eps), sld(state, d_theta))


def qfi_matrix(eps: float, theta: float) -> QFIMatrix:
    state = density_matrix(eps, theta)
    pair = sld_pair(eps, theta)
    ls = (pair.L_eps, pair.L_theta)
    f = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            anti = ls[i] @ ls[j] + ls[j] @ ls[i]
            f[i, j] = 0.5 * np.trace(state.matrix @ anti).real
    return QFIMatrix(f)


def qfi_expansion(eps: float) -> np.ndarray:
    """Second-order expansion ``diag(1 + eps^2/4, 1 - eps^2)`` quoted for the model."""
    return np.diag([1 + eps * eps / 4, 1 - eps * eps])


def precision_bounds(eps: float, theta: float, n: int) -> tuple[float, float]:
    """Leading-order lower bounds on the standard deviations of ``eps`` and ``theta``.

    ``theta`` does not enter at this order; it is accepted for symmetry with
    :func:`qfi_bounds`.
    """
    if n < 1:
        raise DomainError("number of repetitions must be at least 1")
    root_n = math.sqrt(n)
    return math.sqrt(1 - eps * eps / 4) / root_n, math.sqrt(1 + eps * eps) / root_n


def qfi_bounds(eps: float, theta: float, n: int) -> tuple[float, float]:
    """Bounds from the diagonal of the inverse exact QFI matrix."""
    if n < 1:
        raise DomainError("number of repetitions must be at least 1")
    cov = np.linalg.inv(qfi_matrix(eps, theta).matrix) / n
    return float(math.sqrt(cov[0, 0])), float(math.sqrt(cov[1, 1]))


def classical_fisher(state: QubitState, d_state, basis) -> float:
    """Fisher information of the projective measurement onto the kets in ``basis``."""
    total = 0.0
    for ket in basis:
        ket = np.asarray(ket, dtype=complex)
        p = float((ket.conj() @ state.matrix @ ket).real)
        dp = float((ket.conj() @ np.asarray(d_state) @ ket).real)
        if p < KERNEL_TOL:
            if abs(dp) >= KERNEL_TOL:
                return math.inf
            continue
        total += dp * dp / p
    return total


def compatibility_diagnostics(eps: float, theta: float) -> Compatibility:
    """Traced commutator ``|Tr(rho [L_eps, L_theta])|`` and operator commutativity."""
    state = density_matrix(eps, theta)
    pair = sld_pair(eps, theta)
    comm = pair.L_eps @ pair.L_theta - pair.L_theta @ pair.L_eps
    traced = abs(np.trace(state.matrix @ comm))
    norm = float(np.linalg.norm(comm, 2))
    return Compatibility(float(traced), norm < COMMUTE_TOL, norm)


def eigenbasis(op) -> list[np.ndarray]:
    """Eigenvectors of a 2x2 Hermitian operator, ascending eigenvalue order."""
    _, vecs = eigh2(_hermitian(op))
    return [vecs[:, 0], vecs[:, 1]]


def basis_overlap(found, expected) -> float:
    """Smallest ``|<e|f>|^2`` after matching each expected ket to its best found ket."""
    return min(max(abs(np.vdot(e, f)) ** 2 for f in found) for e in expected)
