"""Stability of the drift matrix and the steady-state covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import NonPhysicalInput, SingularSystem, UnstableSystem

#: A drift matrix counts as stable only if every eigenvalue has real part
#: below -STABILITY_EPS (units of omega_m).
STABILITY_EPS = 1e-9

#: Relative residual bound for an accepted Lyapunov solve.
RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    margin: float
    eigenvalues: tuple


@dataclass(frozen=True)
class CovarianceMatrix:
    V: np.ndarray
    residual: float

    def block(self, i, j):
        """2x2 block between modes ``i`` and ``j`` (0, 1, 2 in u-order)."""
        return self.V[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]


def _as_square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def check_stability(A) -> StabilityReport:
    """Routh-Hurwitz stability via the spectral abscissa of ``A``."""
    A = _as_square(A)
    eig = np.linalg.eigvals(A)
    margin = float(np.max(eig.real))
    return StabilityReport(stable=margin < -STABILITY_EPS, margin=margin, eigenvalues=tuple(eig))


def lyapunov_residual(A, V, D):
    return float(np.linalg.norm(A @ V + V @ A.T + D))


def solve_steady_lyapunov(A, D) -> CovarianceMatrix:
    """Solve A V + V A^T = -D by a dense Kronecker-product linear solve.

    The 36-dimensional system (I (x) A + A (x) I) vec(V) = -vec(D) is solved
    directly and the result symmetrized.  The solve is rejected if the
    residual exceeds 1e-10 (|A| |V| + |D|).
    """
    A = _as_square(A)
    D = _as_square(D, "D")
    n = A.shape[0]
    report = check_stability(A)
    if not report.stable:
        raise UnstableSystem(report.margin)

    eye = np.eye(n)
    K = np.kron(A, eye) + np.kron(eye, A)
    try:
        v = np.linalg.solve(K, -D.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"Lyapunov operator is singular: {exc}") from None
    V = v.reshape(n, n)
    V = 0.5 * (V + V.T)

    residual = lyapunov_residual(A, V, D)
    bound = RESIDUAL_RTOL * (np.linalg.norm(A) * np.linalg.norm(V) + np.linalg.norm(D))
    if not np.isfinite(residual) or residual > bound:
        raise SingularSystem(
            f"Lyapunov residual {residual:.3e} exceeds {bound:.3e}; operator is ill-conditioned"
        )
    V.setflags(write=False)
    return CovarianceMatrix(V=V, residual=residual)


def symplectic_form(n_modes=3):
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def uncertainty_eigenvalue(V):
    """Smallest eigenvalue of V + i Omega / 2 (>= 0 for a physical state)."""
    V = np.asarray(V, dtype=float)
    omega = symplectic_form(V.shape[0] // 2)
    return float(np.linalg.eigvalsh(V + 0.5j * omega)[0])


def check_physical(V, tol=1e-10):
    """Raise NonPhysicalInput unless V is symmetric, PSD and obeys the uncertainty relation."""
    V = np.asarray(V, dtype=float)
    scale = max(np.max(np.abs(V)), 1.0)
    if np.max(np.abs(V - V.T)) > 1e-12 * scale:
        raise NonPhysicalInput("covariance matrix is not symmetric")
    if np.linalg.eigvalsh(V)[0] < -tol:
        raise NonPhysicalInput("covariance matrix is not positive semidefinite")
    if uncertainty_eigenvalue(V) < -tol:
        raise NonPhysicalInput("covariance matrix violates the uncertainty relation")


# --- time-domain propagation (used as an independent check) -----------------


def discretize(A, D, h):
    """Exact one-step transition of du = A u dt + noise over a time ``h``.

    Returns (Phi, Q) with Phi = exp(A h) and Q = int_0^h exp(A s) D exp(A^T s) ds,
    computed with Van Loan's block-exponential construction.
    """
    A = _as_square(A)
    D = _as_square(D, "D")
    n = A.shape[0]
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -A
    M[:n, n:] = D
    M[n:, n:] = A.T
    E = expm(M * h)
    phi = E[n:, n:].T
    Q = phi @ E[:n, n:]
    return phi, 0.5 * (Q + Q.T)


def propagate_covariance(A, D, t, *, V0=None, h=1.0):
    """Solution at time ``t`` of dV/dt = A V + V A^T + D.

    Whole steps of length ``h`` are composed by binary doubling of the
    transition, so the cost is logarithmic in t / h; a fractional remainder
    takes one extra exact step.
    """
    A = _as_square(A)
    n = A.shape[0]
    phi, Q = discretize(A, D, h)
    V = np.zeros((n, n)) if V0 is None else np.array(V0, dtype=float)
    steps = int(t // h)
    rest = t - steps * h
    while steps:
        if steps & 1:
            V = phi @ V @ phi.T + Q
        Q = phi @ Q @ phi.T + Q
        phi = phi @ phi
        steps >>= 1
    if rest > 0:
        phi_r, Q_r = discretize(A, D, rest)
        V = phi_r @ V @ phi_r.T + Q_r
    return 0.5 * (V + V.T)
