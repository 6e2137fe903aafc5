"""Bipartite Gaussian correlations from the steady-state covariance matrix.

Everything here works with the vacuum-variance-1/2 convention of the model:
a single-mode block of a pure state has determinant 1/4 and every
symplectic eigenvalue is >= 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPhysicalInput
from .lyapunov import CovarianceMatrix, StabilityReport

#: Bipartitions by short label -> (mode i, mode j) in u-order
#: (0 optical, 1 acoustic, 2 mechanical).  Mode i is the first label.
PAIRS = {"om": (0, 2), "oa": (0, 1), "ma": (2, 1)}

PAIR_NAMES = {
    "om": "optical-mechanical",
    "oa": "optical-acoustic",
    "ma": "mechanical-acoustic",
}

#: "consistent": leading entropy term taken on the measured mode i, so the
#: measure vanishes on product states.  "printed": leading term on mode j,
#: kept for comparison with the formula as usually transcribed.
CONVENTIONS = ("consistent", "printed")

SQRT_TOL = 1e-12
#: Symplectic eigenvalues come out of nested square roots, so a pure-state
#: value of 1/2 is only reproduced to about sqrt(machine epsilon).
ARG_TOL = 1e-7
I3_ZERO = 1e-14


def pair_label(pair):
    """Normalize a pair given as short label or long name to its short label."""
    if pair in PAIRS:
        return pair
    for short, name in PAIR_NAMES.items():
        if pair == name or pair == name.replace("-", "_"):
            return short
    raise ValueError(f"unknown bipartition {pair!r}; expected one of {sorted(PAIRS)}")


@dataclass(frozen=True)
class Bipartition:
    pair: str
    chi: np.ndarray


@dataclass(frozen=True)
class Invariants4:
    I1: float
    I2: float
    I3: float
    I4: float

    def __iter__(self):
        return iter((self.I1, self.I2, self.I3, self.I4))


@dataclass(frozen=True)
class CorrelationReport:
    pair: str
    nu_minus: float
    E_N: float
    eps_QD: float
    branch_used: int


@dataclass(frozen=True)
class FullReport:
    stable: bool
    margin: float
    residual: float
    reports: dict = field(default_factory=dict)

    def __getitem__(self, pair):
        return self.reports[pair_label(pair)]


def extract_bipartition(V, pair) -> Bipartition:
    """Two-mode covariance of ``pair`` with the third mode traced out."""
    if isinstance(V, CovarianceMatrix):
        V = V.V
    V = np.asarray(V, dtype=float)
    label = pair_label(pair)
    i, j = PAIRS[label]
    idx = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1]
    return Bipartition(pair=label, chi=V[np.ix_(idx, idx)].copy())


def _chi(chi):
    if isinstance(chi, Bipartition):
        chi = chi.chi
    chi = np.asarray(chi, dtype=float)
    if chi.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {chi.shape}")
    return chi


def symplectic_invariants(chi) -> Invariants4:
    chi = _chi(chi)
    return Invariants4(
        I1=float(np.linalg.det(chi[:2, :2])),
        I2=float(np.linalg.det(chi[2:, 2:])),
        I3=float(np.linalg.det(chi[:2, 2:])),
        I4=float(np.linalg.det(chi)),
    )


def _invariants(obj):
    return obj if isinstance(obj, Invariants4) else symplectic_invariants(obj)


def _clamped_sqrt(x, what, scale=1.0):
    """sqrt(x), clamping x to 0 when it is negative by less than SQRT_TOL * scale."""
    if x < 0:
        if x < -SQRT_TOL * max(1.0, scale):
            raise NonPhysicalInput(f"negative {what}: {x:.3e}")
        x = 0.0
    return math.sqrt(x)


def symplectic_pair(total, I4, what="discriminant"):
    """Roots (lower, upper) of nu^4 - total nu^2 + I4 = 0."""
    root = _clamped_sqrt(total * total - 4 * I4, what, total * total)
    lower = _clamped_sqrt((total - root) / 2, "squared symplectic eigenvalue")
    upper = _clamped_sqrt((total + root) / 2, "squared symplectic eigenvalue")
    return lower, upper


def log_negativity(chi):
    """Smallest partially transposed symplectic eigenvalue and E_N.

    Returns ``(nu_minus, E_N)`` with E_N = max(0, -ln(2 nu_minus)).
    """
    I1, I2, I3, I4 = _invariants(chi)
    nu_minus, _ = symplectic_pair(I1 + I2 - 2 * I3, I4)
    if nu_minus >= 0.5:
        return nu_minus, 0.0
    if nu_minus == 0.0:
        raise NonPhysicalInput("partially transposed symplectic eigenvalue is zero")
    return nu_minus, max(0.0, -math.log(2 * nu_minus))


def thermal_entropy(x):
    """Von Neumann entropy of a mode with symplectic eigenvalue ``x``.

    (x + 1/2) ln(x + 1/2) - (x - 1/2) ln(x - 1/2), with 0 ln 0 = 0, so it
    vanishes at the pure-state value x = 1/2.
    """
    if not x >= 0.5 - ARG_TOL:
        raise NonPhysicalInput(f"entropy argument {x!r} below 1/2")
    if x <= 0.5:
        return 0.0
    return (x + 0.5) * math.log(x + 0.5) - (x - 0.5) * math.log(x - 0.5)


def _soft_sqrt(x, scale=1.0):
    if x < 0:
        return math.nan if x < -SQRT_TOL * max(1.0, scale) else 0.0
    return math.sqrt(x)


def discord_branch_values(inv):
    """Both closed-form candidates for the optimal conditional determinant.

    Returns ``(first, second, condition)``.  A candidate whose square root
    argument is negative comes back as NaN; ``first`` is NaN when I3 = 0
    (the branch condition diverges) or the measured mode is pure.
    """
    I1, I2, I3, I4 = _invariants(inv)
    P = I1 * I2 + I4 - I3 * I3
    second = (P - _soft_sqrt(P * P - 4 * I1 * I2 * I4, P * P)) / (2 * I1)
    if abs(I3) < I3_ZERO or 4 * I1 - 1 <= 0:
        return math.nan, second, math.inf
    condition = 4 * (I1 * I2 - I4) ** 2 / ((I2 + 4 * I4) * (1 + 4 * I1) * I3 * I3)
    cross = (4 * I1 - 1) * (4 * I4 - I2)
    inner = _soft_sqrt(4 * I3 * I3 + cross, 4 * I3 * I3 + abs(cross))
    first = ((2 * abs(I3) + inner) / (4 * I1 - 1)) ** 2
    return first, second, condition


def conditional_determinant(inv):
    """Optimal conditional determinant and which branch produced it (1 or 2)."""
    first, second, condition = discord_branch_values(inv)
    value, branch = (first, 1) if condition <= 1 else (second, 2)
    if not math.isfinite(value):
        raise NonPhysicalInput(f"conditional determinant undefined on branch {branch}")
    return value, branch


def gaussian_discord(chi, *, convention="consistent"):
    """Gaussian quantum discord of the two-mode state ``chi``, measuring mode i.

        eps_QD = f(sqrt(I1)) - f(eta_-) - f(eta_+) + f(sqrt(eps))

    with f the thermal entropy, eta_+- the symplectic eigenvalues of chi and
    eps the optimal conditional determinant of mode j after a Gaussian
    measurement on mode i.  ``convention="printed"`` uses f(sqrt(I2)) as the
    leading term instead; that form is nonzero (of either sign) on product
    states with I1 != I2.

    Returns ``(eps_QD, branch_used)``.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown discord convention {convention!r}")
    inv = _invariants(chi)
    I1, I2, I3, I4 = inv
    if I1 <= 0 or I2 <= 0:
        raise NonPhysicalInput("single-mode determinants must be positive")
    eta_minus, eta_plus = symplectic_pair(I1 + I2 + 2 * I3, I4)
    eps, branch = conditional_determinant(inv)
    leading = math.sqrt(I1) if convention == "consistent" else math.sqrt(I2)
    value = (
        thermal_entropy(leading)
        - thermal_entropy(eta_minus)
        - thermal_entropy(eta_plus)
        + thermal_entropy(_clamped_sqrt(eps, "conditional determinant"))
    )
    return value, branch


def correlation_report(chi, pair=None, *, convention="consistent") -> CorrelationReport:
    if isinstance(chi, Bipartition):
        pair = chi.pair if pair is None else pair
    inv = symplectic_invariants(chi)
    nu_minus, E_N = log_negativity(inv)
    eps_QD, branch = gaussian_discord(inv, convention=convention)
    return CorrelationReport(
        pair=pair_label(pair) if pair is not None else "",
        nu_minus=nu_minus,
        E_N=E_N,
        eps_QD=eps_QD,
        branch_used=branch,
    )


def full_report(cov, stability: StabilityReport | None = None, *, convention="consistent") -> FullReport:
    """Reports for all three bipartitions plus the solver diagnostics."""
    V = cov.V if isinstance(cov, CovarianceMatrix) else np.asarray(cov, dtype=float)
    residual = cov.residual if isinstance(cov, CovarianceMatrix) else math.nan
    reports = {
        label: correlation_report(extract_bipartition(V, label), convention=convention)
        for label in PAIRS
    }
    return FullReport(
        stable=True if stability is None else stability.stable,
        margin=math.nan if stability is None else stability.margin,
        residual=residual,
        reports=reports,
    )
