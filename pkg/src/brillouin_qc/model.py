"""Three-mode linearized model: parameters, mean fields, drift and diffusion.

All rates, detunings and couplings are in units of the mechanical frequency
``omega_m`` (1.0 internally).  The quadrature vector is ordered

    u = (X_a1, Y_a1, X_ba, Y_ba, X_bm, Y_bm)

i.e. optical, acoustic, mechanical, with X = (o + o^dag)/sqrt(2) and
Y = i(o^dag - o)/sqrt(2).  Vacuum quadrature variance is 1/2.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence, ParameterError

#: omega_m / 2pi in Hz, used only when reporting in SI units.
OMEGA_M_HZ = 1.0e6

#: Quadrature-index offsets of each mode in ``u``.
OPTICAL, ACOUSTIC, MECHANICAL = 0, 2, 4


def _finite(name, value):
    if not isinstance(value, (int, float, np.floating, np.integer)) or isinstance(value, bool):
        raise ParameterError(name, f"expected a real number, got {value!r}")
    if not math.isfinite(value):
        raise ParameterError(name, f"must be finite, got {value!r}")


def _positive(name, value):
    _finite(name, value)
    if value <= 0:
        raise ParameterError(name, f"must be > 0, got {value!r}")


def _nonnegative(name, value):
    _finite(name, value)
    if value < 0:
        raise ParameterError(name, f"must be >= 0, got {value!r}")


@dataclass(frozen=True)
class SystemParams:
    """Effective parameters of the linearized three-mode system.

    ``G_m`` and ``G_a`` are taken real.  ``theta`` is the phase of the
    phonon hopping ``J_m``.
    """

    kappa: float
    gamma_m: float
    gamma_a: float
    delta_tilde: float
    delta_a: float
    G_m: float
    G_a: float
    J_m: float = 0.0
    theta: float = 0.0
    n_th: float = 0.0
    omega_m: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("kappa", "gamma_m", "gamma_a", "omega_m"):
            _positive(name, getattr(self, name))
        for name in ("n_th", "J_m"):
            _nonnegative(name, getattr(self, name))
        for name in ("delta_tilde", "delta_a", "G_m", "G_a", "theta"):
            _finite(name, getattr(self, name))

    def replace(self, **changes) -> SystemParams:
        return dataclasses.replace(self, **changes)

    def asdict(self):
        return dataclasses.asdict(self)


#: Field names that may be swept or bisected.
PARAM_FIELDS = tuple(f.name for f in dataclasses.fields(SystemParams))

#: Parameter set shared by all figures (red sideband, optimal acoustic
#: detuning, G_a picked per figure).
FIG2 = SystemParams(
    kappa=0.02,
    gamma_m=1e-4,
    gamma_a=0.4,
    delta_tilde=-1.0,
    delta_a=1.0,
    G_m=0.15,
    G_a=0.15,
    J_m=0.0,
    theta=math.pi / 2,
    n_th=100.0,
)


def fig2(**overrides) -> SystemParams:
    return FIG2.replace(**overrides)


@dataclass(frozen=True)
class RawParams:
    """Parameters before eliminating the control mode a2.

    ``omega_a`` is recorded for bookkeeping only; the dynamics depend on it
    through ``delta_a``.
    """

    g_m: float
    g_a: float
    E_1: float
    E_2: float
    delta_1: float
    delta_2: float
    kappa_2: float
    kappa: float
    gamma_m: float
    gamma_a: float
    delta_a: float
    J_m: float = 0.0
    theta: float = 0.0
    n_th: float = 0.0
    omega_m: float = 1.0
    omega_a: float | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("kappa", "kappa_2", "gamma_m", "gamma_a", "omega_m"):
            _positive(name, getattr(self, name))
        for name in ("E_1", "E_2", "n_th", "J_m"):
            _nonnegative(name, getattr(self, name))
        for name in ("g_m", "g_a", "delta_1", "delta_2", "delta_a", "theta"):
            _finite(name, getattr(self, name))
        if self.omega_a is not None:
            _finite("omega_a", self.omega_a)

    def replace(self, **changes) -> RawParams:
        return dataclasses.replace(self, **changes)

    def asdict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class MeanFields:
    alpha_1: complex
    alpha_2: complex
    beta_a: complex
    beta_m: complex
    residual: float = 0.0
    iterations: int = 0


@dataclass(frozen=True)
class LinearModel:
    """Drift ``A`` and diffusion ``D`` of du = A u dt + noise."""

    A: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in ("A", "D"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (6, 6):
                raise ParameterError(name, f"expected a 6x6 matrix, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ParameterError(name, "contains non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _hopping_blocks(J_m, theta):
    s, c = math.sin(theta), math.cos(theta)
    # rows acoustic / columns mechanical, and the converse
    to_acoustic = J_m * np.array([[s, c], [-c, s]])
    to_mechanical = J_m * np.array([[-s, c], [-c, -s]])
    return to_acoustic, to_mechanical


def build_drift_matrix(params: SystemParams) -> np.ndarray:
    """Drift matrix of the quadrature fluctuations, hopping blocks included.

    With ``J_m = 0`` this is exactly the textbook three-mode matrix with the
    optical mode coupled to the acoustic mode by a beam splitter (G_a) and to
    the mechanical position by radiation pressure (G_m).
    """
    params.validate()
    k, ga, gm = params.kappa, params.gamma_a, params.gamma_m
    dt, da, wm = params.delta_tilde, params.delta_a, params.omega_m
    Gm, Ga = params.G_m, params.G_a

    A = np.array(
        [
            [-k / 2, -dt, 0.0, -Ga, 0.0, 0.0],
            [dt, -k / 2, Ga, 0.0, 2 * Gm, 0.0],
            [0.0, -Ga, -ga / 2, da, 0.0, 0.0],
            [Ga, 0.0, -da, -ga / 2, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, -gm / 2, wm],
            [2 * Gm, 0.0, 0.0, 0.0, -wm, -gm / 2],
        ]
    )
    to_acoustic, to_mechanical = _hopping_blocks(params.J_m, params.theta)
    A[ACOUSTIC : ACOUSTIC + 2, MECHANICAL : MECHANICAL + 2] = to_acoustic
    A[MECHANICAL : MECHANICAL + 2, ACOUSTIC : ACOUSTIC + 2] = to_mechanical
    return A


def build_diffusion_matrix(params: SystemParams) -> np.ndarray:
    # acoustic bath at zero temperature, only the mechanics is thermal
    params.validate()
    mech = params.gamma_m / 2 * (2 * params.n_th + 1)
    return np.diag(
        [params.kappa / 2, params.kappa / 2, params.gamma_a / 2, params.gamma_a / 2, mech, mech]
    )


def linear_model(params: SystemParams) -> LinearModel:
    return LinearModel(build_drift_matrix(params), build_diffusion_matrix(params))


# --- mean fields -----------------------------------------------------------


def control_amplitude(raw: RawParams, beta_m: complex) -> complex:
    """Steady state of the classical control mode a2 for a given beta_m."""
    delta_2 = raw.delta_2 + raw.g_m * 2 * beta_m.real
    return -raw.E_2 / (1j * delta_2 - raw.kappa_2 / 2)


def _effective_detuning(raw, beta_m):
    return raw.delta_1 - 2 * raw.g_m * beta_m.real


def mean_field_rhs(raw: RawParams, alpha_1, beta_a, beta_m):
    """Time derivatives of (alpha_1, beta_a, beta_m) with a2 slaved."""
    G_a = raw.g_a * control_amplitude(raw, beta_m)
    hop = raw.J_m * np.exp(1j * raw.theta)
    d_alpha_1 = (
        (1j * _effective_detuning(raw, beta_m) - raw.kappa / 2) * alpha_1
        + 1j * G_a * beta_a
        + raw.E_1
    )
    d_beta_a = -(raw.gamma_a / 2 + 1j * raw.delta_a) * beta_a - 1j * hop * beta_m + 1j * G_a * alpha_1
    d_beta_m = (
        -(raw.gamma_m / 2 + 1j * raw.omega_m) * beta_m
        - 1j * np.conj(hop) * beta_a
        + 1j * raw.g_m * abs(alpha_1) ** 2
    )
    return complex(d_alpha_1), complex(d_beta_a), complex(d_beta_m)


def _residual(raw, alpha_1, beta_a, beta_m):
    scale = max(1.0, raw.E_1, raw.E_2)
    return max(abs(r) for r in mean_field_rhs(raw, alpha_1, beta_a, beta_m)) / scale


def solve_mean_fields(
    raw: RawParams,
    *,
    damping: float = 0.5,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> MeanFields:
    """Steady-state amplitudes by damped fixed-point iteration on beta_m.

    For fixed beta_m the optical and acoustic equations are linear in
    (alpha_1, beta_a) and are solved exactly; beta_m is then updated from
    the mechanical equation.  Starts from the zero state.

    Raises NonConvergence when the iteration stalls, which in practice
    flags a bistable or unstable mean-field branch.
    """
    raw.validate()
    hop = raw.J_m * np.exp(1j * raw.theta)
    mech = raw.gamma_m / 2 + 1j * raw.omega_m
    beta_m = 0j
    alpha_1 = beta_a = 0j
    residual = math.inf
    for it in range(1, max_iter + 1):
        G_a = raw.g_a * control_amplitude(raw, beta_m)
        M = np.array(
            [
                [1j * _effective_detuning(raw, beta_m) - raw.kappa / 2, 1j * G_a],
                [1j * G_a, -(raw.gamma_a / 2 + 1j * raw.delta_a)],
            ]
        )
        rhs = np.array([-raw.E_1, 1j * hop * beta_m])
        alpha_1, beta_a = np.linalg.solve(M, rhs)
        target = (-1j * np.conj(hop) * beta_a + 1j * raw.g_m * abs(alpha_1) ** 2) / mech
        beta_m = (1 - damping) * beta_m + damping * target
        residual = _residual(raw, alpha_1, beta_a, beta_m)
        if not math.isfinite(residual):
            break
        if residual <= tol:
            return MeanFields(
                alpha_1=complex(alpha_1),
                alpha_2=complex(control_amplitude(raw, beta_m)),
                beta_a=complex(beta_a),
                beta_m=complex(beta_m),
                residual=residual,
                iterations=it,
            )
    raise NonConvergence("mean-field iteration did not converge", residual)


def effective_params(raw: RawParams, mf: MeanFields) -> SystemParams:
    """Linearized parameters from converged mean fields.

    Couplings are the magnitudes g_m|alpha_1| and g_a|alpha_2|: the phases of
    the mean fields are absorbed into the fluctuation operators so that both
    couplings are real.
    """
    return SystemParams(
        kappa=raw.kappa,
        gamma_m=raw.gamma_m,
        gamma_a=raw.gamma_a,
        delta_tilde=_effective_detuning(raw, mf.beta_m),
        delta_a=raw.delta_a,
        G_m=abs(raw.g_m) * abs(mf.alpha_1),
        G_a=abs(raw.g_a) * abs(mf.alpha_2),
        J_m=raw.J_m,
        theta=raw.theta,
        n_th=raw.n_th,
        omega_m=raw.omega_m,
    )


def _bisect_increasing(fn, target, hi, tol, max_iter=200):
    lo = 0.0
    while fn(hi) < target:
        hi *= 2
        if hi > 1e12:
            raise NonConvergence("could not bracket drive amplitude", math.inf)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(hi, 1.0):
            break
    return 0.5 * (lo + hi)


def calibrate_drives(
    raw: RawParams, G_m: float, G_a: float, *, tol: float = 1e-12, max_sweeps: int = 50
) -> RawParams:
    """Find drive amplitudes (E_1, E_2) giving the requested effective couplings.

    Alternates one-dimensional bisections on E_2 (for G_a) and E_1 (for G_m),
    each to relative tolerance ``tol``, until both couplings match their
    targets to a relative 1e-9.
    """
    tol = max(tol, 1e-12)
    if G_m <= 0 or G_a <= 0:
        raise ValueError("target couplings must be positive")
    current = raw
    for _ in range(max_sweeps):
        def coupling_a(E_2):
            p = current.replace(E_2=E_2)
            return effective_params(p, solve_mean_fields(p)).G_a

        guess = G_a / max(abs(raw.g_a), 1e-300) * abs(raw.kappa_2) or 1.0
        current = current.replace(E_2=_bisect_increasing(coupling_a, G_a, guess, tol))

        def coupling_m(E_1):
            p = current.replace(E_1=E_1)
            return effective_params(p, solve_mean_fields(p)).G_m

        guess = G_m / max(abs(raw.g_m), 1e-300) * max(abs(raw.delta_1), raw.kappa) or 1.0
        current = current.replace(E_1=_bisect_increasing(coupling_m, G_m, guess, tol))

        eff = effective_params(current, solve_mean_fields(current))
        if abs(eff.G_m - G_m) <= 1e-9 * G_m and abs(eff.G_a - G_a) <= 1e-9 * G_a:
            return current
    raise NonConvergence("drive calibration did not converge", abs(eff.G_m - G_m) + abs(eff.G_a - G_a))
