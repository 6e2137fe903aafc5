"""Steady-state entanglement and discord in a three-mode Brillouin optomechanical system.

Optical, acoustic (Brillouin) and mechanical modes are linearized around
their mean fields; the steady-state covariance follows from a Lyapunov
equation and the bipartite correlations from its 4x4 blocks.
"""

from .errors import (
    ConfigError,
    NoSignChange,
    NonConvergence,
    NonPhysicalInput,
    ParameterError,
    SingularSystem,
    UnstableSystem,
)
from .experiments import (
    EN_EPS,
    SweepAxis,
    evaluate_point,
    figure_grids,
    find_threshold,
    robustness_scan,
    sweep,
)
from .gaussian_measures import (
    PAIRS,
    correlation_report,
    extract_bipartition,
    full_report,
    gaussian_discord,
    log_negativity,
    symplectic_invariants,
    thermal_entropy,
)
from .lyapunov import check_physical, check_stability, propagate_covariance, solve_steady_lyapunov
from .model import (
    FIG2,
    RawParams,
    SystemParams,
    build_diffusion_matrix,
    build_drift_matrix,
    calibrate_drives,
    effective_params,
    fig2,
    linear_model,
    solve_mean_fields,
)
from .stochastic_oracle import OracleConfig, estimate_covariance

__version__ = "0.1.0"
