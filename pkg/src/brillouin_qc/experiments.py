"""Parameter sweeps, threshold bisection and thermal robustness scans."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NoSignChange, NonPhysicalInput, ParameterError, SingularSystem
from .gaussian_measures import PAIRS, full_report, pair_label
from .lyapunov import check_stability, solve_steady_lyapunov
from .model import PARAM_FIELDS, SystemParams, fig2, linear_model

#: E_N at or below this counts as "no entanglement".
EN_EPS = 1e-6

MEASURES = ("nu_minus", "E_N", "eps_QD")

#: Default resolutions for figure grids.
GRID_2D = 101
GRID_1D = 401


@dataclass(frozen=True)
class SweepAxis:
    param: str
    min: float
    max: float
    steps: int
    scale: str = "linear"

    def __post_init__(self):
        if self.param not in PARAM_FIELDS:
            raise ParameterError("param", f"{self.param!r} is not a SystemParams field")
        for name in ("min", "max"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(name, f"must be a finite number, got {value!r}")
        if not self.min < self.max:
            raise ParameterError("max", f"axis {self.param}: need min < max")
        if not isinstance(self.steps, int) or isinstance(self.steps, bool) or self.steps < 2:
            raise ParameterError("steps", f"axis {self.param}: need an integer >= 2")
        if self.scale != "linear":
            raise ParameterError("scale", f"only 'linear' is supported, got {self.scale!r}")

    def values(self):
        return np.linspace(self.min, self.max, self.steps)


@dataclass(frozen=True)
class PointResult:
    values: tuple
    stable: bool
    margin: float
    residual: float
    reports: dict | None = None
    error: str | None = None
    V: np.ndarray | None = None

    def measure(self, name, pair="om"):
        """A measure for one bipartition, NaN when the point has no valid state."""
        if self.reports is None:
            return math.nan
        return getattr(self.reports[pair_label(pair)], name)

    def entangled(self, pair="om"):
        return self.reports is not None and self.measure("E_N", pair) > EN_EPS


def evaluate_point(params: SystemParams, *, keep_covariance=False, convention="consistent", values=()):
    """Build the model at ``params``, check stability, solve and analyse.

    Unstable points and numerical failures are returned with
    ``reports=None`` rather than raised.
    """
    model = linear_model(params)
    stability = check_stability(model.A)
    if not stability.stable:
        return PointResult(tuple(values), False, stability.margin, math.nan, error="unstable")
    try:
        cov = solve_steady_lyapunov(model.A, model.D)
        report = full_report(cov, stability, convention=convention)
    except (SingularSystem, NonPhysicalInput) as exc:
        return PointResult(tuple(values), True, stability.margin, math.nan, error=str(exc))
    return PointResult(
        values=tuple(values),
        stable=True,
        margin=stability.margin,
        residual=cov.residual,
        reports=report.reports,
        V=cov.V if keep_covariance else None,
    )


@dataclass
class SweepResult:
    axes: tuple
    rows: list = field(default_factory=list)

    @property
    def shape(self):
        return tuple(ax.steps for ax in self.axes)

    def grid(self, name, pair="om"):
        """Measure ``name`` reshaped onto the axis grid (row-major)."""
        data = np.array([row.measure(name, pair) for row in self.rows], dtype=float)
        return data.reshape(self.shape)

    def axis_values(self, k=0):
        return self.axes[k].values()


def _evaluate_job(job):
    params, values, convention, keep = job
    return evaluate_point(params, keep_covariance=keep, convention=convention, values=values)


def sweep(
    base: SystemParams, axes, *, workers=1, convention="consistent", keep_covariance=False
) -> SweepResult:
    """Evaluate every point of the 1-D or 2-D grid spanned by ``axes``.

    Rows come out in row-major order over the axes whatever ``workers`` is.
    With ``keep_covariance`` each row also carries its 6x6 covariance.
    """
    axes = tuple(axes)
    if not 1 <= len(axes) <= 2:
        raise ParameterError("axes", f"expected 1 or 2 sweep axes, got {len(axes)}")
    if len(axes) == 2 and axes[0].param == axes[1].param:
        raise ParameterError("axes", f"both axes sweep {axes[0].param!r}")
    jobs = []
    for values in itertools.product(*(ax.values() for ax in axes)):
        values = tuple(float(v) for v in values)
        params = base.replace(**{ax.param: v for ax, v in zip(axes, values)})
        jobs.append((params, values, convention, keep_covariance))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_job, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        rows = [_evaluate_job(job) for job in jobs]
    return SweepResult(axes=axes, rows=rows)


def find_threshold(
    base: SystemParams,
    param: str,
    bracket,
    *,
    pair="om",
    predicate=None,
    tol=1e-4,
):
    """Bisect for the boundary of ``predicate`` along ``param``.

    The default predicate is E_N > EN_EPS on ``pair``; unstable points count
    as not entangled.  Returns the midpoint of the final bracket, whose
    width is at most ``tol``.
    """
    if param not in PARAM_FIELDS:
        raise ParameterError("param", f"{param!r} is not a SystemParams field")
    label = pair_label(pair)
    if predicate is None:
        def predicate(params):
            return evaluate_point(params).entangled(label)

    lo, hi = (float(b) for b in bracket)
    at_lo = bool(predicate(base.replace(**{param: lo})))
    at_hi = bool(predicate(base.replace(**{param: hi})))
    if at_lo == at_hi:
        raise NoSignChange(f"predicate is {at_lo} at both ends of [{lo}, {hi}] for {param}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bool(predicate(base.replace(**{param: mid}))) == at_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class RobustnessRecord:
    J_m: float
    n_th_star: float | None
    last_value: float

    @property
    def beyond_range(self):
        return self.n_th_star is None


def robustness_scan(
    base: SystemParams,
    n_th_values,
    J_values,
    *,
    pair="om",
    measure="E_N",
    floor=EN_EPS,
    convention="consistent",
):
    """First thermal occupancy on the grid where ``measure`` falls to ``floor``.

    For each hopping rate, n_th is scanned upward and the first grid value
    with measure <= floor is recorded; ``n_th_star`` is None when the
    measure survives the whole range.  Unstable points are skipped.
    """
    if isinstance(n_th_values, SweepAxis):
        n_th_values = n_th_values.values()
    n_th_values = np.sort(np.asarray(n_th_values, dtype=float))
    label = pair_label(pair)
    if measure not in MEASURES:
        raise ParameterError("measure", f"expected one of {MEASURES}, got {measure!r}")
    records = []
    for J in J_values:
        star, value = None, math.nan
        for n_th in n_th_values:
            point = evaluate_point(base.replace(J_m=float(J), n_th=float(n_th)), convention=convention)
            if point.reports is None:
                continue
            value = point.measure(measure, label)
            if value <= floor:
                star = float(n_th)
                break
        records.append(RobustnessRecord(J_m=float(J), n_th_star=star, last_value=value))
    return records


# --- figure grids -----------------------------------------------------------


@dataclass(frozen=True)
class FigureGrid:
    name: str
    base: SystemParams
    axes: tuple
    description: str = ""


_HALF_PI = math.pi / 2
_J_LINES = (0.1, 0.15, 0.2)


def figure_grids(n2d=GRID_2D, n1d=GRID_1D):
    """Parameter grids for the paper's figure panels.

    The published panels do not state their axis ranges; the ranges here
    bracket the features discussed for each panel.
    """
    off = fig2(J_m=0.0)
    on = fig2(J_m=0.2, theta=_HALF_PI)
    phase = fig2(G_a=0.2, G_m=0.2)
    thermal = fig2(G_a=0.15, G_m=0.15, theta=_HALF_PI)
    discord = fig2(G_a=0.2)
    G_a_axis = SweepAxis("G_a", 0.01, 0.3, n2d)
    grids = [
        FigureGrid("fig2a", off, (G_a_axis, SweepAxis("delta_a", 0.0, 2.0, n2d)), "E_N vs G_a, delta_a; J_m=0"),
        FigureGrid("fig2b", on, (G_a_axis, SweepAxis("delta_a", 0.0, 2.0, n2d)), "E_N vs G_a, delta_a; J_m=0.2"),
        FigureGrid("fig3a", off, (G_a_axis, SweepAxis("G_m", 0.01, 0.3, n2d)), "E_N vs G_a, G_m; J_m=0"),
        FigureGrid("fig3b", on, (G_a_axis, SweepAxis("G_m", 0.01, 0.3, n2d)), "E_N vs G_a, G_m; J_m=0.2"),
        FigureGrid("fig3c", off, (SweepAxis("gamma_a", 0.01, 1.0, n2d), G_a_axis), "E_N vs gamma_a, G_a; J_m=0"),
        FigureGrid("fig3d", on, (SweepAxis("gamma_a", 0.01, 1.0, n2d), G_a_axis), "E_N vs gamma_a, G_a; J_m=0.2"),
        FigureGrid(
            "fig4a",
            phase,
            (SweepAxis("J_m", 0.0, 0.2, n2d), SweepAxis("theta", 0.0, 4 * math.pi, n2d)),
            "E_N vs J_m, theta",
        ),
        FigureGrid(
            "fig5a",
            thermal,
            (SweepAxis("n_th", 0.0, 300.0, n2d), SweepAxis("J_m", 0.0, 0.2, n2d)),
            "E_N vs n_th, J_m",
        ),
        FigureGrid(
            "fig6a",
            discord,
            (SweepAxis("J_m", 0.0, 0.2, n2d), SweepAxis("theta", 0.0, 4 * math.pi, n2d)),
            "discord vs J_m, theta",
        ),
        FigureGrid(
            "fig7a",
            discord.replace(theta=_HALF_PI),
            (SweepAxis("n_th", 0.0, 300.0, n2d), SweepAxis("J_m", 0.0, 0.2, n2d)),
            "discord vs n_th, J_m",
        ),
    ]
    for J in _J_LINES:
        grids += [
            FigureGrid(f"fig4b_J{J}", phase.replace(J_m=J), (SweepAxis("theta", 0.0, 4 * math.pi, n1d),)),
            FigureGrid(f"fig5b_J{J}", thermal.replace(J_m=J), (SweepAxis("n_th", 0.0, 300.0, n1d),)),
            FigureGrid(f"fig6b_J{J}", discord.replace(J_m=J), (SweepAxis("theta", 0.0, 4 * math.pi, n1d),)),
            FigureGrid(
                f"fig7b_J{J}", discord.replace(J_m=J, theta=_HALF_PI), (SweepAxis("n_th", 0.0, 300.0, n1d),)
            ),
        ]
    return {g.name: g for g in grids}


def local_maxima(values):
    """Indices of interior grid points that are >= both neighbours (and > one)."""
    v = np.asarray(values, dtype=float)
    idx = []
    for k in range(1, len(v) - 1):
        if v[k] >= v[k - 1] and v[k] >= v[k + 1] and (v[k] > v[k - 1] or v[k] > v[k + 1]):
            idx.append(k)
    return idx


__all__ = [
    "EN_EPS",
    "PAIRS",
    "SweepAxis",
    "SweepResult",
    "PointResult",
    "RobustnessRecord",
    "FigureGrid",
    "evaluate_point",
    "sweep",
    "find_threshold",
    "robustness_scan",
    "figure_grids",
    "local_maxima",
]
