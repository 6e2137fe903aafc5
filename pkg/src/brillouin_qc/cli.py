"""Command-line entry point.

    brillouin-qc --config run.json [--out result.csv] [--bipartition om]
                 [--seed N] [--threads N] [--print-config]

The config is a JSON object.  ``mode`` selects one of point, sweep,
threshold, robustness or oracle; the physical parameters go under
``params`` (effective SystemParams fields) or ``raw_params`` (drive-level
RawParams fields, reduced through the mean-field solver).  Every rate is in
units of omega_m.

Exit status: 0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    NoSignChange,
    NonConvergence,
    NonPhysicalInput,
    ParameterError,
    SingularSystem,
    UnstableSystem,
)
from .experiments import SweepAxis, evaluate_point, find_threshold, robustness_scan, sweep
from .gaussian_measures import CONVENTIONS, PAIRS, pair_label
from .lyapunov import solve_steady_lyapunov
from .model import RawParams, SystemParams, effective_params, linear_model, solve_mean_fields
from .stochastic_oracle import OracleConfig, estimate_covariance

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

MODES = ("point", "sweep", "threshold", "robustness", "oracle")

_PAIR_ORDER = ("om", "oa", "ma")
MEASURE_COLUMNS = [
    f"{name}_{pair}" for pair in _PAIR_ORDER for name in ("nu_minus", "EN", "QD")
]
SWEEP_COLUMNS = ["axis1", "axis2", "stable", "margin", "residual"] + MEASURE_COLUMNS
POINT_COLUMNS = (
    ["stable", "margin", "residual"]
    + MEASURE_COLUMNS
    + [f"V_{i}{j}" for i in range(1, 7) for j in range(1, 7)]
)
THRESHOLD_COLUMNS = ["param", "lo", "hi", "bipartition", "threshold"]
ROBUSTNESS_COLUMNS = ["J_m", "n_th_star", "beyond_range", "measure", "bipartition"]
ORACLE_COLUMNS = ["i", "j", "V_emp", "stderr", "V_lyap"]

COLUMNS = {
    "point": POINT_COLUMNS,
    "sweep": SWEEP_COLUMNS,
    "threshold": THRESHOLD_COLUMNS,
    "robustness": ROBUSTNESS_COLUMNS,
    "oracle": ORACLE_COLUMNS,
}

_TOP_KEYS = {
    "mode",
    "params",
    "raw_params",
    "axes",
    "threshold",
    "robustness",
    "oracle",
    "bipartition",
    "discord_convention",
    "output",
}
_MODE_KEYS = {
    "point": set(),
    "sweep": {"axes"},
    "threshold": {"threshold"},
    "robustness": {"robustness"},
    "oracle": {"oracle"},
}


@dataclass(frozen=True)
class ThresholdSpec:
    param: str
    lo: float
    hi: float
    tol: float = 1e-4


@dataclass(frozen=True)
class RobustnessSpec:
    n_th: SweepAxis
    J_m: tuple
    measure: str = "E_N"
    floor: float = 1e-6


@dataclass(frozen=True)
class RunConfig:
    mode: str
    params: SystemParams | None = None
    raw_params: RawParams | None = None
    axes: tuple = ()
    threshold: ThresholdSpec | None = None
    robustness: RobustnessSpec | None = None
    oracle: OracleConfig | None = None
    bipartition: str = "om"
    discord_convention: str = "consistent"
    output: str | None = None

    def to_dict(self):
        out = {"mode": self.mode}
        if self.params is not None:
            out["params"] = self.params.asdict()
        if self.raw_params is not None:
            out["raw_params"] = self.raw_params.asdict()
        if self.mode == "sweep":
            out["axes"] = [dataclasses.asdict(ax) for ax in self.axes]
        if self.threshold is not None:
            out["threshold"] = dataclasses.asdict(self.threshold)
        if self.robustness is not None:
            r = self.robustness
            out["robustness"] = {
                "n_th": dataclasses.asdict(r.n_th),
                "J_m": list(r.J_m),
                "measure": r.measure,
                "floor": r.floor,
            }
        if self.oracle is not None:
            out["oracle"] = dataclasses.asdict(self.oracle)
        out["bipartition"] = self.bipartition
        out["discord_convention"] = self.discord_convention
        if self.output is not None:
            out["output"] = self.output
        return out


# --- parsing ----------------------------------------------------------------


def _require_mapping(value, where):
    if not isinstance(value, dict):
        raise ConfigError(where, f"expected a JSON object, got {type(value).__name__}")
    return value


def _build(cls, data, where, drop=()):
    data = _require_mapping(data, where)
    known = {f.name for f in dataclasses.fields(cls)} - set(drop)
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}", "unknown key")
    required = [
        f.name
        for f in dataclasses.fields(cls)
        if f.name in known
        and f.default is dataclasses.MISSING
        and f.default_factory is dataclasses.MISSING
    ]
    for name in required:
        if name not in data:
            raise ConfigError(f"{where}.{name}", "missing required key")
    try:
        return cls(**data)
    except ParameterError as exc:
        raise ConfigError(f"{where}.{exc.param}", str(exc).split(": ", 1)[-1]) from None
    except TypeError as exc:
        raise ConfigError(where, str(exc)) from None


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(where, f"expected a finite number, got {value!r}")
    return float(value)


def parse_config(data) -> RunConfig:
    """Validate a decoded JSON config into a RunConfig (raises ConfigError)."""
    data = _require_mapping(data, "config")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    mode = data.get("mode")
    if mode not in MODES:
        raise ConfigError("mode", f"expected one of {MODES}, got {mode!r}")

    for key in set(_MODE_KEYS) - {mode}:
        for extra in _MODE_KEYS[key] - _MODE_KEYS[mode]:
            if extra in data:
                raise ConfigError(extra, f"not used in {mode} mode")
    for key in _MODE_KEYS[mode] - {"oracle"}:
        if key not in data:
            raise ConfigError(key, f"required in {mode} mode")

    if ("params" in data) == ("raw_params" in data):
        raise ConfigError("params", "give exactly one of 'params' or 'raw_params'")
    params = raw = None
    if "params" in data:
        params = _build(SystemParams, data["params"], "params")
    else:
        raw = _build(RawParams, data["raw_params"], "raw_params")

    axes = ()
    if mode == "sweep":
        if not isinstance(data["axes"], list) or not 1 <= len(data["axes"]) <= 2:
            raise ConfigError("axes", "expected a list of one or two sweep axes")
        axes = tuple(_build(SweepAxis, ax, f"axes[{k}]") for k, ax in enumerate(data["axes"]))
        if len(axes) == 2 and axes[0].param == axes[1].param:
            raise ConfigError("axes", f"both axes sweep {axes[0].param!r}")

    threshold = None
    if mode == "threshold":
        threshold = _build(ThresholdSpec, data["threshold"], "threshold")
        for name in ("lo", "hi", "tol"):
            _number(getattr(threshold, name), f"threshold.{name}")
        if threshold.param not in {f.name for f in dataclasses.fields(SystemParams)}:
            raise ConfigError("threshold.param", f"{threshold.param!r} is not a SystemParams field")
        if not threshold.lo < threshold.hi:
            raise ConfigError("threshold.hi", "need lo < hi")
        if threshold.tol <= 0:
            raise ConfigError("threshold.tol", "must be > 0")

    robustness = None
    if mode == "robustness":
        spec = _require_mapping(data["robustness"], "robustness")
        unknown = sorted(set(spec) - {"n_th", "J_m", "measure", "floor"})
        if unknown:
            raise ConfigError(f"robustness.{unknown[0]}", "unknown key")
        for key in ("n_th", "J_m"):
            if key not in spec:
                raise ConfigError(f"robustness.{key}", "missing required key")
        n_th = dict(_require_mapping(spec["n_th"], "robustness.n_th"))
        n_th.setdefault("param", "n_th")
        if n_th["param"] != "n_th":
            raise ConfigError("robustness.n_th.param", "must be 'n_th'")
        n_th_axis = _build(SweepAxis, n_th, "robustness.n_th")
        if not isinstance(spec["J_m"], list) or not spec["J_m"]:
            raise ConfigError("robustness.J_m", "expected a non-empty list of hopping rates")
        J_values = tuple(_number(J, "robustness.J_m") for J in spec["J_m"])
        if min(J_values) < 0:
            raise ConfigError("robustness.J_m", "hopping rates must be >= 0")
        measure = spec.get("measure", "E_N")
        if measure not in ("E_N", "eps_QD", "nu_minus"):
            raise ConfigError("robustness.measure", f"unknown measure {measure!r}")
        floor = _number(spec.get("floor", 1e-6), "robustness.floor")
        robustness = RobustnessSpec(n_th=n_th_axis, J_m=J_values, measure=measure, floor=floor)

    oracle = None
    if mode == "oracle":
        oracle = _build(OracleConfig, data.get("oracle", {}), "oracle")
        oracle.validate()

    bipartition = data.get("bipartition", "om")
    try:
        bipartition = pair_label(bipartition)
    except ValueError as exc:
        raise ConfigError("bipartition", str(exc)) from None
    convention = data.get("discord_convention", "consistent")
    if convention not in CONVENTIONS:
        raise ConfigError("discord_convention", f"expected one of {CONVENTIONS}, got {convention!r}")
    output = data.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output", "expected a path string")

    return RunConfig(
        mode=mode,
        params=params,
        raw_params=raw,
        axes=axes,
        threshold=threshold,
        robustness=robustness,
        oracle=oracle,
        bipartition=bipartition,
        discord_convention=convention,
        output=output,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    return parse_config(data)


# --- output -----------------------------------------------------------------


def _fmt(value):
    if value is None:
        return "NaN"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "NaN" if math.isnan(value) else f"{float(value):.17g}"
    return str(value)


def render_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_atomic(path, text):
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _measure_cells(point):
    cells = []
    for pair in _PAIR_ORDER:
        for name in ("nu_minus", "E_N", "eps_QD"):
            cells.append(point.measure(name, pair))
    return cells


# --- modes ------------------------------------------------------------------


def resolve_params(cfg: RunConfig, echo=print) -> SystemParams:
    if cfg.params is not None:
        return cfg.params
    mf = solve_mean_fields(cfg.raw_params)
    params = effective_params(cfg.raw_params, mf)
    echo(
        f"mean fields: |alpha_1|={abs(mf.alpha_1):.6g} |alpha_2|={abs(mf.alpha_2):.6g} "
        f"|beta_a|={abs(mf.beta_a):.6g} |beta_m|={abs(mf.beta_m):.6g} "
        f"(residual {mf.residual:.2e}, {mf.iterations} iterations)"
    )
    echo(
        f"effective: G_m={params.G_m:.6g} G_a={params.G_a:.6g} delta_tilde={params.delta_tilde:.6g}"
    )
    return params


def run_point(cfg, params, echo):
    point = evaluate_point(params, keep_covariance=True, convention=cfg.discord_convention)
    V = point.V if point.V is not None else np.full((6, 6), np.nan)
    row = [point.stable, point.margin, point.residual] + _measure_cells(point) + list(V.ravel())
    text = render_csv(POINT_COLUMNS, [row])
    status = EXIT_OK
    if point.reports is None:
        echo(f"point failed: {point.error} (margin {point.margin:.6g})")
        status = EXIT_NUMERIC
    else:
        echo(f"stable, margin {point.margin:.6g}, Lyapunov residual {point.residual:.3e}")
        for pair in _PAIR_ORDER:
            r = point.reports[pair]
            echo(f"  {pair}: nu_minus={r.nu_minus:.6g} E_N={r.E_N:.6g} eps_QD={r.eps_QD:.6g}")
    return text, status


def run_sweep(cfg, params, echo, threads):
    result = sweep(params, cfg.axes, workers=threads, convention=cfg.discord_convention)
    rows = []
    for point in result.rows:
        a1 = point.values[0]
        a2 = point.values[1] if len(point.values) > 1 else math.nan
        rows.append([a1, a2, point.stable, point.margin, point.residual] + _measure_cells(point))
    n_bad = sum(p.reports is None for p in result.rows)
    echo(f"{len(rows)} grid points, {n_bad} without a valid steady state")
    return render_csv(SWEEP_COLUMNS, rows), EXIT_OK


def run_threshold(cfg, params, echo):
    spec = cfg.threshold
    value = find_threshold(
        params, spec.param, (spec.lo, spec.hi), pair=cfg.bipartition, tol=spec.tol
    )
    echo(f"entanglement threshold in {spec.param}: {value:.6g} ({cfg.bipartition})")
    return render_csv(THRESHOLD_COLUMNS, [[spec.param, spec.lo, spec.hi, cfg.bipartition, value]]), EXIT_OK


def run_robustness(cfg, params, echo):
    spec = cfg.robustness
    records = robustness_scan(
        params,
        spec.n_th,
        spec.J_m,
        pair=cfg.bipartition,
        measure=spec.measure,
        floor=spec.floor,
        convention=cfg.discord_convention,
    )
    rows = []
    for rec in records:
        rows.append([rec.J_m, rec.n_th_star, rec.beyond_range, spec.measure, cfg.bipartition])
        where = "beyond range" if rec.beyond_range else f"n_th* = {rec.n_th_star:g}"
        echo(f"J_m={rec.J_m:g}: {spec.measure} reaches {spec.floor:g} at {where}")
    return render_csv(ROBUSTNESS_COLUMNS, rows), EXIT_OK


def run_oracle(cfg, params, echo, threads):
    model = linear_model(params)
    V_lyap = solve_steady_lyapunov(model.A, model.D).V
    result = estimate_covariance(model, cfg.oracle, workers=threads)
    rows = [
        [i + 1, j + 1, result.V[i, j], result.stderr[i, j], V_lyap[i, j]]
        for i in range(6)
        for j in range(6)
    ]
    rel = np.linalg.norm(result.V - V_lyap) / np.linalg.norm(V_lyap)
    echo(f"oracle: {result.n_samples} samples, relative Frobenius deviation {rel:.3e}")
    return render_csv(ORACLE_COLUMNS, rows), EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="brillouin-qc",
        description="Steady-state entanglement and discord of the three-mode Brillouin optomechanical model.",
    )
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output CSV path (overrides 'output' in the config)")
    parser.add_argument("--bipartition", choices=sorted(PAIRS), help="pair for threshold/robustness predicates")
    parser.add_argument("--seed", type=int, help="oracle seed (unsigned 64-bit)")
    parser.add_argument("--threads", type=int, default=1, help="worker processes for sweeps and the oracle")
    parser.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    return parser


def main(argv=None, *, stdout=None, stderr=None):
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr

    def echo(msg):
        print(msg, file=stdout)

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK

    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.out is not None:
            overrides["output"] = args.out
        if args.bipartition is not None:
            overrides["bipartition"] = args.bipartition
        if args.seed is not None:
            if cfg.mode != "oracle":
                raise ConfigError("seed", "only used in oracle mode")
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed", "must be an unsigned 64-bit integer")
            overrides["oracle"] = cfg.oracle.replace(seed=args.seed)
        if args.threads < 1:
            raise ConfigError("threads", "must be >= 1")
        cfg = dataclasses.replace(cfg, **overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_CONFIG

    if args.print_config:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True), file=stdout)
        return EXIT_OK
    if cfg.output is None:
        print("error: output: no output path (use --out or 'output')", file=stderr)
        return EXIT_CONFIG

    try:
        params = resolve_params(cfg, echo)
        if cfg.mode == "point":
            text, status = run_point(cfg, params, echo)
        elif cfg.mode == "sweep":
            text, status = run_sweep(cfg, params, echo, args.threads)
        elif cfg.mode == "threshold":
            text, status = run_threshold(cfg, params, echo)
        elif cfg.mode == "robustness":
            text, status = run_robustness(cfg, params, echo)
        else:
            text, status = run_oracle(cfg, params, echo, args.threads)
    except (ConfigError, NoSignChange) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_CONFIG
    except ParameterError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_CONFIG
    except (UnstableSystem, SingularSystem, NonConvergence, NonPhysicalInput) as exc:
        print(f"numerical failure: {exc}", file=stderr)
        return EXIT_NUMERIC

    write_atomic(cfg.output, text)
    echo(f"wrote {cfg.output}")
    return status


if __name__ == "__main__":
    sys.exit(main())
