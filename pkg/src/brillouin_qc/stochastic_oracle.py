"""Monte Carlo estimate of the stationary covariance.

The linear quadrature dynamics du = A u dt + dW with <dW dW^T> = D dt are
integrated for an ensemble of classical trajectories.  For linear systems
with Gaussian white noise the symmetrized second moments of the quantum
fluctuations obey the same equation, dV/dt = A V + V A^T + D, as the
classical covariance, so the ensemble/time average of u u^T converges to
the Lyapunov solution without ever solving it.

Two integrators are available:

``"euler"``
    Euler-Maruyama, u <- (I + A dt) u + sqrt(D_ii dt) xi.  Biased at O(dt);
    for the weakly damped oscillators of this model the bias is of order
    dt * |A|^2 / |margin| and dt must be very small.
``"exact"``
    Exact Gaussian transition u <- exp(A dt) u + L xi with L L^T the
    integrated noise covariance over one step.  Unbiased for any dt, so the
    burn-in is covered with at most BURN_STEPS coarse steps.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UnstableSystem
from .lyapunov import check_stability, discretize
from .model import LinearModel

#: Trajectories per independently seeded block; blocks are also the batches
#: of the batch-means error estimate.
BLOCK_SIZE = 50

#: Upper bound on the number of burn-in steps for the exact scheme.
BURN_STEPS = 1000

SCHEMES = ("exact", "euler")


@dataclass(frozen=True)
class OracleConfig:
    n_traj: int = 2000
    dt: float = 0.1
    t_burn: float | None = None
    t_sample: float = 1000.0
    seed: int = 0
    scheme: str = "exact"

    def validate(self, model: LinearModel | None = None, margin: float | None = None):
        if not isinstance(self.n_traj, int) or isinstance(self.n_traj, bool) or self.n_traj < 2:
            raise ConfigError("n_traj", f"must be an integer >= 2, got {self.n_traj!r}")
        for name in ("dt", "t_sample"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(name, f"must be a positive number, got {value!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError("scheme", f"must be one of {SCHEMES}, got {self.scheme!r}")
        if self.t_burn is not None and not (
            isinstance(self.t_burn, (int, float)) and math.isfinite(self.t_burn) and self.t_burn >= 0
        ):
            raise ConfigError("t_burn", f"must be a non-negative number, got {self.t_burn!r}")
        if self.t_sample < self.dt:
            raise ConfigError("t_sample", "sampling window shorter than one step")
        if model is not None:
            if self.scheme == "euler" and self.dt * np.linalg.norm(model.A, 2) >= 0.1:
                raise ConfigError(
                    "dt", f"dt * |A| = {self.dt * np.linalg.norm(model.A, 2):.3g} must be < 0.1"
                )
            if margin is not None and self.t_burn is not None and self.t_burn < 10 / abs(margin):
                raise ConfigError(
                    "t_burn", f"{self.t_burn} is shorter than 10/|margin| = {10 / abs(margin):.4g}"
                )

    def burn_in(self, margin):
        return 10 / abs(margin) if self.t_burn is None else self.t_burn

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class OracleResult:
    V: np.ndarray
    stderr: np.ndarray
    n_samples: int

    def __iter__(self):
        return iter((self.V, self.stderr))


def _transition(model, scheme, dt):
    A, D = np.asarray(model.A), np.asarray(model.D)
    if scheme == "euler":
        phi = np.eye(6) + A * dt
        chol = np.diag(np.sqrt(np.diag(D) * dt))
    else:
        phi, Q = discretize(A, D, dt)
        w, U = np.linalg.eigh(Q)
        chol = U * np.sqrt(np.clip(w, 0.0, None))
    return phi, chol


def _advance(u, phi, chol, steps, rng, acc=None, chunk=512):
    n = u.shape[1]
    done = 0
    while done < steps:
        m = min(chunk, steps - done)
        noise = (chol @ rng.standard_normal((6, m * n))).reshape(6, m, n)
        for k in range(m):
            u = phi @ u + noise[:, k, :]
            if acc is not None:
                acc += u @ u.T
        done += m
    return u


def _run_block(args):
    burn, sample, n, seed_seq = args
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    u = np.zeros((6, n))
    u = _advance(u, *burn, rng)
    acc = np.zeros((6, 6))
    phi, chol, n_sample = sample
    _advance(u, phi, chol, n_sample, rng, acc)
    return acc / (n * n_sample)


def _blocks(n_traj):
    sizes = [BLOCK_SIZE] * (n_traj // BLOCK_SIZE)
    if n_traj % BLOCK_SIZE:
        sizes.append(n_traj % BLOCK_SIZE)
    return sizes


def estimate_covariance(model: LinearModel, cfg: OracleConfig = OracleConfig(), *, workers=1):
    """Empirical stationary covariance and its batch-means standard error.

    Trajectories start at u = 0, run for the burn-in time (default
    10/|margin|) and are then averaged over ``t_sample`` in steps of ``dt``.  Each block of
    BLOCK_SIZE trajectories draws from its own child of the seed sequence,
    so results do not depend on ``workers``.
    """
    report = check_stability(model.A)
    if not report.stable:
        raise UnstableSystem(report.margin)
    cfg.validate(model, report.margin)

    t_burn = cfg.burn_in(report.margin)
    n_burn = int(math.ceil(t_burn / cfg.dt))
    if cfg.scheme == "exact" and n_burn > BURN_STEPS:
        n_burn = BURN_STEPS
        burn = (*_transition(model, "exact", t_burn / n_burn), n_burn)
    else:
        burn = (*_transition(model, cfg.scheme, cfg.dt), n_burn)
    n_sample = max(1, int(round(cfg.t_sample / cfg.dt)))
    sample = (*_transition(model, cfg.scheme, cfg.dt), n_sample)
    sizes = _blocks(cfg.n_traj)
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    jobs = [(burn, sample, n, s) for n, s in zip(sizes, seeds)]

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            means = list(pool.map(_run_block, jobs))
    else:
        means = [_run_block(job) for job in jobs]

    means = np.array(means)
    weights = np.array(sizes, dtype=float) / cfg.n_traj
    V = np.einsum("b,bij->ij", weights, means)
    V = 0.5 * (V + V.T)
    if len(sizes) > 1:
        var = np.einsum("b,bij->ij", weights, (means - V) ** 2) / (len(sizes) - 1)
        stderr = np.sqrt(var)
    else:
        stderr = np.full((6, 6), np.nan)
    return OracleResult(V=V, stderr=stderr, n_samples=cfg.n_traj * n_sample)
