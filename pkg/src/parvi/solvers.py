"""Particle updates: implicit-Euler EVI, explicit ParVI schemes and Langevin MC."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from .diagnostics import MetricsRecord, PolynomialMMD
from .energy import energy_and_bracket, proximal_value_and_grad
from .errors import DivergenceError, SingularSystemError, StalledInnerSolverError
from .kernels import (
    KernelConfig,
    as_particles,
    kernel_from_differences,
    normalizer,
    pairwise_differences,
    resolve_bandwidth,
)
from .targets import TargetModel

log = logging.getLogger(__name__)

ADAGRAD_EPS = 1e-8
BB_MIN, BB_MAX = 1e-10, 1e3
MAX_HALVINGS = 50


class Scheme(str, Enum):
    EVI_IM = "evi_im"
    BLOB = "blob"
    SVGD = "svgd"
    GFSF = "gfsf"
    GFSD = "gfsd"
    LMC = "lmc"

    @classmethod
    def parse(cls, name) -> "Scheme":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        for s in cls:
            if s.value == key or s.name.lower() == key:
                return s
        raise ValueError(f"unknown scheme {name!r}; choose from {[s.value for s in cls]}")


EXPLICIT = (Scheme.BLOB, Scheme.SVGD, Scheme.GFSF, Scheme.GFSD)


@dataclass(frozen=True)
class SolverConfig:
    scheme: Scheme
    outer_iters: int
    tau: Optional[float] = None
    lr: Optional[float] = None
    inner_max_iter: int = 100
    inner_tol: float = 1e-8
    lmc_schedule: Tuple[float, float, float] = (0.1, 1.0, 0.55)
    lmc_ascent_sign: bool = False
    gfsf_ridge: Optional[float] = None
    step_rule: str = "adagrad"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if self.outer_iters < 0:
            raise ValueError("outer_iters must be nonnegative")
        if self.scheme is Scheme.EVI_IM:
            if self.tau is None or not self.tau > 0:
                raise ValueError(f"tau must be positive for EVI-Im, got {self.tau}")
            if self.inner_max_iter < 1 or not self.inner_tol > 0:
                raise ValueError("inner_max_iter must be >= 1 and inner_tol > 0")
        elif self.scheme in EXPLICIT:
            if self.lr is None or not self.lr > 0:
                raise ValueError(f"lr must be positive for {self.scheme.value}, got {self.lr}")
            if self.step_rule not in ("adagrad", "plain"):
                raise ValueError(f"step_rule must be 'adagrad' or 'plain', got {self.step_rule!r}")
        else:
            if len(self.lmc_schedule) != 3 or not all(v > 0 for v in self.lmc_schedule):
                raise ValueError("lmc_schedule needs three positive numbers (a, b, c)")
        if self.gfsf_ridge is not None and self.gfsf_ridge < 0:
            raise ValueError("gfsf_ridge must be nonnegative")


@dataclass
class RunState:
    particles: np.ndarray
    iter: int = 0
    adagrad_sum: Optional[np.ndarray] = None
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    @classmethod
    def initial(cls, particles, seed=0) -> "RunState":
        x = as_particles(particles).copy()
        return cls(x, 0, np.zeros_like(x), np.random.default_rng(seed))


@dataclass(frozen=True)
class InnerReport:
    iterations: int
    grad_norm: float
    converged: bool
    decrease_holds: bool
    energy_before: float
    energy_after: float
    step_sq_norm: float


# ---------------------------------------------------------------- velocities


def _check_finite(v: np.ndarray, what: str):
    bad = ~np.all(np.isfinite(v), axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DivergenceError(f"non-finite {what} at particle {i}", particle_index=i)


def _svgd_parts(x, h, target, rng):
    diff = pairwise_differences(x)
    k = kernel_from_differences(diff, h)
    gv = target.grad_v(x, rng)
    # sum_j grad_{x_i} K(x_i, x_j)
    grad_k = -(2.0 / h**2) * np.einsum("ijk,ij->ik", diff, k)
    return k, gv, grad_k


def gfsf_velocity(x, h, target, ridge=None, rng=None) -> np.ndarray:
    """Solve ``(K + r I) W = sum_j grad K(x_i, x_j)`` and return ``-grad V - W``.

    This is the GFSF system ``K Xdot = -(K grad V + grad K 1)`` with the ridge
    applied to both sides, so a single particle moves with ``-grad V``.
    """
    k, gv, grad_k = _svgd_parts(x, h, target, rng)
    n = x.shape[0]
    if ridge is None:
        ridge = 1e-8 * normalizer(h, x.shape[1])
    a = k + ridge * np.eye(n)
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=True)
        pivots = np.abs(np.diag(factor[0]))
        # squared pivot ratio is a cheap reciprocal condition estimate
        if (pivots.min() / pivots.max()) ** 2 < 1e2 * n * np.finfo(float).eps:
            raise np.linalg.LinAlgError("kernel matrix is numerically singular")
        w = scipy.linalg.cho_solve(factor, grad_k)
        # one refinement pass keeps the residual at the 1e-8 level for badly conditioned K
        w += scipy.linalg.cho_solve(factor, grad_k - a @ w)
    except (np.linalg.LinAlgError, ValueError) as exc:
        cond = float(np.linalg.cond(a))
        raise SingularSystemError(f"GFSF kernel system could not be solved (cond ~ {cond:.3g}): {exc}",
                                  condition=cond) from exc
    return -gv - w


def parvi_velocity(scheme, particles, kernel, target: TargetModel, ridge=None, rng=None) -> np.ndarray:
    """Velocity field ``Xdot`` of an explicit particle scheme."""
    scheme = Scheme.parse(scheme)
    x = as_particles(particles, target.dim)
    h = resolve_bandwidth(kernel, x)
    if scheme is Scheme.BLOB:
        return -energy_and_bracket(x, h, target, rng)[1]
    if scheme is Scheme.SVGD:
        k, gv, grad_k = _svgd_parts(x, h, target, rng)
        return -(k @ gv + grad_k)
    if scheme is Scheme.GFSF:
        return gfsf_velocity(x, h, target, ridge, rng)
    if scheme is Scheme.GFSD:
        diff = pairwise_differences(x)
        k = kernel_from_differences(diff, h)
        grad_k = -(2.0 / h**2) * np.einsum("ijk,ij->ik", diff, k)
        return -(grad_k / k.sum(axis=1)[:, None] + target.grad_v(x, rng))
    raise ValueError(f"{scheme.value} has no explicit velocity field")


# ---------------------------------------------------------------- steps


def explicit_step(state: RunState, config: SolverConfig, kernel, target: TargetModel) -> RunState:
    if config.scheme not in EXPLICIT:
        raise ValueError(f"explicit_step does not handle {config.scheme.value}")
    g = parvi_velocity(config.scheme, state.particles, kernel, target, config.gfsf_ridge, state.rng)
    _check_finite(g, "velocity")
    if config.step_rule == "plain":
        return replace(state, particles=state.particles + config.lr * g, iter=state.iter + 1)
    acc = (np.zeros_like(g) if state.adagrad_sum is None else state.adagrad_sum) + g * g
    x = state.particles + config.lr * g / (np.sqrt(acc) + ADAGRAD_EPS)
    return replace(state, particles=x, iter=state.iter + 1, adagrad_sum=acc)


def lmc_step_size(n: int, schedule) -> float:
    a, b, c = schedule
    return a * (b + n) ** (-c)


def lmc_step(state: RunState, config: SolverConfig, target: TargetModel) -> RunState:
    """Unadjusted Langevin: ``x - eps grad V + sqrt(2 eps) xi``.

    ``lmc_ascent_sign`` flips the drift to ``+eps grad V``, a variant kept for
    comparison; it climbs the potential and does not target ``rho*``.
    """
    eps = lmc_step_size(state.iter, config.lmc_schedule)
    g = target.grad_v(state.particles, state.rng)
    _check_finite(g, "gradient")
    if config.lmc_ascent_sign:
        g = -g
    xi = state.rng.standard_normal(state.particles.shape)
    x = state.particles - eps * g + np.sqrt(2.0 * eps) * xi
    return replace(state, particles=x, iter=state.iter + 1)


def evi_im_step(state: RunState, config: SolverConfig, kernel, target: TargetModel) -> Tuple[RunState, InnerReport]:
    """One outer iteration: approximately minimise ``J_n`` by BB gradient descent.

    Inner steps are halved until ``J_n`` decreases (up to rounding once the
    predicted decrease drops below machine precision). The returned particles
    always satisfy ``J_n(new) <= J_n(prev) = F_h(prev)``.
    """
    if config.scheme is not Scheme.EVI_IM:
        raise ValueError("evi_im_step requires the evi_im scheme")
    prev = state.particles
    n = prev.shape[0]
    tau = config.tau
    h = resolve_bandwidth(kernel, prev)
    rng = state.rng

    def objective(x):
        return proximal_value_and_grad(x, prev, tau, h, target, rng)

    x = prev
    j, g = objective(x)
    f_before = j
    best = (x, j, g)
    step = 1e-3 * tau
    it = 0
    converged = False
    gnorm = float(np.linalg.norm(g))
    while it < config.inner_max_iter:
        _check_finite(g, "inner gradient")
        if gnorm <= config.inner_tol:
            converged = True
            break
        # near a stationary point J changes by less than its rounding error
        slack = 16.0 * np.finfo(float).eps * (1.0 + abs(j))
        trial = step
        for _ in range(MAX_HALVINGS + 1):
            x_new = x - trial * g
            j_new, g_new = objective(x_new)
            if j_new < j or (j_new <= j + slack and trial * gnorm**2 <= slack):
                break
            trial *= 0.5
        else:
            if it == 0 and step * gnorm**2 > 1e3 * slack:
                raise StalledInnerSolverError(
                    f"line search could not decrease J_n in {MAX_HALVINGS} halvings "
                    f"(iter {state.iter}, |grad| = {gnorm:.3e})"
                )
            break
        s = x_new - x
        y = g_new - g
        sy = float(np.vdot(s, y))
        yy = float(np.vdot(y, y))
        step = min(max(sy / yy, BB_MIN), BB_MAX) if sy > 0 and yy > 0 else trial
        x, j, g = x_new, j_new, g_new
        gnorm = float(np.linalg.norm(g))
        if j < best[1]:
            best = (x, j, g)
        it += 1
    else:
        converged = gnorm <= config.inner_tol

    if j > f_before:
        # rounding-level drift above the anchor: fall back to the best iterate seen
        x, j, g = best
        gnorm = float(np.linalg.norm(g))
        converged = gnorm <= config.inner_tol

    delta = x - prev
    step_sq = float(np.sum(delta * delta))
    f_after = j - step_sq / (2.0 * tau * n)
    report = InnerReport(
        iterations=it,
        grad_norm=gnorm,
        converged=converged,
        decrease_holds=f_after - f_before <= -step_sq / (2.0 * tau * n) + 1e-10 * (1.0 + abs(f_before)),
        energy_before=f_before,
        energy_after=f_after,
        step_sq_norm=step_sq,
    )
    x = x.copy() if x is prev else x
    return replace(state, particles=x, iter=state.iter + 1), report


def advance(state: RunState, config: SolverConfig, kernel, target: TargetModel):
    """Single outer iteration of any scheme; returns ``(state, inner_report or None)``."""
    if config.scheme is Scheme.EVI_IM:
        return evi_im_step(state, config, kernel, target)
    if config.scheme is Scheme.LMC:
        return lmc_step(state, config, target), None
    return explicit_step(state, config, kernel, target), None


# ---------------------------------------------------------------- run loop


@dataclass
class RunResult:
    snapshots: List[Tuple[int, np.ndarray]]
    metrics: List[MetricsRecord]
    inner_reports: List[InnerReport]
    state: RunState

    @property
    def particles(self) -> np.ndarray:
        return self.state.particles

    @property
    def energies(self) -> np.ndarray:
        return np.array([m.energy for m in self.metrics])


def measure(particles, kernel, target: TargetModel, it: int, wall: float,
            mmd: Optional[PolynomialMMD] = None) -> MetricsRecord:
    h = resolve_bandwidth(kernel, particles)
    value, bracket = energy_and_bracket(particles, h, target)
    return MetricsRecord(
        iter=it,
        energy=value,
        grad_norm=float(np.linalg.norm(bracket)) / particles.shape[0],
        mmd2=None if mmd is None else mmd(particles),
        wall_time_s=wall,
    )


def run(target: TargetModel, init, config: SolverConfig, kernel, reference=None,
        snapshot_every: int = 0, callback=None) -> RunResult:
    """Advance ``init`` for ``config.outer_iters`` iterations, recording metrics.

    A metrics row is produced for the initial particles and after every outer
    iteration. Snapshots are kept at iteration 0, every ``snapshot_every``
    iterations (0 disables the periodic ones) and at the final iteration.
    """
    x0 = as_particles(init, target.dim)
    if isinstance(kernel, KernelConfig) and kernel.dim != target.dim:
        raise ValueError(f"kernel dim {kernel.dim} does not match target dim {target.dim}")
    state = RunState.initial(x0, config.seed)
    mmd = None if reference is None else PolynomialMMD(reference)
    clock = time.perf_counter
    elapsed = 0.0
    metrics = [measure(state.particles, kernel, target, 0, elapsed, mmd)]
    snapshots = [(0, state.particles.copy())]
    reports = []
    for n in range(config.outer_iters):
        t0 = clock()
        state, report = advance(state, config, kernel, target)
        elapsed += clock() - t0
        if report is not None:
            reports.append(report)
        metrics.append(measure(state.particles, kernel, target, state.iter, elapsed, mmd))
        if (snapshot_every and state.iter % snapshot_every == 0) or n == config.outer_iters - 1:
            snapshots.append((state.iter, state.particles.copy()))
        if callback is not None:
            callback(state, metrics[-1], report)
        log.debug("iter %d energy %.6g", state.iter, metrics[-1].energy)
    return RunResult(snapshots, metrics, reports, state)
