"""Fidelity metrics: polynomial-kernel MMD^2, kernel density, moments, modes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionError, EmptyInputError, InsufficientParticlesError, InvalidGridError
from .kernels import as_particles, normalizer

_BLOCK = 2048


@dataclass(frozen=True)
class MetricsRecord:
    iter: int
    energy: float
    grad_norm: float
    mmd2: Optional[float]
    wall_time_s: float


def poly_kernel(x, y) -> np.ndarray:
    """``k(x, y) = (x.y / 3 + 1)^3`` for every pair of rows."""
    return (np.asarray(x) @ np.asarray(y).T / 3.0 + 1.0) ** 3


def _kernel_sum(x, y) -> float:
    total = 0.0
    for start in range(0, x.shape[0], _BLOCK):
        total += float(poly_kernel(x[start:start + _BLOCK], y).sum())
    return total


def _canonical(xs, ys):
    # fixed argument order makes mmd2(X, Y) and mmd2(Y, X) the same float expression
    key_x = (xs.shape, xs.tobytes())
    key_y = (ys.shape, ys.tobytes())
    return (ys, xs) if key_y < key_x else (xs, ys)


def mmd2(xs, ys) -> float:
    """Biased (V-statistic) squared MMD with the cubic polynomial kernel."""
    xs = as_particles(xs)
    ys = as_particles(ys)
    if xs.shape[1] != ys.shape[1]:
        raise DimensionError(f"sample dimensions differ: {xs.shape[1]} vs {ys.shape[1]}")
    xs, ys = _canonical(xs, ys)
    n, m = xs.shape[0], ys.shape[0]
    return (_kernel_sum(xs, xs) / (n * n) + _kernel_sum(ys, ys) / (m * m)
            - 2.0 * _kernel_sum(xs, ys) / (n * m))


class PolynomialMMD:
    """``mmd2`` against a fixed reference set, caching the reference self-term."""

    def __init__(self, reference):
        self.reference = as_particles(reference)
        m = self.reference.shape[0]
        self._ref_term = _kernel_sum(self.reference, self.reference) / (m * m)

    def __call__(self, xs) -> float:
        xs = as_particles(xs, self.reference.shape[1])
        n, m = xs.shape[0], self.reference.shape[0]
        return (_kernel_sum(xs, xs) / (n * n) + self._ref_term
                - 2.0 * _kernel_sum(xs, self.reference) / (n * m))


def kde_density(particles, h: float, query) -> np.ndarray:
    """``(1/N) sum_j K_h(query - x_j)`` with the package's Gaussian kernel.

    ``query`` may be a single point or an ``(M, d)`` array. With this kernel
    the estimate integrates to ``(h / 2)^(d/2)`` rather than one.
    """
    x = as_particles(particles)
    q = np.asarray(query, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    if q.shape[1] != x.shape[1]:
        raise DimensionError("query dimension does not match particles")
    sq = cdist(q, x, "sqeuclidean")
    dens = normalizer(h, x.shape[1]) * np.exp(-sq / h**2).mean(axis=1)
    return float(dens[0]) if single else dens


def particle_moments(particles):
    """Sample mean and unbiased sample covariance."""
    x = np.asarray(particles, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise EmptyInputError("particle set is empty")
    if x.shape[0] < 2:
        raise InsufficientParticlesError("covariance needs at least 2 particles")
    mean = x.mean(axis=0)
    c = x - mean
    return mean, c.T @ c / (x.shape[0] - 1)


@dataclass(frozen=True)
class GridSpec:
    """``points`` per axis over the particle bounding box padded by ``pad_factor * h``."""

    points: int = 201
    pad_factor: float = 3.0


def find_modes(particles, h: float, grid: GridSpec = GridSpec()) -> List[np.ndarray]:
    """Grid points where the KDE beats all 8 neighbours, densest first."""
    x = as_particles(particles)
    if x.shape[1] != 2:
        raise DimensionError("find_modes supports two-dimensional particles only")
    if grid.points < 3:
        raise InvalidGridError(f"grid needs at least 3 points per axis, got {grid.points}")
    pad = grid.pad_factor * h
    lo = x.min(axis=0) - pad
    hi = x.max(axis=0) + pad
    if not np.all(hi > lo):
        raise InvalidGridError("grid has zero extent")
    gx = np.linspace(lo[0], hi[0], grid.points)
    gy = np.linspace(lo[1], hi[1], grid.points)
    mx, my = np.meshgrid(gx, gy, indexing="ij")
    dens = kde_density(x, h, np.stack([mx.ravel(), my.ravel()], axis=1)).reshape(mx.shape)
    core = dens[1:-1, 1:-1]
    is_max = np.ones_like(core, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = dens[1 + di:dens.shape[0] - 1 + di, 1 + dj:dens.shape[1] - 1 + dj]
            is_max &= core > nb
    ii, jj = np.nonzero(is_max)
    order = np.argsort(-core[ii, jj], kind="stable")
    return [np.array([gx[ii[k] + 1], gy[jj[k] + 1]]) for k in order]
