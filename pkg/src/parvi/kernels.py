"""Gaussian kernel, its gradient, pairwise kernel matrices and bandwidth rules.

The kernel used throughout is

    K_h(x, y) = (2*pi*h)**(-d/2) * exp(-||x - y||**2 / h**2)

Note the normalising constant uses ``h`` while the exponent uses ``h**2`` with
no factor 2, so ``h`` is not a standard deviation (the implied variance is
``h**2 / 2`` per coordinate) and the kernel does not integrate to one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import pdist

from .errors import (
    DegenerateConfigurationError,
    DimensionError,
    EmptyInputError,
    InsufficientParticlesError,
    InvalidBandwidthError,
)

MEDIAN = "median"


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidth policy for the Gaussian kernel.

    ``bandwidth`` is either a positive float (fixed ``h``) or the string
    ``"median"``. ``h_min`` is an optional floor used when the median rule
    meets an all-coincident particle set; without it that case raises.
    """

    bandwidth: Union[float, str]
    dim: int
    h_min: Optional[float] = None

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError(f"kernel dimension must be >= 1, got {self.dim}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != MEDIAN:
                raise InvalidBandwidthError(
                    f"bandwidth must be a positive number or 'median', got {self.bandwidth!r}"
                )
        else:
            _check_h(self.bandwidth)
        if self.h_min is not None:
            _check_h(self.h_min)

    @property
    def is_median(self) -> bool:
        return isinstance(self.bandwidth, str)

    @classmethod
    def fixed(cls, h: float, dim: int) -> "KernelConfig":
        return cls(float(h), dim)

    @classmethod
    def median_rule(cls, dim: int, h_min: Optional[float] = None) -> "KernelConfig":
        return cls(MEDIAN, dim, h_min)


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    row_sums: np.ndarray


def _check_h(h) -> float:
    h = float(h)
    if not np.isfinite(h) or h <= 0.0:
        raise InvalidBandwidthError(f"bandwidth must be positive and finite, got {h}")
    return h


def _pair(x1, x2):
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x1.ndim != 1 or x1.shape != x2.shape:
        raise DimensionError(f"kernel arguments must be equal-length vectors, got {x1.shape} and {x2.shape}")
    return x1, x2


def as_particles(particles, dim: Optional[int] = None) -> np.ndarray:
    """Validate and return an (N, d) float array."""
    x = np.asarray(particles, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionError(f"particles must be an (N, d) array, got shape {x.shape}")
    if x.shape[0] == 0:
        raise EmptyInputError("particle set is empty")
    if dim is not None and x.shape[1] != dim:
        raise DimensionError(f"particles have dimension {x.shape[1]}, expected {dim}")
    return x


def normalizer(h: float, dim: int) -> float:
    """Peak value ``(2*pi*h)**(-d/2)`` of the kernel."""
    return (2.0 * np.pi * h) ** (-0.5 * dim)


def gaussian_kernel(x1, x2, h: float) -> float:
    h = _check_h(h)
    x1, x2 = _pair(x1, x2)
    diff = x1 - x2
    return float(normalizer(h, x1.size) * np.exp(-np.dot(diff, diff) / h**2))


def gaussian_kernel_grad(x1, x2, h: float) -> np.ndarray:
    """Gradient of ``gaussian_kernel`` with respect to its first argument."""
    h = _check_h(h)
    x1, x2 = _pair(x1, x2)
    diff = x1 - x2
    k = normalizer(h, x1.size) * np.exp(-np.dot(diff, diff) / h**2)
    return -(2.0 / h**2) * diff * k


def pairwise_differences(x: np.ndarray) -> np.ndarray:
    """``D[i, j] = x_i - x_j``; exactly antisymmetric."""
    return x[:, None, :] - x[None, :, :]


def kernel_from_differences(diff: np.ndarray, h: float) -> np.ndarray:
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return normalizer(h, diff.shape[-1]) * np.exp(-sq / h**2)


def kernel_matrix(particles, h: float) -> KernelMatrix:
    h = _check_h(h)
    x = as_particles(particles)
    k = kernel_from_differences(pairwise_differences(x), h)
    return KernelMatrix(values=k, row_sums=k.sum(axis=1))


def median_bandwidth(particles) -> float:
    """Median heuristic ``h = med**2 / ln N`` over distinct pairs ``i < j``."""
    x = as_particles(particles)
    n = x.shape[0]
    if n < 2:
        raise InsufficientParticlesError("median bandwidth needs at least 2 particles")
    med = float(np.median(pdist(x)))
    if med == 0.0:
        raise DegenerateConfigurationError(
            "median pairwise distance is zero; particles are (mostly) coincident"
        )
    return med**2 / np.log(n)


def resolve_bandwidth(kernel: Union[KernelConfig, float], particles) -> float:
    """Turn a kernel configuration into a concrete ``h`` for this particle set."""
    if not isinstance(kernel, KernelConfig):
        return _check_h(kernel)
    if not kernel.is_median:
        return float(kernel.bandwidth)
    try:
        return median_bandwidth(particles)
    except DegenerateConfigurationError:
        if kernel.h_min is None:
            raise
        return float(kernel.h_min)
