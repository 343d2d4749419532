"""Kernel-regularised discrete KL energy and the proximal objective.

    F_h(X) = (1/N) sum_i [ ln((1/N) sum_j K_h(x_i, x_j)) + V(x_i) ]
    J_n(X) = (1/(2 tau N)) sum_i ||x_i - x_i^n||^2 + F_h(X)

When the kernel uses the median rule the bandwidth is resolved from the
particles being evaluated (for ``F_h``) or from the anchor ``prev`` (for
``J_n``) and is held fixed while differentiating.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DimensionError
from .kernels import (
    as_particles,
    kernel_from_differences,
    pairwise_differences,
    resolve_bandwidth,
)
from .targets import TargetModel


@dataclass(frozen=True)
class EnergyReport:
    value: float
    grad: np.ndarray

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.grad))


def interaction_terms(x: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """Row sums ``S_i = sum_j K_ij`` and the two kernel-gradient sums.

    Returns ``(S, force)`` where ``force[i]`` is

        sum_j grad_{x_i} K(x_i, x_j) / S_i + sum_k grad_{x_i} K(x_k, x_i) / S_k

    The self terms ``j = i`` and ``k = i`` are included; they vanish.
    """
    diff = pairwise_differences(x)
    k = kernel_from_differences(diff, h)
    s = k.sum(axis=1)
    # both gradients equal -(2/h^2) (x_i - x_j) K_ij; they differ only in which row sum divides them
    w = k / s[:, None] + k / s[None, :]
    force = -(2.0 / h**2) * np.einsum("ijk,ij->ik", diff, w)
    return s, force


def _log_density_term(s: np.ndarray, n: int) -> float:
    return float(np.mean(np.log(s / n)))


def energy_and_bracket(x: np.ndarray, h: float, target: TargetModel, rng=None):
    """``F_h`` together with the unscaled bracket ``N * grad F_h``."""
    s, force = interaction_terms(x, h)
    v, gv = target.evaluate(x, rng)
    value = _log_density_term(s, x.shape[0]) + float(np.mean(v))
    return value, force + gv


def energy_value(x: np.ndarray, h: float, target: TargetModel) -> float:
    diff = pairwise_differences(x)
    s = kernel_from_differences(diff, h).sum(axis=1)
    return _log_density_term(s, x.shape[0]) + float(np.mean(target.v(x)))


def discrete_energy(particles, kernel, target: TargetModel) -> float:
    x = as_particles(particles, target.dim)
    return energy_value(x, resolve_bandwidth(kernel, x), target)


def discrete_energy_grad(particles, kernel, target: TargetModel, rng=None) -> np.ndarray:
    x = as_particles(particles, target.dim)
    _, bracket = energy_and_bracket(x, resolve_bandwidth(kernel, x), target, rng)
    return bracket / x.shape[0]


def energy_report(particles, kernel, target: TargetModel) -> EnergyReport:
    x = as_particles(particles, target.dim)
    value, bracket = energy_and_bracket(x, resolve_bandwidth(kernel, x), target)
    return EnergyReport(value, bracket / x.shape[0])


def _check_pair(particles, prev, tau, target):
    x = as_particles(particles, target.dim)
    p = as_particles(prev, target.dim)
    if x.shape != p.shape:
        raise DimensionError(f"particles {x.shape} and anchor {p.shape} differ in shape")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return x, p


def proximal_value_and_grad(x: np.ndarray, prev: np.ndarray, tau: float, h: float,
                            target: TargetModel, rng=None) -> Tuple[float, np.ndarray]:
    """``J_n`` and its gradient at fixed bandwidth ``h``."""
    n = x.shape[0]
    delta = x - prev
    f, bracket = energy_and_bracket(x, h, target, rng)
    j = float(np.sum(delta * delta)) / (2.0 * tau * n) + f
    return j, (delta / tau + bracket) / n


def proximal_objective(particles, prev, tau: float, kernel, target: TargetModel) -> float:
    x, p = _check_pair(particles, prev, tau, target)
    h = resolve_bandwidth(kernel, p)
    delta = x - p
    return float(np.sum(delta * delta)) / (2.0 * tau * x.shape[0]) + energy_value(x, h, target)


def proximal_objective_grad(particles, prev, tau: float, kernel, target: TargetModel) -> np.ndarray:
    x, p = _check_pair(particles, prev, tau, target)
    return proximal_value_and_grad(x, p, tau, resolve_bandwidth(kernel, p), target)[1]
