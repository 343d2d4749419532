import numpy as np
import pytest


def central_diff(fn, x, step=1e-6):
    """Central finite-difference gradient of a scalar function of an array."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = step
        grad[idx] = (fn(x + e) - fn(x - e)) / (2 * step)
    return grad


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class Quadratic:
    """V(x) = |x|^2 / 2 as a TargetModel in any dimension."""

    def __new__(cls, dim=1):
        from parvi.targets import gaussian

        return gaussian(dim)


class Flat:
    def __new__(cls, dim=2):
        from parvi.targets import TargetModel

        def vg(x):
            return np.zeros(x.shape[0]), np.zeros_like(x)

        return TargetModel("flat", dim, vg)
