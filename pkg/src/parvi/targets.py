"""Target densities given through their potential ``V = -ln rho*`` (up to a constant).

Every target exposes ``value_and_grad(X)`` on an ``(N, d)`` array of points,
returning ``V`` with shape ``(N,)`` and ``grad V`` with shape ``(N, d)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .errors import DatasetError, DimensionError, EmptyInputError, ProposalFailureError
from .kernels import as_particles

FULL = "full"

_LOG_HALF = np.log(0.5)


@dataclass
class TargetModel:
    """A potential and its gradient.

    For stochastic targets ``value_and_grad`` takes a ``numpy.random.Generator``
    and returns a minibatch gradient estimate; called without one it returns
    the exact full-data gradient. The value is always exact.
    """

    name: str
    dim: int
    value_and_grad: Callable
    stochastic: bool = False
    rng_dependent: bool = False
    params: dict = field(default_factory=dict)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"target {self.name!r} expects dimension {self.dim}, got {x.shape[-1]}")
        return x, single

    def evaluate(self, x, rng: Optional[np.random.Generator] = None):
        x, single = self._check(x)
        if self.stochastic:
            v, g = self.value_and_grad(x, rng)
        else:
            v, g = self.value_and_grad(x)
        if single:
            return float(v[0]), g[0]
        return v, g

    def v(self, x):
        return self.evaluate(x)[0]

    def grad_v(self, x, rng: Optional[np.random.Generator] = None):
        return self.evaluate(x, rng)[1]


# ---------------------------------------------------------------- toy densities


def _toy1(x):
    x1, x2 = x[:, 0], x[:, 1]
    r = 10.0 * x2 + 3.0 * x1**2 - 3.0
    v = 0.5 * x1**2 + 0.5 * r**2
    g = np.stack([x1 + 6.0 * x1 * r, 10.0 * r], axis=1)
    return v, g


def _toy2(x):
    x1, x2 = x[:, 0], x[:, 1]
    q = x1**2 + x2**2 - 3.0
    a = -2.0 * (x1 - 2.0) ** 2
    b = -2.0 * (x2 + 2.0) ** 2
    lse = np.logaddexp(a, b)
    wa = np.exp(a - lse)
    wb = np.exp(b - lse)
    v = 2.0 * q**2 - lse
    g = np.stack(
        [8.0 * q * x1 + 4.0 * (x1 - 2.0) * wa, 8.0 * q * x2 + 4.0 * (x2 + 2.0) * wb],
        axis=1,
    )
    return v, g


def _toy3(x):
    x1, x2 = x[:, 0], x[:, 1]
    s = (x2 - np.sin(0.5 * np.pi * x1)) / 0.4
    v = 0.5 * s**2
    ds = s / 0.4
    g = np.stack([-ds * 0.5 * np.pi * np.cos(0.5 * np.pi * x1), ds], axis=1)
    return v, g


def _single(fn, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise DimensionError(f"expected a 2-vector, got shape {x.shape}")
    v, g = fn(x[None, :])
    return float(v[0]), g[0]


def toy1_potential(x):
    """Banana-shaped density ``exp(-x1^2/2 - (10 x2 + 3 x1^2 - 3)^2 / 2)``."""
    return _single(_toy1, x)


def toy2_potential(x):
    """Ring of radius sqrt(3) modulated by two bumps."""
    return _single(_toy2, x)


def toy3_potential(x):
    """Gaussian tube of width 0.4 around the curve ``x2 = sin(pi x1 / 2)``."""
    return _single(_toy3, x)


def toy1() -> TargetModel:
    return TargetModel("toy1", 2, _toy1)


def toy2() -> TargetModel:
    return TargetModel("toy2", 2, _toy2)


def toy3() -> TargetModel:
    return TargetModel("toy3", 2, _toy3)


def gaussian(dim: int = 2, mean=None, scale: float = 1.0) -> TargetModel:
    """Isotropic Gaussian ``N(mean, scale^2 I)``."""
    mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=float).reshape(dim)
    if scale <= 0:
        raise ValueError("gaussian scale must be positive")
    inv = 1.0 / scale**2

    def value_and_grad(x):
        diff = x - mean
        return 0.5 * inv * np.einsum("ij,ij->i", diff, diff), inv * diff

    return TargetModel("gaussian", dim, value_and_grad, params={"mean": mean, "scale": scale})


# ---------------------------------------------------------------- mixture model


@dataclass
class MixtureData:
    observations: np.ndarray
    sigma: float = 2.5

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=float).reshape(-1)
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


def generate_mixture_data(n: int, omega=(1.0, -2.0), sigma: float = 2.5, seed=0) -> MixtureData:
    """Draw ``y ~ (N(w1, s^2) + N(w1 + w2, s^2)) / 2``."""
    rng = np.random.default_rng(seed)
    w1, w2 = omega
    comp = rng.integers(0, 2, size=n)
    means = np.where(comp == 0, w1, w1 + w2)
    return MixtureData(means + sigma * rng.standard_normal(n), sigma)


def mixture_posterior(data: MixtureData) -> TargetModel:
    """Posterior of ``(w1, w2)`` under standard normal priors.

    The likelihood is a two-component mixture with means ``w1`` and
    ``w1 + w2``; each component log-density is combined with log-sum-exp.
    """
    y = data.observations
    sigma2 = data.sigma**2
    log_norm = -0.5 * np.log(2.0 * np.pi * sigma2)

    def value_and_grad(w):
        v = 0.5 * np.einsum("ij,ij->i", w, w)
        g = w.copy()
        if y.size == 0:
            return v, g
        ra = y[None, :] - w[:, :1]
        rb = ra - w[:, 1:2]
        la = -0.5 * ra**2 / sigma2
        lb = -0.5 * rb**2 / sigma2
        lse = np.logaddexp(la, lb)
        v = v - np.sum(lse + _LOG_HALF + log_norm, axis=1)
        pa = np.exp(la - lse)
        pb = np.exp(lb - lse)
        pull_b = np.sum(pb * rb, axis=1) / sigma2
        g[:, 0] -= np.sum(pa * ra, axis=1) / sigma2 + pull_b
        g[:, 1] -= pull_b
        return v, g

    return TargetModel("mixture", 2, value_and_grad, params={"sigma": data.sigma, "n_obs": y.size})


# ---------------------------------------------------------------- logistic regression


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    standardized: bool = False
    column_means: Optional[np.ndarray] = None
    column_stds: Optional[np.ndarray] = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).reshape(-1)
        if self.features.shape[0] != self.labels.size:
            raise DimensionError("features and labels have different row counts")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise DatasetError("labels must be -1 or +1")

    def __len__(self):
        return self.labels.size


def logistic_posterior(data: LabeledDataset, alpha: float = 1.0, batch_size: Union[int, str] = FULL) -> TargetModel:
    """Bayesian logistic regression with prior ``N(0, alpha I)``.

    ``V(w) = ||w||^2 / (2 alpha) + sum_t log(1 + exp(-y_t w.c_t))``. With an
    integer ``batch_size`` the gradient is a minibatch estimate (without
    replacement, rescaled by ``T / |B|``) whenever a generator is supplied.
    """
    if len(data) == 0:
        raise EmptyInputError("logistic regression dataset is empty")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    c = data.features
    y = data.labels
    t = y.size
    yc = y[:, None] * c
    if batch_size != FULL:
        batch_size = int(batch_size)
        if not 1 <= batch_size <= t:
            raise ValueError(f"batch_size must be in [1, {t}], got {batch_size}")

    def likelihood_grad(w, rows):
        m = w @ yc[rows].T
        return -expit(-m) @ yc[rows]

    def value_and_grad(w, rng=None):
        m = w @ yc.T
        v = 0.5 * np.einsum("ij,ij->i", w, w) / alpha + np.sum(np.logaddexp(0.0, -m), axis=1)
        prior = w / alpha
        if batch_size == FULL or rng is None:
            return v, prior - expit(-m) @ yc
        rows = rng.choice(t, size=batch_size, replace=False)
        return v, prior + (t / batch_size) * likelihood_grad(w, rows)

    stochastic = batch_size != FULL
    return TargetModel(
        "logistic",
        c.shape[1],
        value_and_grad,
        stochastic=stochastic,
        rng_dependent=stochastic,
        params={"alpha": alpha, "batch_size": batch_size},
    )


def predict_proba(weights, features) -> np.ndarray:
    """``P(y = +1 | c, w)`` for each row of ``features``."""
    return expit(np.asarray(features) @ np.asarray(weights))


def make_logistic_dataset(n: int, weights, seed=0) -> LabeledDataset:
    """Synthetic rows ``c ~ N(0, I)`` with labels drawn from the logistic model."""
    rng = np.random.default_rng(seed)
    weights = np.asarray(weights, dtype=float)
    c = rng.standard_normal((n, weights.size))
    y = np.where(rng.random(n) < predict_proba(weights, c), 1.0, -1.0)
    return LabeledDataset(c, y)


def _parse_label(raw: str, row: int, col: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise DatasetError(f"row {row}, column {col}: label {raw!r} is not numeric") from None
    if value in (1.0,):
        return 1.0
    if value in (-1.0, 0.0):
        return -1.0
    raise DatasetError(f"row {row}, column {col}: unknown label {raw!r} (expected -1/+1 or 0/1)")


def read_labeled_csv(path, label_column: str) -> LabeledDataset:
    """Read a header-first numeric CSV; labels ``0`` are mapped to ``-1``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: file is empty") from None
        if label_column not in header:
            raise DatasetError(f"{path}: label column {label_column!r} not in header {header}")
        li = header.index(label_column)
        feats, labels = [], []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}: row {row_no} has {len(row)} fields, expected {len(header)}")
            values = []
            for col, cell in enumerate(row):
                if col == li:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DatasetError(f"{path}: row {row_no}, column {col}: cannot parse {cell!r}") from None
            feats.append(values)
            labels.append(_parse_label(row[li], row_no, li))
    if not labels:
        raise DatasetError(f"{path}: no data rows")
    return LabeledDataset(np.array(feats, dtype=float), np.array(labels))


def standardize(train: LabeledDataset, test: LabeledDataset) -> Tuple[LabeledDataset, LabeledDataset]:
    """Scale both splits with the training split's column mean and (population) std."""
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    bad = np.flatnonzero(~(std > 0))
    if bad.size:
        raise DatasetError(f"column(s) {bad.tolist()} are constant in the training split; cannot standardize")

    def apply(d):
        return LabeledDataset((d.features - mean) / std, d.labels, True, mean, std)

    return apply(train), apply(test)


def split_dataset(data: LabeledDataset, split_fraction: float, seed) -> Tuple[LabeledDataset, LabeledDataset]:
    if not 0.0 < split_fraction < 1.0:
        raise ValueError("split_fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(len(data))
    n_train = int(round(split_fraction * len(data)))
    tr, te = perm[:n_train], perm[n_train:]
    return (
        LabeledDataset(data.features[tr], data.labels[tr]),
        LabeledDataset(data.features[te], data.labels[te]),
    )


def load_csv_dataset(path, label_column: str, standardize_columns: bool = True, split_fraction: float = 0.8, seed=0):
    data = read_labeled_csv(path, label_column)
    train, test = split_dataset(data, split_fraction, seed)
    if standardize_columns:
        train, test = standardize(train, test)
    return train, test


# ---------------------------------------------------------------- samplers


def sample_gaussian_init(n: int, dim: int, mean=None, scale: float = 1.0, seed=None) -> np.ndarray:
    if n < 1:
        raise EmptyInputError("need at least one particle")
    mean = np.zeros(dim) if mean is None else np.broadcast_to(np.asarray(mean, dtype=float), (dim,))
    rng = np.random.default_rng(seed)
    return mean + scale * rng.standard_normal((n, dim))


REFERENCE_BOXES = {
    "toy1": ((-4.0, 4.0), (-4.0, 4.0)),
    "toy2": ((-3.0, 3.0), (-3.0, 3.0)),
    "toy3": ((-4.0, 4.0), (-4.0, 4.0)),
}


def sample_reference(target: TargetModel, n: int, seed=None, box: Optional[Sequence] = None,
                     grid_points: int = 401, min_acceptance: float = 1e-5) -> np.ndarray:
    """Direct draws from a built-in target.

    Gaussian targets are sampled exactly. Other targets use rejection
    sampling from a uniform proposal on a bounding box, with the envelope set
    by the minimum of ``V`` over a ``grid_points``-square grid.
    """
    rng = np.random.default_rng(seed)
    if target.name == "gaussian":
        mean = target.params["mean"]
        return mean + target.params["scale"] * rng.standard_normal((n, target.dim))
    if box is None:
        if target.name not in REFERENCE_BOXES:
            raise ValueError(f"no default sampling box for target {target.name!r}")
        box = REFERENCE_BOXES[target.name]
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    if lo.size != target.dim:
        raise DimensionError("sampling box dimension does not match the target")
    axes = [np.linspace(a, b, grid_points) for a, b in zip(lo, hi)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    v_min = float(np.min(target.v(grid)))

    out = np.empty((0, target.dim))
    proposed = 0
    batch = max(4 * n, 10_000)
    while out.shape[0] < n:
        z = lo + (hi - lo) * rng.random((batch, target.dim))
        u = rng.random(batch)
        keep = np.log(u) <= -(target.v(z) - v_min)
        out = np.concatenate([out, z[keep]])
        proposed += batch
        rate = out.shape[0] / proposed
        if rate < min_acceptance:
            raise ProposalFailureError(
                f"rejection sampler acceptance rate {rate:.3g} below {min_acceptance:g} "
                f"after {proposed} proposals (box {lo.tolist()}..{hi.tolist()}, V_min={v_min:.4g})"
            )
    return out[:n]
