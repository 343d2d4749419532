"""CSV serialisation for particle sets, snapshots and metrics.

Floats are written with 17 significant digits so a write/read cycle is exact.
"""
from __future__ import annotations

import csv
from typing import Iterable, Sequence, Tuple

import numpy as np

from .diagnostics import MetricsRecord
from .errors import DatasetError

METRICS_HEADER = ("iter", "energy", "grad_norm", "mmd2", "wall_time_s")


def fmt(value) -> str:
    if value is None:
        return ""
    return f"{float(value):.17g}"


def _coords(dim: int):
    return [f"x{k}" for k in range(dim)]


def write_particles(path, particles, dim: int = None) -> None:
    x = np.asarray(particles, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1 if dim is None else dim)
    dim = x.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(_coords(dim)) + "\n")
        for row in x:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_snapshots(path, snapshots: Iterable[Tuple[int, np.ndarray]], dim: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(["iter", "particle_id"] + _coords(dim)) + "\n")
        for it, x in snapshots:
            for pid, row in enumerate(x):
                fh.write(",".join([str(it), str(pid)] + [fmt(v) for v in row]) + "\n")


def write_metrics(path, records: Sequence[MetricsRecord], wall_time: bool = True) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(METRICS_HEADER) + "\n")
        for r in records:
            fields = [str(r.iter), fmt(r.energy), fmt(r.grad_norm), fmt(r.mmd2),
                      fmt(r.wall_time_s) if wall_time else ""]
            fh.write(",".join(fields) + "\n")


def read_particles(path) -> np.ndarray:
    """Read a particle CSV (``x0,...``) or a snapshot CSV (last iteration is used)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    snapshot = header[:2] == ["iter", "particle_id"]
    coords = header[2:] if snapshot else header
    if not coords or coords != _coords(len(coords)):
        raise DatasetError(f"{path}: unexpected header {header}")
    data = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DatasetError(f"{path}: line {line_no} has {len(row)} fields, expected {len(header)}")
        try:
            data.append([float(v) for v in row])
        except ValueError:
            raise DatasetError(f"{path}: line {line_no} is not numeric") from None
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    if snapshot:
        if arr.shape[0]:
            arr = arr[arr[:, 0] == arr[:, 0].max()]
        arr = arr[:, 2:]
    return arr
