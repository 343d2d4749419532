"""Run configuration files.

One ``key = value`` per line, ``#`` starts a comment, dotted keys group
settings (``target.name = toy1``). Example::

    target.name = toy1
    solver.scheme = evi_im
    solver.tau = 0.01
    solver.outer_iters = 200
    n_particles = 50
    kernel.bandwidth = 0.05
    output_dir = runs/toy1
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

from .errors import ConfigError
from .kernels import MEDIAN, KernelConfig
from .solvers import EXPLICIT, Scheme, SolverConfig
from .targets import FULL

TARGETS = ("toy1", "toy2", "toy3", "mixture", "logistic", "gaussian")
REQUIRED = object()


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _floats(raw: str) -> Tuple[float, ...]:
    return tuple(float(p) for p in raw.split(",") if p.strip())


def _bandwidth(raw: str):
    return MEDIAN if raw.strip().lower() == MEDIAN else float(raw)


def _batch(raw: str):
    return FULL if raw.strip().lower() == FULL else int(raw)


def _opt_float(raw: str):
    return None if raw.strip().lower() in ("", "none", "auto") else float(raw)


def _text(raw: str) -> str:
    return raw.strip()


# key -> (parser, default)
SCHEMA: Dict[str, Tuple[Callable[[str], Any], Any]] = {
    "target.name": (_text, REQUIRED),
    "target.dim": (int, 2),
    "target.mean": (_floats, None),
    "target.scale": (float, 1.0),
    "target.data_path": (_text, None),
    "target.n_obs": (int, 1000),
    "target.omega": (_floats, (1.0, -2.0)),
    "target.sigma": (float, 2.5),
    "target.data_seed": (int, 0),
    "target.label_column": (_text, "label"),
    "target.standardize": (_bool, True),
    "target.split_fraction": (float, 0.8),
    "target.split_seed": (int, 0),
    "target.alpha": (float, 1.0),
    "target.batch_size": (_batch, FULL),
    "solver.scheme": (_text, REQUIRED),
    "solver.outer_iters": (int, REQUIRED),
    "solver.tau": (float, None),
    "solver.lr": (float, None),
    "solver.inner_max_iter": (int, 100),
    "solver.inner_tol": (float, 1e-8),
    "solver.lmc_schedule": (_floats, (0.1, 1.0, 0.55)),
    "solver.lmc_ascent_sign": (_bool, False),
    "solver.gfsf_ridge": (_opt_float, None),
    "solver.step_rule": (_text, "adagrad"),
    "n_particles": (int, REQUIRED),
    "init.mean": (_floats, None),
    "init.scale": (float, 1.0),
    "kernel.bandwidth": (_bandwidth, REQUIRED),
    "kernel.h_min": (float, 1e-3),
    "snapshot_every": (int, 0),
    "mmd_reference": (_text, None),
    "output_dir": (_text, REQUIRED),
    "seed": (int, 0),
    "metrics.wall_time": (_bool, False),
}

PATH_KEYS = ("target.data_path", "mmd_reference", "output_dir")


@dataclass
class RunConfig:
    values: Dict[str, Any]
    solver: SolverConfig
    kernel: KernelConfig
    source: Optional[str] = None

    def __getitem__(self, key):
        return self.values[key]

    @property
    def target_name(self) -> str:
        return self.values["target.name"]

    @property
    def dim(self) -> int:
        return self.kernel.dim

    @property
    def output_dir(self) -> str:
        return self.values["output_dir"]

    def render(self) -> str:
        """Fully resolved config in the same ``key = value`` format."""
        lines = []
        for key in SCHEMA:
            v = self.values[key]
            if v is None:
                continue
            if isinstance(v, bool):
                text = "true" if v else "false"
            elif isinstance(v, float):
                text = repr(v)
            elif isinstance(v, tuple):
                text = ", ".join(repr(float(p)) for p in v)
            else:
                text = str(v)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"


def parse_text(text: str, base_dir: str = ".", source: Optional[str] = None) -> RunConfig:
    raw: Dict[str, Tuple[str, int]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", line=line_no)
        key, value = (p.strip() for p in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError("unknown key", key=key, line=line_no)
        if key in raw:
            raise ConfigError("duplicate key", key=key, line=line_no)
        raw[key] = (value, line_no)

    values: Dict[str, Any] = {}
    for key, (parser, default) in SCHEMA.items():
        if key in raw:
            text_value, line_no = raw[key]
            try:
                values[key] = parser(text_value)
            except ValueError as exc:
                raise ConfigError(f"invalid value {text_value!r}: {exc}", key=key, line=line_no) from None
        elif default is REQUIRED:
            raise ConfigError("missing required key", key=key)
        else:
            values[key] = default

    def fail(key, message):
        raise ConfigError(message, key=key, line=raw.get(key, (None, None))[1])

    name = values["target.name"]
    if name not in TARGETS:
        fail("target.name", f"unknown target {name!r}; choose from {list(TARGETS)}")
    try:
        scheme = Scheme.parse(values["solver.scheme"])
    except ValueError as exc:
        fail("solver.scheme", str(exc))
    values["solver.scheme"] = scheme.value

    for key in PATH_KEYS:
        if values[key] is not None:
            values[key] = os.path.abspath(os.path.join(base_dir, values[key]))
    for key in ("target.data_path", "mmd_reference"):
        if values[key] is not None and not os.path.exists(values[key]):
            fail(key, f"file not found: {values[key]}")
    if name == "logistic" and values["target.data_path"] is None:
        fail("target.data_path", "logistic target needs a dataset")

    positive = ["n_particles", "init.scale", "target.scale", "target.sigma", "target.alpha",
                "solver.inner_max_iter", "solver.inner_tol", "kernel.h_min", "target.dim"]
    if scheme is Scheme.EVI_IM:
        if values["solver.tau"] is None:
            fail("solver.tau", "missing required key for evi_im")
        positive.append("solver.tau")
    elif scheme in EXPLICIT:
        if values["solver.lr"] is None:
            fail("solver.lr", f"missing required key for {scheme.value}")
        positive.append("solver.lr")
    for key in positive:
        if not values[key] > 0:
            fail(key, f"{key} must be positive, got {values[key]}")
    for key in ("solver.tau", "solver.lr"):
        if values[key] is not None and not values[key] > 0:
            fail(key, f"{key} must be positive, got {values[key]}")
    if values["solver.outer_iters"] < 0 or values["snapshot_every"] < 0:
        fail("solver.outer_iters" if values["solver.outer_iters"] < 0 else "snapshot_every", "must be nonnegative")
    if len(values["solver.lmc_schedule"]) != 3 or not all(v > 0 for v in values["solver.lmc_schedule"]):
        fail("solver.lmc_schedule", "needs three positive numbers a, b, c")
    if values["solver.step_rule"] not in ("adagrad", "plain"):
        fail("solver.step_rule", "must be 'adagrad' or 'plain'")
    if not 0.0 < values["target.split_fraction"] < 1.0:
        fail("target.split_fraction", "must lie in (0, 1)")
    if len(values["target.omega"]) != 2:
        fail("target.omega", "needs two numbers")
    bw = values["kernel.bandwidth"]
    if bw != MEDIAN and not bw > 0:
        fail("kernel.bandwidth", f"bandwidth must be positive or 'median', got {bw}")

    dim = values["target.dim"] if name in ("gaussian", "logistic") else 2
    if name == "logistic":
        dim = None  # known only after reading the dataset
    for key in ("target.mean", "init.mean"):
        if values[key] is not None and dim is not None and len(values[key]) != dim:
            fail(key, f"expected {dim} components")

    solver = SolverConfig(
        scheme=scheme,
        outer_iters=values["solver.outer_iters"],
        tau=values["solver.tau"],
        lr=values["solver.lr"],
        inner_max_iter=values["solver.inner_max_iter"],
        inner_tol=values["solver.inner_tol"],
        lmc_schedule=values["solver.lmc_schedule"],
        lmc_ascent_sign=values["solver.lmc_ascent_sign"],
        gfsf_ridge=values["solver.gfsf_ridge"],
        step_rule=values["solver.step_rule"],
        seed=values["seed"],
    )
    kernel = KernelConfig(bw, dim or 1, values["kernel.h_min"])
    return RunConfig(values, solver, kernel, source)


def parse_config(path) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_text(text, os.path.dirname(os.path.abspath(path)), str(path))
