"""Command-line entry point: ``parvi run | mmd | sample-reference``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import targets
from .config import RunConfig, parse_config
from .csvio import read_particles, write_metrics, write_particles, write_snapshots
from .diagnostics import mmd2
from .errors import ParviError
from .solvers import run

log = logging.getLogger("parvi")

RESOLVED_NAME = "config.resolved"


def _thread_limit():
    raw = os.environ.get("PARVI_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ParviError(f"PARVI_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ParviError("PARVI_THREADS must be >= 1")
    return n


def build_target(cfg: RunConfig):
    """Instantiate the configured target; returns ``(target, extras)``."""
    v = cfg.values
    name = v["target.name"]
    if name == "toy1":
        return targets.toy1(), {}
    if name == "toy2":
        return targets.toy2(), {}
    if name == "toy3":
        return targets.toy3(), {}
    if name == "gaussian":
        return targets.gaussian(v["target.dim"], v["target.mean"], v["target.scale"]), {}
    if name == "mixture":
        if v["target.data_path"]:
            obs = np.loadtxt(v["target.data_path"], delimiter=",", ndmin=1)
            data = targets.MixtureData(obs, v["target.sigma"])
        else:
            data = targets.generate_mixture_data(v["target.n_obs"], v["target.omega"],
                                                 v["target.sigma"], v["target.data_seed"])
        return targets.mixture_posterior(data), {}
    train, test = targets.load_csv_dataset(v["target.data_path"], v["target.label_column"],
                                           v["target.standardize"], v["target.split_fraction"],
                                           v["target.split_seed"])
    return targets.logistic_posterior(train, v["target.alpha"], v["target.batch_size"]), {"test": test}


def cmd_run(config_path) -> int:
    cfg = parse_config(config_path)
    target, extras = build_target(cfg)
    kernel = replace(cfg.kernel, dim=target.dim)
    if cfg["init.mean"] is not None and len(cfg["init.mean"]) != target.dim:
        raise ParviError(f"init.mean has {len(cfg['init.mean'])} components, target dimension is {target.dim}")
    init_seed = np.random.SeedSequence([cfg["seed"], 1])
    init = targets.sample_gaussian_init(cfg["n_particles"], target.dim, cfg["init.mean"],
                                        cfg["init.scale"], init_seed)
    reference = read_particles(cfg["mmd_reference"]) if cfg["mmd_reference"] else None
    if reference is not None and reference.shape[1] != target.dim:
        raise ParviError("mmd_reference dimension does not match the target")

    result = run(target, init, cfg.solver, kernel, reference=reference,
                 snapshot_every=cfg["snapshot_every"])

    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    write_snapshots(os.path.join(out, "snapshots.csv"), result.snapshots, target.dim)
    write_metrics(os.path.join(out, "metrics.csv"), result.metrics, cfg["metrics.wall_time"])
    with open(os.path.join(out, RESOLVED_NAME), "w", encoding="utf-8") as fh:
        fh.write(cfg.render())
    last = result.metrics[-1]
    print(f"finished {cfg.solver.outer_iters} iterations: energy {last.energy:.6g}, grad norm {last.grad_norm:.3g}")
    if "test" in extras:
        test = extras["test"]
        p = np.mean([targets.predict_proba(w, test.features) for w in result.particles], axis=0)
        acc = float(np.mean(np.where(p > 0.5, 1.0, -1.0) == test.labels))
        print(f"test accuracy {acc:.4f}")
    return 0


def format_mmd(value: float) -> str:
    return "0.000000" if value == 0.0 else f"{value:.6g}"


def cmd_mmd(particles_path, reference_path) -> int:
    x = read_particles(particles_path)
    y = read_particles(reference_path)
    print(format_mmd(mmd2(x, y)))
    return 0


REFERENCE_TARGETS = ("toy1", "toy2", "toy3", "gaussian")


def cmd_sample_reference(target_name, n, seed, out_path, dim=2) -> int:
    if target_name not in REFERENCE_TARGETS:
        raise ParviError(f"no reference sampler for {target_name!r}; choose from {list(REFERENCE_TARGETS)}")
    if n < 0:
        raise ParviError("n must be nonnegative")
    target = targets.gaussian(dim) if target_name == "gaussian" else getattr(targets, target_name)()
    x = targets.sample_reference(target, n, seed)
    write_particles(out_path, x.reshape(n, target.dim))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parvi", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a solver from a config file")
    p.add_argument("--config", required=True)

    p = sub.add_parser("mmd", help="squared MMD between two particle CSVs")
    p.add_argument("--particles", required=True)
    p.add_argument("--reference", required=True)

    p = sub.add_parser("sample-reference", help="draw direct samples from a built-in target")
    p.add_argument("--target", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=2, help="dimension of the gaussian target")
    return parser


def _dispatch(args) -> int:
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "mmd":
        return cmd_mmd(args.particles, args.reference)
    return cmd_sample_reference(args.target, args.n, args.seed, args.out, args.dim)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = _thread_limit()
        if threads is None:
            return _dispatch(args)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=threads):
            return _dispatch(args)
    except (ParviError, ValueError, OSError) as exc:
        print(f"parvi: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
