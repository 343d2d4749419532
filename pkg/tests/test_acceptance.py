"""End-to-end acceptance checks.

Each criterion prints one ``PASS``/``FAIL`` line. Run standalone with
``python3 tests/test_acceptance.py`` for a compact summary, or through pytest.
"""
import os
import subprocess
import sys
import tempfile
import time

import numpy as np
import pytest

from parvi import targets as T
from parvi.diagnostics import find_modes, mmd2
from parvi.energy import discrete_energy, discrete_energy_grad
from parvi.kernels import KernelConfig
from parvi.solvers import SolverConfig, evi_im_step, parvi_velocity, RunState, run


def central_diff(fn, x, step=1e-6):
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = step
        grad[idx] = (fn(x + e) - fn(x - e)) / (2 * step)
    return grad


def c1_gradient_oracle():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(20):
        dim = int(rng.integers(1, 4))
        target = T.gaussian(dim) if dim != 2 else [T.toy1(), T.toy2(), T.toy3()][int(rng.integers(3))]
        n = int(rng.integers(1, 11))
        h = float(rng.uniform(0.3, 2.0))
        x = rng.normal(size=(n, dim))
        fd = central_diff(lambda y: discrete_energy(y, h, target), x)
        an = discrete_energy_grad(x, h, target)
        worst = max(worst, np.linalg.norm(an - fd) / np.linalg.norm(fd))
    return worst <= 1e-6, f"max relative error {worst:.2e} (tol 1e-6)"


def c2_energy_decrease():
    x0 = T.sample_gaussian_init(50, 2, seed=0)
    res = run(T.toy1(), x0, SolverConfig("evi_im", outer_iters=200, tau=0.01), KernelConfig.fixed(0.05, 2))
    e = res.energies
    monotone = bool(np.all(np.diff(e) <= 0))
    worst = -np.inf
    converged = 0
    for k, rep in enumerate(res.inner_reports):
        if not rep.converged:
            continue
        converged += 1
        step_sq = rep.step_sq_norm
        excess = (e[k + 1] - e[k]) + step_sq / (2 * 0.01 * 50)
        worst = max(worst, excess / (1 + abs(e[k])))
    ok = monotone and worst <= 1e-10
    return ok, f"F_h non-increasing: {monotone}; inequality excess {worst:.2e} (tol 1e-10) on {converged}/200 converged iterations"


def c3_closed_form():
    cfg = SolverConfig("evi_im", outer_iters=1, tau=1.0)
    out, _ = evi_im_step(RunState.initial(np.array([[2.0]])), cfg, 1.0, T.gaussian(1))
    x = float(out.particles[0, 0])
    return abs(x - 1.0) <= 1e-8, f"x1 = {x:.12f} (expected 1 +- 1e-8)"


def c4_single_particle():
    rng = np.random.default_rng(4)
    ok = True
    for _ in range(10):
        target = [T.toy1(), T.toy2(), T.toy3()][int(rng.integers(3))]
        x = rng.normal(size=(1, 2))
        h = float(rng.uniform(0.05, 2.0))
        gv = target.grad_v(x)
        for scheme in ("blob", "gfsf", "gfsd"):
            ok &= bool(np.array_equal(parvi_velocity(scheme, x, h, target), -gv))
        ok &= bool(np.array_equal(parvi_velocity("svgd", x, h, target), -(2 * np.pi * h) ** -1.0 * gv))
    return ok, "exact equality on 10 draws" if ok else "mismatch"


def c5_brute_force():
    rng = np.random.default_rng(5)
    worst_blob = worst_mmd = 0.0
    for _ in range(10):
        n = int(rng.integers(1, 6))
        x = rng.normal(size=(n, 2))
        v = parvi_velocity("blob", x, 0.8, T.toy3())
        worst_blob = max(worst_blob, np.max(np.abs(v + n * discrete_energy_grad(x, 0.8, T.toy3()))))
        xs, ys = rng.normal(size=(n, 2)), rng.normal(size=(int(rng.integers(1, 6)), 2))
        k = lambda a, b: (a @ b / 3 + 1) ** 3
        naive = (sum(k(a, b) for a in xs for b in xs) / len(xs) ** 2 + sum(k(a, b) for a in ys for b in ys) / len(ys) ** 2
                 - 2 * sum(k(a, b) for a in xs for b in ys) / (len(xs) * len(ys)))
        worst_mmd = max(worst_mmd, abs(mmd2(xs, ys) - naive))
    ok = worst_blob <= 1e-12 and worst_mmd <= 1e-12
    return ok, f"blob max abs diff {worst_blob:.1e}, mmd2 max abs diff {worst_mmd:.1e} (tol 1e-12)"


def c6_mixture_modes():
    data = T.generate_mixture_data(1000, (1.0, -2.0), 2.5, seed=0)
    target = T.mixture_posterior(data)
    x0 = T.sample_gaussian_init(100, 2, seed=1)
    res = run(target, x0, SolverConfig("evi_im", outer_iters=100, tau=0.01), KernelConfig.fixed(0.1, 2))
    modes = find_modes(res.particles, 0.3)
    if len(modes) < 2:
        return False, f"found {len(modes)} mode(s)"
    top = modes[:2]
    d1 = min(np.linalg.norm(m - [1.0, -2.0]) for m in top)
    d2 = min(np.linalg.norm(m - [-1.0, 2.0]) for m in top)
    found = ", ".join(f"({m[0]:.2f}, {m[1]:.2f})" for m in top)
    return len(modes) == 2 and max(d1, d2) <= 0.3, (
        f"{len(modes)} modes [{found}]; distances {d1:.2f}, {d2:.2f} (tol 0.3)")


def c7_gaussian_fidelity():
    target = T.gaussian(2)
    x0 = T.sample_gaussian_init(200, 2, seed=1)
    res = run(target, x0, SolverConfig("evi_im", outer_iters=20, tau=0.5), KernelConfig.fixed(0.1, 2))
    ref = T.sample_reference(target, 5000, seed=99)
    final = mmd2(res.particles, ref)
    base = np.median([mmd2(T.sample_reference(target, 200, seed=1000 + 2 * k),
                           T.sample_reference(target, 200, seed=1001 + 2 * k)) for k in range(11)])
    return final <= 3 * base, f"MMD^2 {final:.4f} vs 3 x baseline {3 * base:.4f}"


def c8_toy3_curve():
    x0 = T.sample_gaussian_init(120, 2, seed=0)
    res = run(T.toy3(), x0, SolverConfig("evi_im", outer_iters=300, tau=0.01), KernelConfig.fixed(0.2, 2))
    x = res.particles
    score = float(np.mean((x[:, 1] - np.sin(np.pi * x[:, 0] / 2)) ** 2))
    return score <= 0.32, f"mean squared curve residual {score:.3f} (tol 0.32)"


def c9_energy_traces():
    x0 = T.sample_gaussian_init(50, 2, seed=0)
    kernel = KernelConfig.fixed(0.05, 2)
    evi = run(T.toy1(), x0, SolverConfig("evi_im", outer_iters=20, tau=0.01), kernel).energies
    blob = run(T.toy1(), x0, SolverConfig("blob", outer_iters=1000, lr=0.05), kernel).energies
    mono = bool(np.all(np.diff(evi[10:]) <= 0) and np.all(np.diff(blob[10:]) <= 0))
    ok = evi[20] <= blob[1000] + 0.05 and mono
    return ok, f"EVI-Im F(20) {evi[20]:.4f} vs Blob F(1000) {blob[1000]:.4f} + 0.05; traces non-increasing after 10: {mono}"


def c10_logistic():
    w_true = np.random.default_rng(123).normal(size=5) * 1.5
    data = T.make_logistic_dataset(2000, w_true, seed=0)
    train, test = T.split_dataset(data, 0.8, seed=0)
    oracle = float(np.mean(np.where(test.features @ w_true > 0, 1.0, -1.0) == test.labels))
    train_s, test_s = T.standardize(train, test)
    target = T.logistic_posterior(train_s, 1.0)
    x0 = T.sample_gaussian_init(20, 5, seed=1)
    res = run(target, x0, SolverConfig("evi_im", outer_iters=50, tau=0.01), KernelConfig.fixed(1.0, 5))
    p = np.mean([T.predict_proba(w, test_s.features) for w in res.particles], axis=0)
    acc = float(np.mean(np.where(p > 0.5, 1.0, -1.0) == test_s.labels))
    return abs(acc - oracle) <= 0.02, f"test accuracy {acc:.4f} vs oracle {oracle:.4f} (tol 0.02)"


DETERMINISM_CONFIGS = {
    "evi_im": "target.name = toy2\nsolver.scheme = evi_im\nsolver.tau = 0.01\nkernel.bandwidth = median\n",
    "svgd": "target.name = toy3\nsolver.scheme = svgd\nsolver.lr = 0.05\nkernel.bandwidth = 0.2\n",
    "lmc": "target.name = gaussian\nsolver.scheme = lmc\nkernel.bandwidth = 0.5\nmmd_reference = ref.csv\n",
}


def c11_determinism():
    env = dict(os.environ, PARVI_THREADS="1")
    same = {}
    with tempfile.TemporaryDirectory() as tmp:
        T_ref = T.sample_reference(T.gaussian(2), 300, seed=0)
        from parvi.csvio import write_particles

        write_particles(os.path.join(tmp, "ref.csv"), T_ref)
        for name, body in DETERMINISM_CONFIGS.items():
            outputs = []
            for rep in range(2):
                path = os.path.join(tmp, f"{name}.cfg")
                with open(path, "w") as fh:
                    fh.write(body + f"solver.outer_iters = 15\nn_particles = 30\nseed = 11\noutput_dir = {name}_{rep}\n")
                subprocess.run([sys.executable, "-m", "parvi", "run", "--config", path], env=env, check=True,
                               capture_output=True)
                outputs.append([open(os.path.join(tmp, f"{name}_{rep}", f), "rb").read()
                                for f in ("metrics.csv", "snapshots.csv")])
            same[name] = outputs[0] == outputs[1]
    return all(same.values()), ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in same.items())


CRITERIA = [
    ("C1 gradient oracle", c1_gradient_oracle),
    ("C2 per-iteration energy decrease", c2_energy_decrease),
    ("C3 closed-form proximal step", c3_closed_form),
    ("C4 single-particle reductions", c4_single_particle),
    ("C5 brute-force equivalence", c5_brute_force),
    ("C6 mixture posterior modes", c6_mixture_modes),
    ("C7 Gaussian fidelity", c7_gaussian_fidelity),
    ("C8 toy3 curve adherence", c8_toy3_curve),
    ("C9 energy-trace comparison", c9_energy_traces),
    ("C10 synthetic logistic regression", c10_logistic),
    ("C11 determinism", c11_determinism),
]


def evaluate(name, check):
    start = time.perf_counter()
    ok, detail = check()
    elapsed = time.perf_counter() - start
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail} [{elapsed:.1f}s]"
    return ok, line


@pytest.mark.slow
@pytest.mark.parametrize("name, check", CRITERIA, ids=[c[0].split()[0] for c in CRITERIA])
def test_criterion(name, check, capsys):
    ok, line = evaluate(name, check)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(name, check) for name, check in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
