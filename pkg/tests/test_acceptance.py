"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line (also collected in the terminal summary)
and then asserts. Criterion 10 needs the real datasets; point
``LEWIS_CORESET_DATA`` at a directory holding them to enable it.
"""

import itertools
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from lewis_coreset.bench import ExperimentConfig, run_experiment
from lewis_coreset.cli import main
from lewis_coreset.coreset import coreset_error, derive_seed, draw_coreset
from lewis_coreset.data import gen_index_instance, gen_synthetic
from lewis_coreset.linalg import leverage_scores, numerical_rank
from lewis_coreset.losses import (
    HINGE,
    LOGISTIC,
    NO_REG,
    RELU,
    Regularizer,
    estimate_mu,
    loss_gradient,
    total_loss,
    weighted_loss,
)
from lewis_coreset.weights import LewisConfig, lewis_defect, lewis_weights, sampling_probabilities

HIGH_MU = "synthetic:n=10000,d=10,skew=3,seed=0,flip=0.05"
FLAT = "synthetic:n=10000,d=10,skew=0,seed=0,flip=0.1"
DEFAULT_GRID = [500, 1000, 2000, 4000, 8000]


def _unit(k, d, rng):
    B = rng.standard_normal((k, d))
    return B / np.linalg.norm(B, axis=1, keepdims=True)


def test_c01_lewis_fixed_point(verdict):
    t0 = time.perf_counter()
    worst_res, worst_sum = 0.0, 0.0
    for seed in range(50):
        X = np.random.default_rng(seed).standard_normal((2000, 20))
        res = lewis_weights(X, LewisConfig(max_iters=20, tol=1e-15))
        worst_res = max(worst_res, lewis_defect(X, res.weights.values))
        worst_sum = max(worst_sum, abs(res.weights.values.sum() - 20))
    elapsed = time.perf_counter() - t0
    ok = worst_res < 1e-5 and worst_sum <= 0.002 and elapsed < 30
    verdict("C1 Lewis fixed point", ok,
            f"max defect {worst_res:.2e} (<1e-5), max |sum-20| {worst_sum:.2e} (<=2e-3), {elapsed:.1f}s (<30s)")
    assert ok


def test_c02_structured_exactness(verdict):
    errs = []
    for d in (1, 2, 5, 10):
        eye = np.eye(d)
        errs.append(np.max(np.abs(lewis_weights(eye).weights.values - 1.0)))
        errs.append(np.max(np.abs(lewis_weights(np.vstack([eye, eye])).weights.values - 0.5)))
    rng = np.random.default_rng(0)
    for n, d, r in ((30, 5, 5), (40, 6, 3), (8, 8, 8)):
        X = rng.standard_normal((n, r)) @ rng.standard_normal((r, d))
        errs.append(abs(leverage_scores(X).sum() - numerical_rank(X)))
    worst = float(max(errs))
    ok = worst <= 1e-9
    verdict("C2 structured exactness", ok, f"max error {worst:.1e} (<=1e-9)")
    assert ok


def test_c03_index_loss_gap(verdict):
    t0 = time.perf_counter()
    worst, cases = 0.0, 0
    for n0, kappa in itertools.product((4, 8), (0.25, 0.5)):
        for a in itertools.product((0, 1), repeat=n0):
            inst = gen_index_instance(n0, kappa, a, 1)
            reg = Regularizer("l2sq", inst.reg_scale)
            base = inst.n_kappa * inst.d * (inst.d + 1) ** 2
            for b in range(1, n0 + 1):
                got = total_loss(inst.Z, inst.probe(b), HINGE, reg)
                want = 2 * base if a[b - 1] else base
                worst = max(worst, abs(got - want) / want)
                cases += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10
    verdict("C3 INDEX loss gap", ok, f"{cases} cases, max rel error {worst:.1e} (<=1e-9), {elapsed:.1f}s (<10s)")
    assert ok


def _relu_normalized_errors(Z, p_by_m, betas, seeds):
    out = {}
    for m, p in p_by_m.items():
        vals = []
        for s in seeds:
            err = coreset_error(draw_coreset(p, m, derive_seed(s, "relu", m)), Z, RELU, betas)
            vals.append(err.additive / err.l1_norms)
        out[m] = np.concatenate(vals)
    return out


def test_c04_relu_additive(verdict):
    t0 = time.perf_counter()
    Z = gen_synthetic(10_000, 10, skew=3, seed=0).Z
    w = lewis_weights(Z).weights
    betas = _unit(200, 10, np.random.default_rng(4))
    p_by_m = {m: sampling_probabilities(w, m) for m in (1000, 4000)}
    errs = _relu_normalized_errors(Z, p_by_m, betas, range(50))
    q1000 = float(np.percentile(errs[1000], 95))
    q4000 = float(np.percentile(errs[4000], 95))
    elapsed = time.perf_counter() - t0
    ok = q4000 < 0.1 and q1000 / q4000 >= 1.5 and elapsed < 300
    verdict("C4 ReLU additive error", ok,
            f"p95 at m=4000 {q4000:.4f} (<0.1), shrink 1000->4000 {q1000 / q4000:.2f}x (>=1.5), {elapsed:.0f}s (<300s)")
    assert ok


@pytest.mark.slow
def test_c05_method_ordering(verdict):
    t0 = time.perf_counter()
    details, ok = [], True
    mu_hat = None
    for loss in ("logistic", "hinge"):
        rep = run_experiment(ExperimentConfig(dataset=HIGH_MU, loss=loss, reg="none", methods=["lewis", "uniform"],
                                              sizes=DEFAULT_GRID, trials=100, seed=0))
        mu_hat = rep.mu_hat
        for m in DEFAULT_GRID:
            lw, un = rep.cell("lewis", m).p50, rep.cell("uniform", m).p50
            ok &= lw < un
            details.append(f"{loss} m={m}: {lw:.2e}<{un:.2e}")
    ok &= mu_hat >= 10
    for loss in ("logistic", "hinge"):
        rep = run_experiment(ExperimentConfig(dataset=FLAT, loss=loss, reg="l2sq:0.5", methods=["lewis", "uniform"],
                                              sizes=[DEFAULT_GRID[0]], trials=100, seed=0))
        lw, un = rep.cell("lewis", 500).p50, rep.cell("uniform", 500).p50
        ok &= un <= 2 * lw
        details.append(f"flat+l2sq {loss} m=500: uniform {un:.2e} <= 2x lewis {lw:.2e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1200
    verdict("C5 method ordering", ok, f"mu_hat {mu_hat:.1f} (>=10); " + "; ".join(details) + f"; {elapsed:.0f}s (<1200s)")
    assert ok


def test_c06_unbiasedness(verdict):
    Z = gen_synthetic(500, 5, skew=2, seed=1).Z
    beta = np.array([0.4, -0.3, 0.2, 0.1, -0.5])
    p = sampling_probabilities(lewis_weights(Z).weights, 50)
    est = np.array([weighted_loss(draw_coreset(p, 50, derive_seed(s, "unbiased")), Z, beta, LOGISTIC)
                    for s in range(1000)])
    se = est.std(ddof=1) / math.sqrt(est.size)
    gap = abs(est.mean() - total_loss(Z, beta, LOGISTIC))
    ok = gap < 4 * se
    verdict("C6 unbiasedness", ok, f"|mean - L| = {gap:.3g}, 4 SE = {4 * se:.3g}")
    assert ok


def _mu_grid(Z, points=100_000):
    th = np.linspace(0, 2 * np.pi, points, endpoint=False)
    ZB = Z @ np.stack([np.cos(th), np.sin(th)])
    return float(np.max(np.maximum(ZB, 0).sum(axis=0) / np.maximum(-ZB, 0).sum(axis=0)))


def test_c07_mu_oracle(verdict):
    worst = 0.0
    for k in range(20):
        rng = np.random.default_rng(100 + k)
        n = int(rng.integers(30, 300))
        Z = rng.standard_normal((n, 2)) * rng.lognormal(0, 1, (n, 1)) + rng.uniform(0, 1) * rng.standard_normal(2)
        oracle = _mu_grid(Z)
        est = estimate_mu(Z, budget=10_000, seed=k).mu
        worst = max(worst, abs(est - oracle) / oracle)
    d1a = estimate_mu(np.array([[1.0], [-1.0]]), budget=10_000).mu
    d1b = estimate_mu(np.array([[2.0], [-1.0]]), budget=10_000).mu
    ok = worst <= 0.02 and d1a == 1.0 and d1b == 2.0
    verdict("C7 mu oracle", ok, f"max rel gap to angle grid {worst:.2e} (<=0.02), d=1 cases {d1a:g}, {d1b:g}")
    assert ok


def test_c08_gradient(verdict):
    rng = np.random.default_rng(8)
    Z = rng.standard_normal((60, 6)) * rng.lognormal(0, 0.5, (60, 1))
    regs = [NO_REG, Regularizer("l2sq", 0.5), Regularizer("l2", 1.0), Regularizer("l1", 0.7)]
    worst = 0.0
    h = 1e-6
    for reg in regs:
        for _ in range(100):
            beta = rng.standard_normal(6)
            g = loss_gradient(Z, beta, LOGISTIC, reg)
            fd = np.array([(total_loss(Z, beta + h * e, LOGISTIC, reg) - total_loss(Z, beta - h * e, LOGISTIC, reg)) / (2 * h)
                           for e in np.eye(6)])
            worst = max(worst, float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12)))
    ok = worst <= 1e-4
    verdict("C8 gradient correctness", ok, f"max relative deviation {worst:.1e} (<=1e-4) over 400 points")
    assert ok


def test_c09_determinism(verdict, tmp_path):
    args = ["bench", "--dataset", "synthetic:n=2000,d=5,skew=2,seed=3,flip=0.05", "--loss", "hinge",
            "--methods", "lewis,l2s,uniform", "--sizes", "100,200", "--trials", "5", "--format", "csv,json"]
    codes = [main(args + ["--out", str(tmp_path / run)]) for run in ("a", "b")]
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if not p.name.endswith(".timings.json"))
    same = all((tmp_path / "a" / nm).read_bytes() == (tmp_path / "b" / nm).read_bytes() for nm in names)
    ok = codes == [0, 0] and same and len(names) == 2
    verdict("C9 determinism", ok, f"exit codes {codes}, {len(names)} files byte-identical: {same}")
    assert ok


def _real_datasets():
    root = os.environ.get("LEWIS_CORESET_DATA")
    if not root:
        return None
    found = {}
    for stem in ("webspam", "covtype", "kddcup"):
        hits = sorted(p for p in Path(root).iterdir() if p.name.lower().startswith(stem))
        if hits:
            found[stem] = hits[0]
    return found if "kddcup" in found else None


def test_c10_real_datasets(verdict):
    found = _real_datasets()
    if not found:
        verdict("C10 real datasets", None, "set LEWIS_CORESET_DATA to a directory with kddcup*/covtype*/webspam* files")
        pytest.skip("real datasets not available")
    ok = True
    details = []
    for stem, path in found.items():
        for loss in ("logistic", "hinge"):
            rep = run_experiment(ExperimentConfig(dataset=str(path), loss=loss, trials=100))
            if stem == "kddcup":
                for m in DEFAULT_GRID:
                    best = min(("lewis", "l2s", "uniform"), key=lambda meth: rep.cell(meth, m).p50)
                    ok &= best == "lewis"
                    details.append(f"kddcup {loss} m={m}: best {best}")
    verdict("C10 real datasets", ok, "; ".join(details))
    assert ok
