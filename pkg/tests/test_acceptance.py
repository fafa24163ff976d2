"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The two benchmark
criteria replicate full sequential campaigns and dominate the runtime.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.integrate import quad

from icmse.criteria import (
    h_adjust,
    icmse_general,
    icmse_nocensor_training,
    imse_baseline,
    interval_score,
    mean_interval_score,
)
from icmse.designer import DesignConfig, DesignMethod, run_benchmark
from icmse.gpmodel import (
    Hyperparams,
    ModelMode,
    Observation,
    build_model,
    predict_censored,
    predict_standard,
)
from icmse.kernels import LengthscaleParams, g_exp_integral
from icmse.tmvn import MvnSpec, orthant_prob, trunc_moments

RESULTS = []


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    assert ok, line


def random_single_params(rng, p=1):
    return Hyperparams(
        mu=float(rng.uniform(-0.5, 0.5)),
        sigma2=float(rng.uniform(0.3, 2.0)),
        theta=LengthscaleParams(rng.uniform(0.15, 0.85, p)),
        sigma2_eps=float(rng.uniform(0.0, 0.1)),
    )


def random_censored_model(rng, p=1, n=None, n_cens=None, seed=0):
    n = n or int(rng.integers(5, 9))
    n_cens = n_cens or int(rng.integers(1, 3))
    if p == 1:
        params = random_single_params(rng, p)
        phys_obs = []
    else:
        params = Hyperparams(
            mu=float(rng.uniform(-0.5, 0.5)),
            sigma2=float(rng.uniform(0.5, 1.5)),
            theta=LengthscaleParams(rng.uniform(0.2, 0.8, p)),
            sigma2_eps=float(rng.uniform(0.01, 0.1)),
            sigma2_delta=float(rng.uniform(0.1, 0.5)),
            theta_delta=LengthscaleParams(rng.uniform(0.2, 0.8, p)),
        )
        Xc = rng.uniform(0, 1, (4, p))
        phys_obs = [
            Observation(x=x, value=float(np.cos(3 * x[0]) + x[-1]), fidelity="computer")
            for x in Xc
        ]
    X = rng.uniform(0, 1, (n, p))
    y = np.sin(4 * X[:, 0]) + 0.1 * rng.standard_normal(n)
    c = float(np.sort(y)[-n_cens] - 1e-9)
    obs = phys_obs + [
        Observation(x=x, value=c if v >= c else v, censored=bool(v >= c))
        for x, v in zip(X, y)
    ]
    return build_model(params, obs, censor_limit=c, seed=seed)


class TestAcceptance:
    def test_01_reduction_identity(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(101)
        worst = 0.0
        for trial in range(20):
            params = random_single_params(rng)
            n = int(rng.integers(3, 10))
            X = rng.uniform(0, 1, (n, 1))
            y = np.sin(4 * X[:, 0]) + 0.2 * rng.standard_normal(n)
            obs = [Observation(x=x, value=v) for x, v in zip(X, y)]
            m_std = build_model(params, obs, censor_limit=np.inf)
            m_cen = build_model(params, obs, censor_limit=np.inf,
                                mode=ModelMode.CENSORED_SINGLE)
            for x in rng.uniform(0, 1, (50, 1)):
                a = predict_standard(m_std, x)
                b = predict_censored(m_cen, x)
                worst = max(worst, abs(a.mean - b.mean), abs(a.var - b.var))
        elapsed = time.perf_counter() - t0
        report(1, worst <= 1e-10 and elapsed < 10.0,
               f"reduction identity max diff {worst:.2e} in {elapsed:.1f}s "
               f"(tol 1e-10, budget 10s)")

    def test_02_criterion_path_equivalence(self):
        t0 = time.perf_counter()
        worst = 0.0
        rng = np.random.default_rng(202)
        models = [random_censored_model(rng, p=1, seed=i) for i in range(10)]
        models += [random_censored_model(rng, p=2, seed=100 + i) for i in range(5)]
        for i, model in enumerate(models):
            for x in rng.uniform(0, 1, (10, model.p)):
                cf = icmse_general(model, x, seed=i, include_constant=True)
                qd = icmse_general(model, x, integration="quadrature", seed=i)
                rel = abs(cf.value - qd.value) / max(abs(cf.value), 1e-12)
                worst = max(worst, rel)
        elapsed = time.perf_counter() - t0
        report(2, worst <= 1e-6 and elapsed < 120.0,
               f"trace vs quadrature worst relative {worst:.2e} in {elapsed:.1f}s "
               f"(tol 1e-6, budget 120s)")

    def test_03_h_function(self):
        val0 = abs(h_adjust(0.0) - (0.5 + 1.0 / math.pi))
        grid = np.linspace(-10, 10, 1000)
        vals = np.array([h_adjust(z) for z in grid])
        monotone = bool(np.all(np.diff(vals) >= 0.0))
        ok = (val0 <= 1e-12 and h_adjust(6.0) >= 0.999 and h_adjust(-6.0) <= 1e-6
              and monotone)
        report(3, ok,
               f"h(0) err {val0:.1e} (tol 1e-12), h(6)={h_adjust(6.0):.6f} >= 0.999, "
               f"h(-6)={h_adjust(-6.0):.1e} <= 1e-6, monotone={monotone}")

    def test_04_icmse_imse_collapse(self):
        rng = np.random.default_rng(404)
        worst = 0.0
        params = random_single_params(rng)
        X = rng.uniform(0, 1, (6, 1))
        y = np.sin(4 * X[:, 0])
        obs = [Observation(x=x, value=v) for x, v in zip(X, y)]
        model = build_model(params, obs, censor_limit=np.inf)
        for x in rng.uniform(0, 1, (10, 1)):
            a = icmse_nocensor_training(model, x, np.inf)
            g = icmse_general(model, x, seed=4, include_constant=True)
            b = imse_baseline(model, x, variant="cen")
            worst = max(worst, abs(a.value - b.value), abs(g.value - b.value))
        report(4, worst <= 1e-8,
               f"ICMSE(c=inf) vs IMSE max diff {worst:.2e} (tol 1e-8)")

    def test_05_tmvn_correctness(self):
        t0 = time.perf_counter()
        worst_orthant = 0.0
        for r in np.linspace(-0.95, 0.95, 20):
            spec = MvnSpec(np.zeros(2), np.array([[1.0, r], [r, 1.0]]))
            expected = 0.25 + math.asin(r) / (2.0 * math.pi)
            worst_orthant = max(worst_orthant, abs(orthant_prob(spec, [0, 0]) - expected))
        worst_mean = 0.0
        worst_cov = 0.0
        for k in range(5):
            rng = np.random.default_rng(1000 + k)
            a = rng.standard_normal((3, 3))
            cov = a @ a.T + 3.0 * np.eye(3)
            cov /= np.mean(np.diag(cov))
            mean = 0.3 * rng.standard_normal(3)
            tm = trunc_moments(MvnSpec(mean, cov), mean, rng_seed=k)
            draws = rng.multivariate_normal(mean, cov, size=1_000_000)
            keep = draws[np.all(draws >= mean, axis=1)]
            worst_mean = max(worst_mean, float(np.max(np.abs(tm.mean - keep.mean(axis=0)))))
            worst_cov = max(worst_cov, float(np.max(np.abs(tm.cov - np.cov(keep.T)))))
        elapsed = time.perf_counter() - t0
        # third-decimal agreement, at the oracle's own Monte-Carlo resolution
        # (about 3e-3 for the means at these acceptance rates)
        ok = worst_orthant <= 1e-10 and worst_mean <= 5e-3 and worst_cov <= 8e-3 \
            and elapsed < 60.0
        report(5, ok,
               f"bivariate orthant err {worst_orthant:.1e} (tol 1e-10); d=3 moments vs "
               f"1e6-draw rejection: mean {worst_mean:.1e}, cov {worst_cov:.1e} in "
               f"{elapsed:.0f}s (budget 60s)")

    def test_06_g_integral(self):
        rng = np.random.default_rng(606)
        worst = 0.0
        for _ in range(100):
            a, b = rng.uniform(0, 40, 2)
            x, y = rng.uniform(-0.5, 1.5, 2)
            val = g_exp_integral(a, x, b, y)
            ref = quad(lambda z: np.exp(-a * (x - z) ** 2 - b * (y - z) ** 2),
                       0, 1, epsabs=1e-12, limit=200)[0]
            worst = max(worst, abs(val - ref))
            if g_exp_integral(a, x, b, y) != g_exp_integral(b, y, a, x):
                report(6, False, "symmetry violated")
        report(6, worst <= 1e-8,
               f"G vs adaptive quadrature max abs diff {worst:.2e} (tol 1e-8); "
               f"symmetric exactly on all 100 draws")

    def test_07_benchmark_1d(self):
        t0 = time.perf_counter()
        config = DesignConfig(p=1, n_ini=6, n_seq=20, c=0.55, bifidelity=True,
                              restarts=10, seed=7, fit_restarts=6)
        rows = run_benchmark(
            "1d-bi",
            [DesignMethod.ICMSE, DesignMethod.IMSE_IMPUTE, DesignMethod.SEQ_MAXPRO],
            20, config)
        elapsed = time.perf_counter() - t0

        def median_rmse(method, step):
            vals = [r["rmse"] for r in rows if r["method"] == method and r["step"] == step]
            return float(np.median(vals)) if vals else math.inf

        def censored_fraction(method):
            per_rep = [r["censored_count"] for r in rows
                       if r["method"] == method and r["step"] == max(
                           s["step"] for s in rows if s["method"] == method
                           and s["replication"] == r["replication"])]
            total_steps = sum(
                max(s["step"] for s in rows
                    if s["method"] == method and s["replication"] == rep)
                for rep in {r["replication"] for r in rows if r["method"] == method})
            return sum(per_rep) / max(total_steps, 1)

        icmse20 = median_rmse("icmse", 20)
        impute20 = median_rmse("imse_impute", 20)
        maxpro20 = median_rmse("seq_maxpro", 20)
        f_icmse = censored_fraction("icmse")
        f_maxpro = censored_fraction("seq_maxpro")
        ok = (icmse20 < impute20 and icmse20 < maxpro20 and f_icmse < f_maxpro
              and elapsed < 1800.0)
        report(7, ok,
               f"1D bi-fidelity, 20 reps: median RMSE@20 ICMSE={icmse20:.4f} < "
               f"IMSE-Impute={impute20:.4f} and < SeqMaxPro={maxpro20:.4f}; censored "
               f"fraction ICMSE={f_icmse:.2%} < SeqMaxPro={f_maxpro:.2%}; "
               f"{elapsed / 60:.1f} min (budget 30 min)")

    def test_08_benchmark_2d(self):
        t0 = time.perf_counter()
        config = DesignConfig(p=2, n_ini=12, n_seq=15, c=10.0, bifidelity=True,
                              restarts=10, seed=11, fit_restarts=6)
        rows = run_benchmark(
            "2d-bi",
            [DesignMethod.ICMSE, DesignMethod.IMSE_IMPUTE, DesignMethod.SEQ_MAXPRO],
            10, config)
        elapsed = time.perf_counter() - t0

        def median_rmse(method, step):
            vals = [r["rmse"] for r in rows if r["method"] == method and r["step"] == step]
            return float(np.median(vals)) if vals else math.inf

        i5, i15 = median_rmse("icmse", 5), median_rmse("icmse", 15)
        a5, a15 = median_rmse("imse_impute", 5), median_rmse("imse_impute", 15)
        m5, m15 = median_rmse("seq_maxpro", 5), median_rmse("seq_maxpro", 15)
        ok = (i5 <= min(a5, m5) and i15 <= min(a15, m15) and elapsed < 3600.0)
        # reported magnitudes are informational: the published single-study
        # values were 1.40 vs 1.62/1.74 at 5 runs and 1.21 vs 1.38/1.36 at 15
        report(8, ok,
               f"2D bi-fidelity, 10 reps: median RMSE@5 ICMSE={i5:.3f} vs "
               f"Impute={a5:.3f}/MaxPro={m5:.3f}; RMSE@15 ICMSE={i15:.3f} vs "
               f"Impute={a15:.3f}/MaxPro={m15:.3f}; {elapsed / 60:.1f} min "
               f"(budget 60 min)")

    def test_09_interval_score(self):
        ok = (
            interval_score(0.0, 1.0, 0.5, 0.32) == 1.0
            and abs(interval_score(0.0, 1.0, 1.5, 0.32) - 4.125) < 1e-12
            and interval_score(0.3, 0.3, 0.3, 0.32) == 0.0
        )
        rng = np.random.default_rng(909)
        means = rng.standard_normal(50)
        stds = rng.uniform(0.05, 1.0, 50)
        truths = means + rng.uniform(-2, 2, 50) * stds
        mis = mean_interval_score(means, stds, truths)
        degenerate = mean_interval_score(means, np.zeros(50), means)
        ok = ok and mis > 0.0 and degenerate == 0.0
        report(9, ok,
               f"interval-score examples exact; MIS={mis:.3f} > 0, degenerate-on-truth "
               f"MIS={degenerate}")

    def test_10_cli_determinism(self, tmp_path):
        args = [sys.executable, "-m", "icmse.cli", "simulate", "--problem", "1d-single",
                "--method", "icmse", "--n-ini", "4", "--n-seq", "2", "--reps", "2",
                "--seed", "7", "--restarts", "3", "--fit-restarts", "2", "--quiet"]
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        r1 = subprocess.run(args + ["--out", str(out1)], capture_output=True)
        r2 = subprocess.run(args + ["--out", str(out2)], capture_output=True)
        identical = (r1.returncode == 0 and r2.returncode == 0
                     and out1.read_bytes() == out2.read_bytes())
        report(10, identical,
               f"simulate CLI byte-identical across two runs: {identical}")
