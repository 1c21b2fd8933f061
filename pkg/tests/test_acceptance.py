"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 5-8 are Monte Carlo runs at the stated sizes and take a few seconds
each. Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import math
import time
from functools import lru_cache

import numpy as np
import pytest
import yaml
from scipy import integrate, stats

from mnic import cli, kernels
from mnic.genmodels import (
    GMMSpec,
    Region,
    norm_growth_experiment,
    region_classify,
    sample,
)
from mnic.interpolator import (
    FeatureState,
    InterpolatorState,
    fit_batch,
    online_fit,
    online_step,
    online_step_features,
    polyak_predictor,
)
from mnic.kernels import Dataset, KernelSpec
from mnic.linalg import dense_solve
from mnic.regret import build_report, estimate_generalization
from mnic.seeding import trial_rng
from mnic.separation import lemma5_monte_carlo, lemma6_prob, tsybakov_bound, tv_estimate_gmm

SEED = 20240601
GAUSS = KernelSpec.gaussian(1.0)


@lru_cache(maxsize=None)
def identity_streams():
    """200 Gaussian-kernel streams of length 30 (criterion 1)."""
    out = []
    for t in range(200):
        rng = trial_rng(SEED, 1, t)
        out.append(Dataset(rng.standard_normal((30, 4)), rng.choice([-1.0, 1.0], 30)))
    return tuple(out)


@lru_cache(maxsize=None)
def batch_instances():
    """100 instances per lambda with n <= 50 (criterion 2)."""
    out = []
    for lam in (0.0, 0.1, 10.0):
        for t in range(100):
            rng = trial_rng(SEED, 2, int(lam * 10), t)
            n = int(rng.integers(1, 51))
            data = Dataset(rng.standard_normal((n, 6)), rng.choice([-1.0, 1.0], n))
            out.append((lam, data))
    return tuple(out)


def test_criterion_01_incremental_identity(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for data in identity_streams():
        state = InterpolatorState(GAUSS, 0.0)
        prev = 0.0
        for i, (x, y) in enumerate(data):
            _, eps = online_step(state, x, y)
            # complexity of the prefix from a dense solve, independent of the factor
            K = kernels.gram(GAUSS, data.X[: i + 1])
            cur = float(data.y[: i + 1] @ dense_solve(K, data.y[: i + 1]))
            s_sq = state.step_log[-1].s_sq
            lhs, rhs = eps * eps, s_sq * (cur - prev)
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)))
            prev = cur
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 10
    verdict("1 incremental identity", ok, f"max scaled residual {worst:.2e}, {dt:.1f}s")
    assert ok


def test_criterion_02_online_equals_batch(verdict):
    t0 = time.perf_counter()
    worst = {0.0: 0.0, 0.1: 0.0, 10.0: 0.0}
    for lam, data in batch_instances():
        on = online_fit(GAUSS, lam, data)
        ba = fit_batch(GAUSS, lam, data)
        d = np.linalg.norm(on.dual - ba.dual) / np.linalg.norm(ba.dual)
        nrm = abs(on.norm_sq - ba.norm_sq) / abs(ba.norm_sq)
        worst[lam] = max(worst[lam], d, nrm)
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-8 and dt < 10
    detail = ", ".join(f"lam={k}: {v:.1e}" for k, v in worst.items())
    verdict("2 online equals batch", ok, f"{detail}, {dt:.1f}s")
    assert ok


def _explicit_qr(Phi):
    Q, R = np.linalg.qr(Phi)
    sgn = np.sign(np.diag(R))
    return Q * sgn, R * sgn[:, None]


def test_criterion_03_qr_equivalence_and_polyak(verdict):
    t0 = time.perf_counter()
    qr_err = 0.0
    pol_err = 0.0
    for t in range(20):
        rng = trial_rng(SEED, 3, t)
        n = int(rng.integers(2, 16))
        p = int(rng.integers(n, 21))
        Phi = rng.standard_normal((p, n))
        y = rng.choice([-1.0, 1.0], n)
        Q, R = _explicit_qr(Phi)
        z = np.linalg.solve(R.T, y)
        st = FeatureState(p)
        for k in range(n):
            online_step_features(st, Phi[:, k], y[k])
            ref = Q[:, : k + 1] @ z[: k + 1]
            qr_err = max(qr_err, np.max(np.abs(st.beta - ref)) / max(1.0, np.max(np.abs(ref))))

        # Polyak average against the explicit mean of prefix interpolants
        data = Dataset(rng.standard_normal((n, 3)), y)
        state = online_fit(GAUSS, 0.0, data)
        probes = rng.standard_normal((20, 3))
        avg = np.zeros(20)
        for k in range(1, n + 1):
            a = dense_solve(kernels.gram(GAUSS, data.X[:k]), data.y[:k])
            avg += a @ kernels.cross_gram(GAUSS, data.X[:k], probes)
        avg /= n
        got = polyak_predictor(state)(probes)
        pol_err = max(pol_err, np.max(np.abs(got - avg)) / max(1.0, np.max(np.abs(avg))))
    dt = time.perf_counter() - t0
    ok = qr_err <= 1e-8 and pol_err <= 1e-8 and dt < 5
    verdict("3 QR equivalence and Polyak dual", ok, f"qr {qr_err:.1e}, polyak {pol_err:.1e}, {dt:.1f}s")
    assert ok


def test_criterion_04_sandwich(verdict):
    t0 = time.perf_counter()
    failures = []
    count = 0
    streams = [(0.0, d) for d in identity_streams()] + list(batch_instances())
    for lam, data in streams:
        rep = build_report(online_fit(GAUSS, lam, data), data)
        count += 1
        if not rep.holds(1e-6):
            failures.append((count, rep.checks(1e-6)))
    model = GMMSpec(mu=2.0, psi=2.0)
    for t in range(50):
        data = sample(model, 100, trial_rng(SEED, 4, t))
        rep = build_report(online_fit(KernelSpec.linear(), 0.0, data), data)
        count += 1
        if not rep.holds(1e-6):
            failures.append((count, rep.checks(1e-6)))
    dt = time.perf_counter() - t0
    ok = not failures and dt < 30
    verdict("4 regret sandwich", ok, f"{count} instances, {len(failures)} violations, {dt:.1f}s")
    assert ok, failures[:5]


@lru_cache(maxsize=None)
def gmm_trace():
    t0 = time.perf_counter()
    trace = norm_growth_experiment(GMMSpec(mu=2.0, psi=2.0), [100, 200, 400], trials=20, seed=SEED)
    return trace, time.perf_counter() - t0


def test_criterion_05_gmm_norm_limit(verdict):
    trace, dt = gmm_trace()
    mean = trace.norm_sq_mean[-1]
    ok = mean <= 0.5 * 1.25 and trace.monotone and dt < 120
    verdict("5 GMM norm limit", ok,
            f"mean norm_sq(400) = {mean:.4f} +- {trace.norm_sq_se[-1]:.4f} <= 0.625, {dt:.1f}s")
    assert ok


def test_criterion_06_gmm_mistakes(verdict):
    trace, _ = gmm_trace()
    mean = trace.mistakes_mean[-1]
    ok = mean <= 4.5
    verdict("6 GMM mistake bound", ok, f"mean mistakes(400) = {mean:.2f} <= 4.5")
    assert ok


def test_criterion_07_generalization(verdict):
    t0 = time.perf_counter()
    est = estimate_generalization(GMMSpec(mu=2.0, psi=2.0), KernelSpec.linear(), 0.0, [200],
                                  trials=50, test_size=2000, seed=SEED)
    dt = time.perf_counter() - t0
    fin = bool(est.final_holds()[0])
    pol = bool(est.polyak_holds()[0])
    ok = fin and pol and dt < 180
    verdict("7 generalization bound", ok,
            f"final risk {est.est_final_risk[0]:.4f} vs bound {est.bound[0]:.4f}; "
            f"polyak risk {est.est_polyak_risk[0]:.4f} vs bound {est.polyak_bound[0]:.4f}; {dt:.1f}s")
    assert ok


def test_criterion_08_conditional_norm(verdict):
    t0 = time.perf_counter()
    model = GMMSpec(mu=1.0, d=300)
    X = sample(model, 100, trial_rng(SEED, 8)).X
    rep = lemma5_monte_carlo(model, X, 5.0, 200, seed=SEED)
    dt = time.perf_counter() - t0
    ok = rep.holds and dt < 60
    verdict("8 conditional norm bound", ok,
            f"mean {rep.mean_norm_sq:.4f} +- {rep.se:.1e} <= {rep.bound:.3f}, {dt:.1f}s")
    assert ok


def _tv_quad(mu, d):
    sd = 1.0 / math.sqrt(d)
    f = lambda t: abs(stats.norm.pdf(t, mu, sd) - stats.norm.pdf(t, -mu, sd))
    w = 12 * sd + mu
    return 0.5 * (integrate.quad(f, -w, 0, epsabs=1e-13)[0] + integrate.quad(f, 0, w, epsabs=1e-13)[0])


def test_criterion_09_separation_formulas(verdict):
    t0 = time.perf_counter()
    checks = [
        tsybakov_bound(1.0, 3.7) == 0.0,
        tsybakov_bound(0.0, 1.0) == 1.0,
        lemma6_prob(1.0, 50, 0.1) == 1.0,
    ]
    tv_err = max(abs(tv_estimate_gmm(mu, d) - _tv_quad(mu, d)) for mu, d in ((1, 4), (0.5, 16), (2, 1)))
    checks.append(tv_err <= 1e-6)
    dt = time.perf_counter() - t0
    ok = all(checks) and dt < 1
    verdict("9 separation formulas", ok, f"tv max error {tv_err:.1e}, {dt:.2f}s")
    assert ok


def test_criterion_10_region_classifier(verdict):
    t0 = time.perf_counter()
    examples = [
        region_classify(2.0, 1.5, 0.3) is Region.DECAYING_INTERPOLATION,
        region_classify(0.3, 2.0, 0.3, True) is Region.UNKNOWN,
        region_classify(1.2, 2.0, 0.3, True) is Region.DECAYING_INTERPOLATION,
    ]
    xs = np.linspace(0.02, 4.0, 50)
    ys = np.linspace(1.02, 5.0, 50)
    monotone = True
    for y in ys:
        ranks = [region_classify(x, y, 0.3, True).rank for x in xs]
        monotone &= all(b >= a for a, b in zip(ranks, ranks[1:]))
    dt = time.perf_counter() - t0
    ok = all(examples) and monotone and dt < 1
    verdict("10 region classifier", ok, f"examples {sum(examples)}/3, monotone {monotone}, {dt:.2f}s")
    assert ok


DETERMINISM_CONFIGS = [
    {"command": "fit", "kernel": {"kind": "gaussian", "bandwidth": 1.0},
     "data": {"X": [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]], "y": [1, -1, 1, -1]}},
    {"command": "online", "model": {"kind": "gmm", "mu": 2.0, "psi": 2.0}, "n": 40},
    {"command": "regret", "model": {"kind": "gmm", "mu": 2.0, "psi": 2.0}, "n": 40},
    {"command": "simulate-gmm", "model": {"kind": "gmm", "mu": 2.0, "psi": 2.0}, "n_grid": [10, 20], "trials": 3},
    {"command": "simulate-mixture", "model": {"kind": "mixture", "mu": 3.0, "p": 80, "alpha": 0.3},
     "n_grid": [10, 30], "trials": 2},
    {"command": "region-map", "region": {"alpha": 0.3}},
    {"command": "separation", "model": {"kind": "gmm", "mu": 1.0, "d": 60}, "n": 20, "separation": {"redraws": 30}},
    {"command": "sweep", "model": {"kind": "gmm", "mu": 2.0, "psi": 2.0}, "n_grid": [10], "trials": 3, "test_size": 100},
]


def test_criterion_11_cli_determinism(verdict, tmp_path):
    same = []
    for cfg in DETERMINISM_CONFIGS:
        cfg = {**cfg, "seed": SEED}
        path = tmp_path / f"{cfg['command']}.yaml"
        path.write_text(yaml.safe_dump(cfg))
        blobs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{cfg['command']}_{rep}"
            status = cli.main(["--config", str(path), "--out", str(out)])
            blobs.append((status, (out / f"{cfg['command']}.csv").read_bytes() if status == 0 else None))
        same.append(blobs[0][0] == 0 and blobs[0] == blobs[1])
    ok = all(same)
    verdict("11 CLI determinism", ok, f"{sum(same)}/{len(same)} commands byte-identical")
    assert ok
