"""End-to-end acceptance criteria, each reported as one PASS/FAIL line.

Monte Carlo criteria use fixed master seeds chosen before the first run;
floors marked "frozen" were pinned from that pilot and are regression guards.
"""

import functools
import math
import random
import time
import warnings

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from covstat.basis import basis_matrix
from covstat.bootstrap import (
    BootstrapConfig,
    block_partition,
    bootstrap_deltas,
    default_block_size,
    delta_g,
    multiplier_matrix,
    run_test,
)
from covstat.mc import McConfig, run_mc, schedule_lookup
from covstat.stats import (
    Grid,
    autocov,
    center,
    diff_matrix,
    jww_quadratic_forms,
    jww_reduce,
    rho2_diff,
    systematic_cov,
    white_noise_covariance,
)

import oracles

SIZE_SEED = 601
POWER_SEED = 701
DESK_BOOT = BootstrapConfig(M=200)


def criterion(n, title, limit):
    """Record PASS/FAIL plus runtime for criterion ``n``; ``limit`` is in seconds."""

    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kwargs):
            start = time.perf_counter()
            detail = ""
            try:
                detail = fn(*args, **kwargs) or ""
                elapsed = time.perf_counter() - start
                assert elapsed < limit, f"runtime {elapsed:.1f}s exceeds {limit}s"
            except BaseException as exc:
                elapsed = time.perf_counter() - start
                msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
                ACCEPTANCE_LINES[n] = f"FAIL  {n}. {title} ({elapsed:.1f}s): {msg}"
                raise
            ACCEPTANCE_LINES[n] = f"PASS  {n}. {title} ({elapsed:.1f}s) {detail}".rstrip()

        return inner

    return wrap


@criterion(1, "basis exactness", 5)
def test_c1_basis_exactness():
    for T in (64, 256):
        for kind, K in (("walsh", 16), ("haar", int(math.log2(T)))):
            B = basis_matrix(kind, K, T).entries.astype(np.int64)
            assert np.array_equal(B @ B.T, T * np.eye(K, dtype=np.int64)), (kind, T)
            assert not B.sum(axis=1).any(), (kind, T)
    rng = random.Random(1)
    dyadic = {2 ** m for m in range(5, 9)}
    Ts = rng.sample([T for T in range(17, 512) if T not in dyadic], 50)
    for T in Ts:
        W = basis_matrix("walsh", 16, T).entries
        assert np.all(np.abs(W.sum(axis=1)) <= np.arange(1, 17) + 1), T
        Kh = int(math.floor(math.log2(T)))
        H = basis_matrix("haar", Kh, T).entries
        assert np.all(np.abs(H.sum(axis=1)) <= 2 ** np.arange(1, Kh + 1)), T
    return "(T=64,256 exact; 50 non-dyadic T bounded)"


@criterion(2, "algebraic identities", 5)
def test_c2_identities():
    T = 128
    worst_lag0 = worst_rho = 0.0
    rng = np.random.default_rng(2)
    for kind in ("walsh", "haar"):
        g = schedule_lookup("case2", kind, T)
        B = basis_matrix(kind, g.max_counter, T)
        for _ in range(50):
            x = center(rng.standard_normal(T) * rng.uniform(0.1, 10))
            D = diff_matrix(x, g, B)
            g0 = autocov(x, 0)
            for k in range(1, g.max_counter + 1):
                b = B.row(k)
                g0k = systematic_cov(x, 0, b)
                lag0 = D.entries[0, k - 1] * g0 / math.sqrt(T) + g0
                worst_lag0 = max(worst_lag0, abs(lag0 - g0k) / abs(g0k))
                for h in range(g.max_lag + 1):
                    r1 = D.entries[h, k - 1] / math.sqrt(T)
                    r2 = rho2_diff(x, h, k, B)
                    gh, ghk = autocov(x, h), systematic_cov(x, h, b)
                    rhs = (g0k - g0) * (ghk - gh) / (g0 * g0k)
                    # the differences cancel to ~1e-6 in places, so scale by the
                    # correlations that enter the identity rather than by their gap
                    scale = max(abs(gh / g0), abs(ghk / g0), abs(ghk / g0k))
                    worst_rho = max(worst_rho, abs((r1 - r2) - rhs) / scale)
    assert worst_lag0 <= 1e-12, worst_lag0
    assert worst_rho <= 1e-12, worst_rho
    return f"(max rel err lag0={worst_lag0:.1e}, rho1-rho2={worst_rho:.1e})"


@criterion(3, "scale and sign invariance", 30)
def test_c3_scale_invariance():
    T = 128
    g = schedule_lookup("case1", "walsh", T)
    cfg = BootstrapConfig(M=200, seed=3)
    rng = np.random.default_rng(3)
    for i in range(20):
        x = rng.standard_normal(T)
        base = run_test(x, g, "walsh", "plain", cfg)
        for c in (-2, -0.5, 0.5, 3, 10):
            res = run_test(c * x, g, "walsh", "plain", cfg)
            assert res.p_value == base.p_value, (i, c)
            assert res.argmax == base.argmax, (i, c)
    return "(20 series x 5 scales)"


@criterion(4, "bootstrap degeneracy and conditional moments", 60)
def test_c4_bootstrap_moments():
    T = 128
    rng = np.random.default_rng(4)
    g = schedule_lookup("case1", "walsh", T)
    B = basis_matrix("walsh", g.max_counter, T)
    single = block_partition(T, T, allow_single_block=True)
    for _ in range(10):
        x = center(rng.standard_normal(T))
        xi = rng.standard_normal((5, 1))
        d = bootstrap_deltas(x, g, B, single, xi, centering="own")
        assert np.all(d[:, 0, :] == 0.0)
        for k in range(1, g.max_counter + 1):
            assert delta_g(x, 0, k, B, np.full(T, xi[0, 0]), centering="own") == 0.0
    x = center(rng.standard_normal(T))
    p = block_partition(T, default_block_size(T))
    draws = math.sqrt(T) * bootstrap_deltas(x, g, B, p, multiplier_matrix(p, 2000, 41))
    sd = draws.std(axis=0, ddof=1)
    assert np.all(np.abs(draws.mean(axis=0)) <= 4 * sd / math.sqrt(2000))
    big = bootstrap_deltas(x, g, B, p, multiplier_matrix(p, 10_000, 42))
    z = (big - big.mean(axis=0)) / big.std(axis=0)
    skew = np.abs((z ** 3).mean(axis=0)).max()
    kurt = np.abs((z ** 4).mean(axis=0) - 3).max()
    assert skew < 0.15, skew
    assert kurt < 0.3, kurt
    return f"(max |skew|={skew:.3f}, max |excess kurtosis|={kurt:.3f})"


@criterion(5, "schedule table reproduction", 1)
def test_c5_table():
    published = {
        ("case1", "walsh"): [(2, 4), (3, 5), (4, 6), (5, 8)],
        ("case2", "walsh"): [(14, 3), (20, 5), (30, 7), (42, 10)],
        ("case1", "haar"): [(2, 4), (3, 5), (4, 5), (5, 6)],
        ("case2", "haar"): [(14, 4), (20, 5), (30, 5), (42, 6)],
    }
    n = 0
    for (case, kind), cells in published.items():
        for T, (H, K) in zip((64, 128, 256, 512), cells):
            g = schedule_lookup(case, kind, T)
            assert g.max_lag == H and g.max_counter == K, (case, kind, T, g)
            n += 2
    assert n == 32
    return "(32/32 values)"


@criterion(6, "empirical size at desk scale", 600)
def test_c6_size():
    cfg = McConfig(models=(("null1", "gauss"), ("null2", "gauss")), Ts=(128,), case="case1",
                   reps=500, bootstrap=DESK_BOOT, seed=SIZE_SEED)
    rep = run_mc(cfg)
    f1 = rep.frequency("null1", T=128)
    f2 = rep.frequency("null2", T=128)
    detail = f"(5% size: null1={f1:.3f}, null2={f2:.3f}; band [0.02, 0.09])"
    assert 0.02 <= f1 <= 0.09 and 0.02 <= f2 <= 0.09, detail
    return detail


@pytest.fixture(scope="module")
def power_reports():
    case1 = run_mc(McConfig(models=("null1", "alt5", "alt8", "alt9"), Ts=(64, 512), case="case1",
                            reps=500, bootstrap=DESK_BOOT, seed=POWER_SEED))
    case2 = run_mc(McConfig(models=("alt9",), Ts=(512,), case="case2", reps=500,
                            bootstrap=DESK_BOOT, seed=POWER_SEED))
    return case1, case2


@criterion(7, "power properties at desk scale", 1800)
def test_c7_power(power_reports):
    case1, case2 = power_reports
    size512 = case1.frequency("null1", T=512)
    a64, a512 = case1.frequency("alt5", T=64), case1.frequency("alt5", T=512)
    alt8 = case1.frequency("alt8", T=512)
    lag8 = case1.cell("alt8", T=512).modal_lag(0.05)
    n1, n2 = case1.frequency("alt9", T=512), case2.frequency("alt9", T=512)
    detail = (f"(size512={size512:.3f}; alt5 {a64:.3f}->{a512:.3f}; alt8={alt8:.3f} modal h*={lag8}; "
              f"alt9 case1={n1:.3f} case2={n2:.3f})")
    # (a) power grows with T and clears three times the measured size
    assert a512 > a64 and a512 > 3 * size512, detail
    # (b) variance break: power and lag-zero localization
    assert alt8 > 3 * size512 and lag8 == 0, detail
    # (c) a lag-25 deviation needs a grid that reaches it
    assert n2 > n1, detail
    # frozen regression floors from the pilot run (pilot minus about five binomial sd)
    assert a64 >= 0.08 and a512 >= 0.98, detail
    assert alt8 >= 0.62, detail
    assert n2 >= 0.68 and n2 - n1 >= 0.5, detail
    return detail


@criterion(8, "comparison Wald statistic", 5)
def test_c8_jww():
    forms, _ = jww_quadratic_forms(np.zeros((6, 5)), 128, white_noise_covariance(1.0, 128))
    assert float(jww_reduce(forms)) == -2.0
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(200):
        A = rng.standard_normal((3, 3))
        G = A @ A.T + 0.05 * np.eye(3)
        d = rng.standard_normal((3, 1))
        T = int(rng.integers(16, 1024))
        forms, n_ridge = jww_quadratic_forms(d, T, lambda h, k: G[:h, :h])
        assert n_ridge == 0
        want = oracles.quad_form(d[:, 0], G, T)
        worst = max(worst, abs(forms[2, 0] - want) / abs(want))
    assert worst <= 1e-10, worst
    return f"(max rel err {worst:.1e})"


@criterion(9, "determinism across worker counts", 300)
def test_c9_determinism():
    cfg = McConfig(models=(("null1", "gauss"), ("null2", "garch"), ("alt5", "t5"), ("null4", "gauss")),
                   Ts=(64, 128), case="case1", bases=("walsh", "haar"), reps=40,
                   bootstrap=BootstrapConfig(M=100), variants=("plain", "weighted", "jww"), seed=9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        outputs = {w: run_mc(cfg, workers=w).to_tsv() for w in (1, 2, 8)}
    assert outputs[1] == outputs[2] == outputs[8]
    return f"({len(outputs[1].splitlines()) - 1} TSV rows identical under 1, 2, 8 workers)"
