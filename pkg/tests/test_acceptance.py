"""Acceptance criteria, each at its stated tolerance.

Every test records a single PASS/FAIL line; the lines are repeated in the
``acceptance criteria`` section of the pytest terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy import stats

from pathdoob.azema_yor import AlphaConfig, closed_form_norms, mu_cdf, simulate_many
from pathdoob.cli import main
from pathdoob.path_core import Path, identity_tolerance, summation_by_parts
from pathdoob.pathwise_ineq import check_path_l1, check_path_l2, check_path_lp, eval_g
from pathdoob.pathwise_integral import (
    SampledFunction,
    check_cont_path_lp,
    integration_by_parts_discrete,
)
from pathdoob.testing import random_nonnegative_path, random_real_path, random_tree
from pathdoob.verification import (
    ALL_SUITES,
    psi,
    psi_invert,
    run_suites,
    verify_doob_lp,
    verify_quallp,
    verify_strong_doob,
)

pytestmark = pytest.mark.acceptance

FUZZ_PS = (1.1, 1.5, 2.0, 3.0, 10.0)


def test_criterion_1_pathwise_fuzz(record):
    rng = np.random.default_rng(1)
    paths = [random_nonnegative_path(rng, max_len=200) for _ in range(100_000)]
    failures = []
    t0 = time.perf_counter()
    for i, s in enumerate(paths):
        for p in FUZZ_PS:
            if not check_path_lp(s, p).holds:
                failures.append((i, p))
        if not check_path_l2(s).holds:
            failures.append((i, "l2"))
        if not check_path_l1(s).holds:
            failures.append((i, "l1"))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed <= 60.0
    record(1, ok, f"{len(paths)} paths x (lp at {FUZZ_PS}, l2, l1): {len(failures)} failures, {elapsed:.1f}s (limit 60s)")
    assert ok, failures[:5]


def _random_piecewise_h(rng):
    """A random step-plus-linear function; discontinuous at up to 5 cut points."""
    cuts = np.sort(rng.normal(0, 5, int(rng.integers(1, 6))))
    levels = rng.normal(0, 3, cuts.size + 1)
    slope = rng.normal()
    return lambda x: levels[np.searchsorted(cuts, x)] + slope * x


def test_criterion_2_identities(record):
    rng = np.random.default_rng(2)
    worst_sbp = worst_ibp = 0.0
    for _ in range(10_000):
        path = Path(random_real_path(rng))
        h = _random_piecewise_h(rng)
        lhs, rhs = summation_by_parts(path, h)
        tol = identity_tolerance(path, h(path.running_max))
        worst_sbp = max(worst_sbp, abs(lhs - rhs) / tol)
    for _ in range(10_000):
        n = int(rng.integers(2, 200))
        t = np.concatenate(([0.0], np.cumsum(rng.random(n - 1) + 1e-3)))
        g = SampledFunction(t, rng.normal(0, 3, n))
        f = SampledFunction(t, rng.normal(0, 3, n))
        part = np.unique(np.concatenate(([0, n - 1], rng.integers(0, n, int(rng.integers(0, n))))))
        lhs, rhs = integration_by_parts_discrete(g, f, part)
        hv = g.values[part]
        tol = identity_tolerance(Path(f.values[part]), hv)
        worst_ibp = max(worst_ibp, abs(lhs - rhs) / tol)
    ok = worst_sbp <= 1.0 and worst_ibp <= 1.0
    record(2, ok, f"1e4 + 1e4 instances, worst |lhs-rhs|/eps_identity: summation by parts {worst_sbp:.2e}, integration by parts {worst_ibp:.2e}")
    assert ok


def test_criterion_3_sharpness_of_g(record):
    ps = np.linspace(1.0 + 1e-3, 20.0, 100)
    at_min = max(abs(eval_g((p - 1) / p, p)) for p in ps)
    cs = np.linspace(0.0, 5.0, 100)
    worst = min(float(np.min(eval_g(cs, p))) for p in ps)
    ok = at_min <= 1e-12 and worst >= -1e-12
    record(3, ok, f"max |g(c_hat)| = {at_min:.1e} (<= 1e-12), min g on 10^4-point grid = {worst:.1e} (>= -1e-12)")
    assert ok


@pytest.fixture(scope="module")
def azema_yor_run():
    cfg = AlphaConfig(alpha=1.5, p=2.0, dt=1e-4, seed=2024)
    t0 = time.perf_counter()
    batch = simulate_many(cfg, 100_000)
    elapsed = time.perf_counter() - t0
    terminal = batch.uncapped().terminal
    start = 100_000
    while terminal.size < 100_000:
        extra = simulate_many(cfg, 100_000 - terminal.size, start=start).uncapped()
        start += 100_000
        terminal = np.concatenate((terminal, extra.terminal))
    return batch, terminal, elapsed


def test_criterion_4_azema_yor_equality(record, azema_yor_run):
    cf = closed_form_norms(2.0, 1.5)
    closed_ok = (
        abs(cf["norm_ST"] - 2 / math.sqrt(3)) <= 1e-12
        and abs(cf["norm_SbarT"] - math.sqrt(3)) <= 1e-12
        and abs(cf["gap"]) <= 1e-12
        and abs(cf["gap_optimal1"]) <= 1e-12
    )
    batch, _, elapsed = azema_yor_run
    ok_b = batch.uncapped()
    mc_st = float(np.sqrt(np.mean(ok_b.terminal**2)))
    mc_max = float(np.sqrt(np.mean(ok_b.running_max**2)))
    err_st = abs(mc_st / (2 / math.sqrt(3)) - 1)
    err_max = abs(mc_max / math.sqrt(3) - 1)
    ok = closed_ok and err_st <= 0.01 and err_max <= 0.01 and elapsed <= 300
    record(
        4, ok,
        f"closed form exact={closed_ok}; MC ||S_T||_2 rel err {err_st:.4f}, ||max S||_2 rel err {err_max:.4f} "
        f"(<= 0.01), {elapsed:.0f}s for 1e5 samples (limit 300s)",
    )
    assert ok


def test_criterion_5_empirical_law(record, azema_yor_run):
    _, terminal, _ = azema_yor_run
    ks = stats.kstest(terminal, lambda x: mu_cdf(x, 1.5)).statistic
    ok = ks <= 0.01
    record(5, ok, f"KS distance {ks:.4f} over {terminal.size} non-capped samples (<= 0.01)")
    assert ok


def test_criterion_6_exact_tree_suite(record):
    rng = np.random.default_rng(6)
    kinds = ("submartingale", "martingale", "constant")
    ps = (1.5, 2.0, 3.0)
    bad = {}
    quallp_neg = const_nonzero = order_fail = 0
    l1_fail_low_start = 0
    for k in range(1000):
        kind = kinds[k % 3]
        m = random_tree(rng, max_depth=6, max_branch=3, kind=kind)
        for r in run_suites(m, ALL_SUITES, ps):
            if r.verdict not in ("holds", "holds-with-equality"):
                bad[r.inequality] = bad.get(r.inequality, 0) + 1
                if r.inequality == "doob-l1" and m.values[0][0] < 1:
                    l1_fail_low_start += 1
        for p in ps:
            q = verify_quallp(m, p)
            if q.gap < -1e-10 * (1 + abs(q.lhs) + abs(q.rhs)):
                quallp_neg += 1
            if kind == "constant" and abs(q.gap) > 1e-10 * (1 + abs(q.lhs)):
                const_nonzero += 1
            if verify_strong_doob(m, p).gap > verify_doob_lp(m, p).gap + 1e-12:
                order_fail += 1
    ok = not bad and quallp_neg == 0 and const_nonzero == 0 and order_fail == 0
    detail = (
        f"1e3 trees: non-holds verdicts per suite {bad or '{}'}"
        + (f" (doob-l1 failures on trees with S_0 < 1: {l1_fail_low_start})" if "doob-l1" in bad else "")
        + f"; quallp gap<0: {quallp_neg}; constant quallp gap!=0: {const_nonzero}; strong>lp gap: {order_fail}"
    )
    record(6, ok, detail)
    assert ok, detail


def test_criterion_7_continuity_dichotomy(record):
    ks = list(range(4, 15))
    slack = []
    for k in ks:
        f = SampledFunction.from_callable(lambda t: 1.0 + t, 2**k)
        slack.append(check_cont_path_lp(f, 2.0).slack)
    C = slack[0] * 2 ** ks[0]
    rate_ok = all(s <= C * 2.0**-k * (1 + 1e-9) for s, k in zip(slack, ks)) and slack[-1] < 1e-3
    jump = []
    for k in ks:
        t = np.linspace(0.0, 1.0, 2**k + 1)
        jump.append(check_cont_path_lp(SampledFunction(t, np.where(t < 0.5, 1.0, 2.0)), 2.0).slack)
    jump_ok = jump[-1] > 0.5 * jump[0] and jump[-1] > 0
    ok = rate_ok and jump_ok
    record(7, ok, f"f=1+t: slack(2^14)={slack[-1]:.2e} <= C 2^-k with C={C:.3f}; jump path: slack {jump[0]:.3f} -> {jump[-1]:.3f}")
    assert ok


def test_criterion_8_psi_roundtrip(record):
    rng = np.random.default_rng(8)
    worst = {}
    for p in (2.0, 2.5):
        err = 0.0
        for _ in range(1000):
            x0 = float(rng.uniform(0.1, 10.0))
            y = x0 * (1.0 + float(rng.exponential(1.0)))
            err = max(err, abs(psi(psi_invert(y, x0, p), x0, p) - y))
        worst[p] = err
    ok = all(e <= 1e-12 for e in worst.values())
    record(8, ok, f"max |psi(psi^-1(y)) - y|: p=2 {worst[2.0]:.1e}, p=2.5 {worst[2.5]:.1e} (<= 1e-12)")
    assert ok


def test_criterion_9_reproducibility(record, tmp_path, capsys):
    runs = {
        "verify": ["verify", "--model", "gbm", "--n", "10000", "--steps", "50", "--seed", "7", "--suite", "all", "--p", "2", "--p", "3"],
        "sharpness": ["sharpness", "--p", "2", "--alpha", "1.2,1.5", "--n", "500", "--dt", "1e-3", "--seed", "7"],
    }
    outcome = {}
    for name, argv in runs.items():
        blobs = []
        for n_jobs in (1, 2, 4):
            out = tmp_path / f"{name}-{n_jobs}.txt"
            main(argv + ["--n-jobs", str(n_jobs), "--out", str(out)])
            blobs.append(out.read_bytes())
        out = tmp_path / f"{name}-again.txt"
        main(argv + ["--out", str(out)])
        blobs.append(out.read_bytes())
        outcome[name] = len(set(blobs)) == 1 and len(blobs[0]) > 0
    capsys.readouterr()
    ok = all(outcome.values())
    record(9, ok, f"byte-identical across n_jobs 1/2/4 and a repeat run: {outcome}")
    assert ok
