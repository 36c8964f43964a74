import json
import math

import numpy as np
import pytest

from pathdoob.azema_yor import mu_quantile
from pathdoob.models import PathSampler, TreeModel, TreeNode, enumerate_paths
from pathdoob.verification import (
    ALL_SUITES,
    MCReport,
    PathEnsemble,
    psi,
    psi_invert,
    run_suites,
    verify_cbp,
    verify_doob_l1,
    verify_doob_lp,
    verify_optimal1,
    verify_quallp,
    verify_sharkdoob_lp,
    verify_strong_doob,
)
from pathdoob.testing import random_tree

E = math.e


def binary_martingale():
    # 1 -> {2, 0} each w.p. 1/2, then absorbed
    return TreeModel([
        [TreeNode(1.0, ((0, 0.5), (1, 0.5)))],
        [TreeNode(2.0, ((0, 1.0),)), TreeNode(0.0, ((1, 1.0),))],
        [TreeNode(2.0), TreeNode(0.0)],
    ])


def azema_yor_ensemble(alpha=1.5, n=200_000):
    """Stratified draws from the closed-form law: an MC stand-in for the
    stopped Brownian motion without the cost of simulating it."""
    u = (np.arange(n) + 0.5) / n
    x = mu_quantile(u, alpha)
    return PathEnsemble(np.ones(n), x, alpha * x, submartingale=True, martingale=True)


def test_doob_lp_examples():
    r = verify_doob_lp(TreeModel.constant(1.5, 3), 2.0)
    assert (r.lhs, r.rhs) == (pytest.approx(2.25), pytest.approx(9.0))
    assert r.verdict == "holds" and r.exact and r.lhs_stderr == 0 and r.gap_stderr == 0
    r = verify_doob_lp(binary_martingale(), 2.0)
    assert r.lhs == pytest.approx(2.5) and r.rhs == pytest.approx(8.0)
    assert r.verdict == "holds" and r.n == 2


def test_doob_lp_rejects_non_submartingale():
    with pytest.raises(ValueError, match="submartingale"):
        verify_doob_lp(TreeModel.chain([2.0, 1.0]), 2.0)
    with pytest.raises(ValueError, match="submartingale"):
        PathEnsemble.from_sampler(PathSampler("walk", params={"up_prob": 0.3}), 10)


def test_doob_l1_examples():
    r = verify_doob_l1(TreeModel.constant(1.0, 2))
    assert r.lhs == 1.0 and r.rhs == pytest.approx(E / (E - 1)) and r.verdict == "holds"
    r = verify_doob_l1(TreeModel.chain([1.0, E]))
    assert r.lhs == pytest.approx(E) and r.rhs == pytest.approx(E / (E - 1) * (E + 1))
    # the binary martingale: E[max S] = (2 + 1)/2, E[S_T log S_T] = log 2
    r = verify_doob_l1(binary_martingale())
    assert r.lhs == pytest.approx(1.5)
    assert r.rhs == pytest.approx(E / (E - 1) * (math.log(2.0) + 1.0))
    assert r.verdict == "holds"


def test_doob_l1_submartingale_below_one_counterexample():
    # A deterministic rise below 1 is a submartingale on which the stated L^1
    # bound fails: the hedge -log(max S) dS then has positive expected gain.
    r = verify_doob_l1(TreeModel.chain([0.1, 0.5]))
    assert r.lhs == 0.5
    assert r.rhs == pytest.approx(E / (E - 1) * (0.5 * math.log(0.5) + 0.1 * (1 - math.log(0.1))))
    assert r.verdict == "violated"
    assert r.details["hedge_term"] == pytest.approx(-math.log(0.1) * 0.4)
    assert r.rhs - r.lhs + E / (E - 1) * r.details["hedge_term"] >= 0


def test_doob_l1_holds_on_martingales_and_above_one(rng):
    for k in range(300):
        kind = ("martingale", "submartingale")[k % 2]
        m = random_tree(rng, kind=kind)
        if m.values[0][0] <= 0:
            continue
        r = verify_doob_l1(m)
        if kind == "martingale" or m.values[0][0] >= 1:
            assert r.verdict != "violated", r
            assert r.details["hedge_term"] <= 1e-12 * (1 + abs(r.lhs)) or kind == "martingale"


def test_doob_l1_needs_positive_start():
    with pytest.raises(ValueError, match="S_0 > 0"):
        verify_doob_l1(TreeModel.chain([0.0, 1.0]))


def test_strong_doob_and_cbp_examples():
    c = 1.3
    for fn in (lambda s: verify_strong_doob(s, 2.0), verify_cbp):
        r = fn(TreeModel.constant(c, 2))
        assert r.gap == pytest.approx(c * c) and r.verdict == "holds"
        r = fn(binary_martingale())
        assert r.rhs == pytest.approx(6.0) and r.lhs == pytest.approx(2.5)
    ay = azema_yor_ensemble()
    r = verify_strong_doob(ay, 2.0)
    assert r.rhs == pytest.approx(10 / 3, rel=0.02) and r.lhs == pytest.approx(3.0, rel=0.02)
    assert r.verdict == "holds"
    assert verify_cbp(ay).to_dict() | {"inequality": None} == r.to_dict() | {"inequality": None}


def test_optimal1_examples():
    r = verify_optimal1(TreeModel.constant(2.0, 3))
    assert r.lhs == 2.0 and r.rhs == 2.0 and r.verdict == "holds-with-equality"
    r = verify_optimal1(binary_martingale())
    assert r.lhs == pytest.approx(math.sqrt(2.5)) and r.rhs == pytest.approx(math.sqrt(2) + 1)
    assert r.verdict == "holds"
    r = verify_optimal1(azema_yor_ensemble())
    assert r.lhs == pytest.approx(math.sqrt(3), rel=0.01)
    assert r.verdict != "violated"


def test_sharkdoob_examples():
    r = verify_sharkdoob_lp(binary_martingale(), 2.0)
    assert r.lhs == pytest.approx(math.sqrt(2.5)) and r.rhs == pytest.approx(2 * math.sqrt(2) - 1 / math.sqrt(2.5))
    assert r.verdict == "holds"
    for p in (1.5, 2.0, 3.0):
        r = verify_sharkdoob_lp(TreeModel.constant(0.8, 2), p)
        assert r.lhs == pytest.approx(0.8) and r.verdict == "holds-with-equality"
    r = verify_sharkdoob_lp(azema_yor_ensemble(), 2.0)
    assert abs(r.gap) < 4 * r.gap_stderr + 1e-3 and r.verdict != "violated"
    with pytest.raises(ValueError, match="S != 0"):
        verify_sharkdoob_lp(TreeModel.constant(0.0, 2), 2.0)


def test_quallp_examples():
    r = verify_quallp(binary_martingale(), 2.0)
    assert r.lhs == pytest.approx(2.5) and r.rhs == pytest.approx(3.0)
    assert r.details["martingale"]
    r = verify_quallp(TreeModel.chain([1.0, 2.0]), 2.0)
    assert (r.lhs, r.rhs) == (pytest.approx(4.0), pytest.approx(5.0))
    assert not r.details["martingale"]
    for p in (1.5, 2.0, 4.0):
        r = verify_quallp(TreeModel.constant(1.7, 3), p)
        assert r.verdict == "holds-with-equality" and abs(r.gap) <= 1e-10
    with pytest.raises(TypeError, match="tree"):
        verify_quallp(azema_yor_ensemble(n=10), 2.0)


def test_exact_random_trees_never_violated(rng):
    for k in range(150):
        m = random_tree(rng, kind=("submartingale", "martingale", "constant")[k % 3])
        if m.values[0][0] == 0:
            continue
        for p in (1.5, 2.0, 3.0):
            lp, strong = verify_doob_lp(m, p), verify_strong_doob(m, p)
            assert strong.gap <= lp.gap + 1e-12
            for r in (lp, strong, verify_sharkdoob_lp(m, p), verify_quallp(m, p)):
                assert r.verdict in ("holds", "holds-with-equality"), r
                assert r.gap >= -1e-10 * (1 + abs(r.lhs) + abs(r.rhs))
        for r in (verify_cbp(m), verify_optimal1(m)):
            assert r.verdict in ("holds", "holds-with-equality"), r


def test_martingale_optimal1_sharkdoob_agree(rng):
    for _ in range(60):
        m = random_tree(rng, kind="martingale")
        shark = verify_sharkdoob_lp(m, 2.0)
        opt = verify_optimal1(m)
        inverted = psi_invert(shark.details["psi_rhs"], math.sqrt(m.values[0][0] ** 2), 2.0)
        assert inverted == pytest.approx(opt.rhs, rel=1e-9)
        assert (shark.verdict == "holds") == (opt.verdict == "holds")


def test_submartingale_optimal1_tighter(rng):
    checked = 0
    for _ in range(80):
        m = random_tree(rng, kind="submartingale")
        s0 = m.values[0][0]
        paths, probs = zip(*enumerate_paths(m))
        probs = np.array(probs)
        st = np.array([p.values[-1] for p in paths])
        # E[A_T] = E[S_T] - S_0 for a deterministic root
        mean_a = float(probs @ st) - s0
        if mean_a <= 1e-9 or s0 <= 0:
            continue
        lhs = math.sqrt(probs @ st**2 - s0**2)
        rhs = math.sqrt(probs @ (st - s0) ** 2)
        assert lhs > rhs
        checked += 1
    assert checked > 20


def test_monte_carlo_report_fields():
    s = PathSampler("gbm", seed=7, steps=20, params={"sigma": 0.3})
    r = verify_doob_lp(PathEnsemble.from_sampler(s, 5000), 2.0)
    assert not r.exact and r.n == 5000
    assert r.lhs_stderr > 0 and r.rhs_stderr > 0 and r.gap_stderr > 0
    assert r.verdict == "holds"
    d = r.to_dict()
    assert {"inequality", "p", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "gap", "verdict", "n", "exact"} <= set(d)
    json.dumps(d)


def test_delta_method_stderr_matches_replication():
    # spread of the sharp-L2 lhs over independent batches vs its reported stderr
    lhs, se = [], []
    for seed in range(40):
        r = verify_sharkdoob_lp(PathEnsemble.from_sampler(PathSampler("gbm", seed=seed, steps=5, params={"sigma": 0.5}), 500), 2.0)
        lhs.append(r.lhs)
        se.append(r.lhs_stderr)
    assert np.std(lhs, ddof=1) == pytest.approx(np.mean(se), rel=0.35)


def test_from_sampler_thread_invariant():
    s = PathSampler("walk", seed=3, steps=30)
    a = PathEnsemble.from_sampler(s, 257, n_jobs=1)
    b = PathEnsemble.from_sampler(s, 257, n_jobs=2)
    assert np.array_equal(a.running_max, b.running_max) and np.array_equal(a.terminal, b.terminal)


def test_from_paths_and_tree_agree():
    m = binary_martingale()
    paths = [p for p, _ in enumerate_paths(m)]
    mc = verify_doob_lp(PathEnsemble.from_paths(paths), 2.0)
    assert mc.lhs == pytest.approx(2.5) and not mc.exact


def test_ensemble_validation():
    with pytest.raises(ValueError, match="negative"):
        PathEnsemble([1.0], [-1.0], [1.0])
    with pytest.raises(ValueError):
        PathEnsemble([], [], [])


def test_verdict_rule_inconclusive_and_violated():
    ens = PathEnsemble([1.0] * 4, [1.0, 1.0, 1.0, 1.0], [1.0, 1.0, 1.0, 1.0])
    assert verify_optimal1(ens).verdict == "holds-with-equality"
    bad = PathEnsemble(np.ones(2000), np.ones(2000), np.full(2000, 5.0))
    assert verify_doob_lp(bad, 2.0).verdict == "violated"


def test_run_suites_order():
    reps = run_suites(binary_martingale(), list(ALL_SUITES) + ["quallp"], [3.0, 2.0])
    names = [(r.inequality, r.p) for r in reps]
    assert names == [
        ("cbp", 2.0), ("doob-l1", None), ("doob-lp", 2.0), ("doob-lp", 3.0), ("optimal1", 2.0),
        ("quallp", 2.0), ("quallp", 3.0), ("sharkdoob-lp", 2.0), ("sharkdoob-lp", 3.0),
        ("strong-doob", 2.0), ("strong-doob", 3.0),
    ]


def test_psi_examples():
    assert psi_invert(1.0, 1.0) == 1.0
    assert psi_invert(2 / math.sqrt(3), 1.0) == pytest.approx(math.sqrt(3), rel=1e-15)
    with pytest.raises(ValueError):
        psi_invert(0.5, 1.0)


@pytest.mark.parametrize("p", [1.3, 2.0, 2.5, 3.0, 4.0, 7.0])
def test_psi_roundtrip(p, rng):
    for _ in range(300):
        x0 = float(np.exp(rng.normal()))
        y = x0 * (1 + float(rng.exponential(2.0)))
        x = psi_invert(y, x0, p)
        assert x >= x0
        assert abs(psi(x, x0, p) - y) <= 1e-12 * max(1.0, y)


def test_psi_closed_forms_match_bisection(rng):
    from pathdoob.verification import _bisect_psi

    for p in (3.0, 4.0):
        for _ in range(100):
            x0 = float(np.exp(rng.normal()))
            y = x0 * (1 + float(rng.exponential(1.0)))
            assert psi_invert(y, x0, p) == pytest.approx(_bisect_psi(y, x0, p), rel=1e-9)


def test_quallp_strict_gap_with_compensator(rng):
    seen = 0
    for _ in range(150):
        m = random_tree(rng, kind="submartingale")
        ens = PathEnsemble.from_tree(m)
        if ens.weights @ ens.compensator <= 1e-9:
            continue
        for p in (1.5, 2.0, 3.0):
            assert verify_quallp(m, p).gap > 0
        seen += 1
    assert seen > 30
