"""Reproducible random inputs for property and fuzz tests.

Path families drawn by :func:`random_nonnegative_path` (length uniform on
``1..max_len``, family chosen uniformly):

* ``uniform``   -- iid U[0, 10]
* ``lognormal`` -- geometric walk, ``s_0 ~ LogN(0, 1)``, log-steps N(0, sigma^2), sigma ~ U[0.01, 0.5]
* ``spikes``    -- a lognormal walk with ~5% of entries multiplied by U[5, 50]
* ``zeros``     -- iid U[0, 10] with each entry (s_0 included) set to 0 w.p. 0.2
* ``walk``      -- integer +-1 walk from U{0..5}, absorbed at 0
"""

from __future__ import annotations

import numpy as np

from pathdoob.models import TreeModel, TreeNode

PATH_FAMILIES = ("uniform", "lognormal", "spikes", "zeros", "walk")


def random_nonnegative_path(rng: np.random.Generator, max_len: int = 200, family: str | None = None) -> np.ndarray:
    n = int(rng.integers(1, max_len + 1))
    family = family or PATH_FAMILIES[int(rng.integers(len(PATH_FAMILIES)))]
    if family == "uniform":
        return rng.uniform(0.0, 10.0, n)
    if family in ("lognormal", "spikes"):
        sigma = rng.uniform(0.01, 0.5)
        s = np.exp(rng.normal(0.0, 1.0) + np.concatenate(([0.0], np.cumsum(rng.normal(0.0, sigma, n - 1)))))
        if family == "spikes":
            hit = rng.random(n) < 0.05
            s[hit] *= rng.uniform(5.0, 50.0, hit.sum())
        return s
    if family == "zeros":
        s = rng.uniform(0.0, 10.0, n)
        s[rng.random(n) < 0.2] = 0.0
        return s
    if family == "walk":
        s = np.empty(n)
        s[0] = rng.integers(0, 6)
        steps = rng.choice((-1.0, 1.0), n - 1)
        for k in range(1, n):
            s[k] = s[k - 1] + steps[k - 1] if s[k - 1] > 0 else 0.0
        return s
    raise ValueError(f"unknown family {family!r}")


def random_real_path(rng: np.random.Generator, max_len: int = 200) -> np.ndarray:
    """Gaussian random walk that may go negative."""
    n = int(rng.integers(1, max_len + 1))
    return rng.normal(0.0, 3.0) + np.concatenate(([0.0], np.cumsum(rng.normal(0.0, 1.0, n - 1))))


def random_tree(
    rng: np.random.Generator,
    max_depth: int = 6,
    max_branch: int = 3,
    kind: str = "submartingale",
) -> TreeModel:
    """Random non-negative tree of the given ``kind``.

    ``submartingale``: children drawn as ``v exp(N(0, 0.4^2))`` (zero w.p. 0.1)
    with Dirichlet(1) probabilities, then shifted up so that the conditional
    mean is at least ``v (1 + d)``, ``d ~ U[0, 0.2]`` w.p. 0.7 and 0 otherwise.
    ``martingale``: the same children rescaled to conditional mean ``v``.
    ``constant``: every node equals the root value.
    """
    if kind not in ("submartingale", "martingale", "constant"):
        raise ValueError(kind)
    depth = int(rng.integers(1, max_depth + 1))
    root = float(np.exp(rng.normal(0.0, 0.5)))
    levels = [[root]]
    children: list[list[tuple[tuple[int, float], ...]]] = []
    for _ in range(depth):
        nxt, kids = [], []
        for v in levels[-1]:
            k = int(rng.integers(1, max_branch + 1))
            probs = rng.dirichlet(np.ones(k))
            if kind == "constant":
                vals = np.full(k, v)
            else:
                vals = v * np.exp(rng.normal(0.0, 0.4, k))
                vals[rng.random(k) < 0.1] = 0.0
                mean = float(probs @ vals)
                if kind == "martingale":
                    vals = vals * (v / mean) if mean > 0 else np.full(k, v)
                else:
                    drift = rng.uniform(0.0, 0.2) if rng.random() < 0.7 else 0.0
                    target = v * (1.0 + drift)
                    if mean < target:
                        vals = vals + (target - mean)
            kids.append(tuple((len(nxt) + j, float(q)) for j, q in enumerate(probs)))
            nxt.extend(float(x) for x in vals)
        children.append(kids)
        levels.append(nxt)
    nodes = []
    for n, vals in enumerate(levels):
        nodes.append([
            TreeNode(v, children[n][i] if n < depth else ())
            for i, v in enumerate(vals)
        ])
    return TreeModel(nodes)
