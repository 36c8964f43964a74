"""Martingale and submartingale models: exact finite trees with their Doob
decomposition, and seeded path samplers for Monte Carlo."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from pathdoob.path_core import Path
from pathdoob.rng import SAMPLER_STREAM, path_rng

__all__ = [
    "TreeNode",
    "TreeModel",
    "DoobDecomposition",
    "PathSampler",
    "DriftEstimate",
    "enumerate_paths",
    "doob_decompose",
    "sample_path",
    "sample_paths",
    "empirical_submartingale_drift",
    "MAX_TREE_PATHS",
]

PROB_TOL = 1e-12
MAX_TREE_PATHS = 10**6


@dataclass(frozen=True)
class TreeNode:
    value: float
    children: tuple[tuple[int, float], ...] = ()


def _cond_tol(v: float) -> float:
    return PROB_TOL * (1.0 + abs(v))


class TreeModel:
    """Finite-horizon tree (or lattice) with transition probabilities.

    ``levels[n][i]`` is node ``i`` at time ``n``; children refer to node
    indices one level down. Lattices where a node has several parents are
    allowed for enumeration, but :func:`doob_decompose` needs a true tree.
    """

    def __init__(self, levels: Sequence[Sequence[TreeNode]]):
        self.levels: list[list[TreeNode]] = [list(level) for level in levels]
        self._validate()
        self.values = [np.array([nd.value for nd in level], dtype=float) for level in self.levels]

    # -- construction --------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "TreeModel":
        try:
            levels = [
                [
                    TreeNode(
                        float(nd["value"]),
                        tuple((int(c["node"]), float(c["prob"])) for c in nd.get("children", [])),
                    )
                    for nd in level
                ]
                for level in doc["levels"]
            ]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed tree description: {exc!r}") from None
        return cls(levels)

    @classmethod
    def from_json(cls, filename: str | FsPath) -> "TreeModel":
        return cls.from_dict(json.loads(FsPath(filename).read_text()))

    def to_dict(self) -> dict:
        return {
            "levels": [
                [
                    {"value": nd.value, "children": [{"node": c, "prob": q} for c, q in nd.children]}
                    for nd in level
                ]
                for level in self.levels
            ]
        }

    @classmethod
    def chain(cls, values: Sequence[float]) -> "TreeModel":
        """Deterministic path: one child per node."""
        n = len(values)
        return cls([[TreeNode(float(v), ((0, 1.0),) if k < n - 1 else ())] for k, v in enumerate(values)])

    @classmethod
    def constant(cls, c: float, steps: int) -> "TreeModel":
        return cls.chain([c] * (steps + 1))

    @classmethod
    def binomial(cls, s0: float, up: float, down: float, q: float, steps: int) -> "TreeModel":
        """Non-recombining multiplicative binomial tree with up-probability ``q``."""
        if 2**steps > MAX_TREE_PATHS:
            raise ValueError("tree too large")
        levels = []
        vals = np.array([s0], dtype=float)
        for n in range(steps + 1):
            last = n == steps
            levels.append([
                TreeNode(float(v), () if last else ((2 * i, q), (2 * i + 1, 1.0 - q)))
                for i, v in enumerate(vals)
            ])
            vals = np.column_stack((vals * up, vals * down)).ravel()
        return cls(levels)

    def _validate(self) -> None:
        if not self.levels or len(self.levels[0]) != 1:
            raise ValueError("level 0 must contain exactly one root node")
        T = len(self.levels) - 1
        for n, level in enumerate(self.levels):
            if not level:
                raise ValueError(f"level {n} is empty")
            for i, nd in enumerate(level):
                if not math.isfinite(nd.value) or nd.value < 0:
                    raise ValueError(f"node ({n}, {i}) has invalid value {nd.value!r}; values must be finite and >= 0")
                if n == T:
                    if nd.children:
                        raise ValueError(f"leaf node ({n}, {i}) must not have children")
                    continue
                if not nd.children:
                    raise ValueError(f"node ({n}, {i}) has no children before the horizon")
                total = 0.0
                for c, q in nd.children:
                    if not 0 <= c < len(self.levels[n + 1]):
                        raise ValueError(f"node ({n}, {i}) points to missing child {c}")
                    if not (q >= 0 and math.isfinite(q)):
                        raise ValueError(f"node ({n}, {i}) has invalid probability {q!r}")
                    total += q
                if abs(total - 1.0) > PROB_TOL:
                    raise ValueError(f"probabilities at node ({n}, {i}) sum to {total!r}, not 1")

    # -- structure -------------------------------------------------------------

    @property
    def T(self) -> int:
        return len(self.levels) - 1

    def conditional_mean(self, n: int, i: int) -> float:
        nxt = self.values[n + 1]
        return math.fsum(q * nxt[c] for c, q in self.levels[n][i].children)

    def predictable_increment(self, n: int, i: int) -> float:
        """Compensator increment ``E[S_{n+1} | node] - S_n`` at node ``(n, i)``."""
        return self.conditional_mean(n, i) - self.values[n][i]

    def increments(self) -> list[np.ndarray]:
        return [
            np.array([self.predictable_increment(n, i) for i in range(len(self.levels[n]))])
            for n in range(self.T)
        ]

    def submartingale_violation(self) -> tuple[int, int] | None:
        for n in range(self.T):
            for i in range(len(self.levels[n])):
                if self.predictable_increment(n, i) < -_cond_tol(self.values[n][i]):
                    return n, i
        return None

    def is_submartingale(self) -> bool:
        return self.submartingale_violation() is None

    def is_martingale(self) -> bool:
        return all(
            abs(self.predictable_increment(n, i)) <= _cond_tol(self.values[n][i])
            for n in range(self.T)
            for i in range(len(self.levels[n]))
        )

    def is_tree(self) -> bool:
        for n in range(1, self.T + 1):
            parents = np.zeros(len(self.levels[n]), dtype=int)
            for nd in self.levels[n - 1]:
                for c, _ in nd.children:
                    parents[c] += 1
            if np.any(parents != 1):
                return False
        return True

    def n_paths(self) -> int:
        counts = [1] * len(self.levels[-1])
        for n in range(self.T - 1, -1, -1):
            counts = [sum(counts[c] for c, _ in nd.children) for nd in self.levels[n]]
        return counts[0]

    def enumerate_nodes(self, max_paths: int = MAX_TREE_PATHS) -> tuple[np.ndarray, np.ndarray]:
        """Node indices ``(n_paths, T+1)`` of every root-to-leaf path and its probability."""
        npaths = self.n_paths()
        if npaths > max_paths:
            raise ValueError(
                f"tree has {npaths} paths, more than the enumeration limit {max_paths}; use Monte Carlo sampling instead"
            )
        nodes = np.zeros((1, 1), dtype=np.intp)
        probs = np.ones(1)
        for n in range(self.T):
            ptr, cidx, cprob = self._csr(n)
            last = nodes[:, -1]
            counts = ptr[last + 1] - ptr[last]
            rep = np.repeat(np.arange(last.size), counts)
            starts = np.repeat(np.cumsum(counts) - counts, counts)
            pos = ptr[last][rep] + np.arange(rep.size) - starts
            nodes = np.column_stack((nodes[rep], cidx[pos]))
            probs = probs[rep] * cprob[pos]
        return nodes, probs

    def _csr(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        level = self.levels[n]
        counts = np.array([len(nd.children) for nd in level])
        ptr = np.concatenate(([0], np.cumsum(counts)))
        cidx = np.array([c for nd in level for c, _ in nd.children], dtype=np.intp)
        cprob = np.array([q for nd in level for _, q in nd.children], dtype=float)
        return ptr, cidx, cprob

    def path_values(self, nodes: np.ndarray) -> np.ndarray:
        return np.column_stack([self.values[n][nodes[:, n]] for n in range(self.T + 1)])


def enumerate_paths(model: TreeModel, max_paths: int = MAX_TREE_PATHS) -> list[tuple[Path, float]]:
    """All root-to-leaf paths with their probabilities."""
    nodes, probs = model.enumerate_nodes(max_paths)
    vals = model.path_values(nodes)
    return [(Path(row), float(q)) for row, q in zip(vals, probs)]


@dataclass
class DoobDecomposition:
    """Per-node split ``S = M + A`` on a tree.

    ``increment[n][i]`` is the predictable step ``A_{n+1} - A_n`` decided at
    node ``(n, i)``; it is shared by all children of that node.
    """

    martingale: list[np.ndarray]
    compensator: list[np.ndarray]
    increment: list[np.ndarray]

    def to_dict(self) -> dict:
        return {
            "martingale": [m.tolist() for m in self.martingale],
            "compensator": [a.tolist() for a in self.compensator],
            "increment": [d.tolist() for d in self.increment],
        }


def doob_decompose(model: TreeModel) -> DoobDecomposition:
    """Doob decomposition of a submartingale tree into martingale and compensator."""
    bad = model.submartingale_violation()
    if bad is not None:
        n, i = bad
        raise ValueError(
            f"not a submartingale: node ({n}, {i}) with value {model.values[n][i]!r} "
            f"has conditional mean {model.conditional_mean(n, i)!r}"
        )
    if not model.is_tree():
        raise ValueError("doob_decompose needs a tree: in a lattice the compensator is path dependent")
    incs = model.increments()
    comp = [np.zeros(1)]
    for n in range(model.T):
        a = np.zeros(len(model.levels[n + 1]))
        for i, nd in enumerate(model.levels[n]):
            for c, _ in nd.children:
                a[c] = comp[n][i] + max(incs[n][i], 0.0)
        comp.append(a)
    mart = [v - a for v, a in zip(model.values, comp)]
    return DoobDecomposition(martingale=mart, compensator=comp, increment=[np.maximum(d, 0.0) for d in incs])


# -- samplers -----------------------------------------------------------------

_DEFAULTS = {
    "gbm": {"s0": 1.0, "sigma": 0.2, "mu": 0.0},
    "walk": {"s0": 10.0, "step": 1.0, "up_prob": 0.5, "boundary": "absorbed"},
    "tree": {},
    "custom": {},
}


@dataclass(frozen=True)
class PathSampler:
    """Immutable sampler descriptor.

    ``gbm``: exact lognormal steps ``S_{n+1} = S_n exp(sigma dW + (mu - sigma^2/2) dt)``;
    a martingale for ``mu = 0`` and a submartingale for ``mu > 0``.

    ``walk``: steps of ``+-step`` with up-probability ``up_prob``. Boundary
    ``none`` may go negative (martingale for ``up_prob = 0.5``);
    ``absorbed`` clips at 0 and stays there (submartingale, a martingale
    when ``s0`` is a multiple of ``step``); ``reflected`` takes ``|S|``
    (submartingale by convexity). With ``up_prob < 0.5`` none of these is a
    submartingale.

    ``tree``: walks a :class:`TreeModel` (``params["tree"]``).
    ``custom``: ``params["fn"](rng, steps, horizon)`` returns the values.
    """

    model: str
    seed: int = 0
    steps: int = 100
    horizon: float = 1.0
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in _DEFAULTS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {sorted(_DEFAULTS)}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        merged = {**_DEFAULTS[self.model], **dict(self.params)}
        object.__setattr__(self, "params", merged)
        if self.model == "tree":
            tree = merged.get("tree")
            if not isinstance(tree, TreeModel):
                raise ValueError("tree sampler needs params['tree'] to be a TreeModel")
            object.__setattr__(self, "steps", tree.T)
        elif self.model == "custom":
            if not callable(merged.get("fn")):
                raise ValueError("custom sampler needs a callable params['fn']")
        if self.steps < 0 or not self.horizon > 0:
            raise ValueError("steps must be >= 0 and horizon > 0")
        if self.model == "gbm" and (merged["s0"] < 0 or merged["sigma"] < 0):
            raise ValueError("gbm needs s0 >= 0 and sigma >= 0")
        if self.model == "walk":
            if merged["boundary"] not in ("none", "absorbed", "reflected"):
                raise ValueError(f"unknown walk boundary {merged['boundary']!r}")
            if not 0 <= merged["up_prob"] <= 1 or merged["step"] <= 0:
                raise ValueError("walk needs 0 <= up_prob <= 1 and step > 0")

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any]) -> "PathSampler":
        cfg = dict(cfg)
        model = cfg.pop("model")
        kwargs = {k: cfg.pop(k) for k in ("seed", "steps", "horizon") if k in cfg}
        params = dict(cfg.pop("params", {}))
        params.update(cfg)
        if model == "tree" and not isinstance(params.get("tree"), TreeModel):
            src = params.get("tree")
            if isinstance(src, (str, FsPath)):
                params["tree"] = TreeModel.from_json(src)
            elif isinstance(src, Mapping):
                params["tree"] = TreeModel.from_dict(src)
        return cls(model=model, params=params, **kwargs)

    @property
    def dt(self) -> float:
        return self.horizon / self.steps if self.steps else 0.0

    def is_submartingale(self) -> bool | None:
        prm = self.params
        if self.model == "gbm":
            return prm["mu"] >= 0
        if self.model == "walk":
            return prm["up_prob"] >= 0.5
        if self.model == "tree":
            return prm["tree"].is_submartingale()
        return None

    def is_nonnegative(self) -> bool | None:
        if self.model == "walk":
            return self.params["boundary"] != "none" or self.params["s0"] >= self.steps * self.params["step"]
        return None if self.model == "custom" else True


def _sample_gbm(rng, sampler: PathSampler) -> np.ndarray:
    prm = sampler.params
    dt = sampler.dt
    z = rng.standard_normal(sampler.steps)
    logret = prm["sigma"] * math.sqrt(dt) * z + (prm["mu"] - 0.5 * prm["sigma"] ** 2) * dt
    return prm["s0"] * np.exp(np.concatenate(([0.0], np.cumsum(logret))))


def _sample_walk(rng, sampler: PathSampler) -> np.ndarray:
    prm = sampler.params
    up = rng.random(sampler.steps) < prm["up_prob"]
    xi = np.where(up, prm["step"], -prm["step"])
    if prm["boundary"] == "none":
        return prm["s0"] + np.concatenate(([0.0], np.cumsum(xi)))
    out = np.empty(sampler.steps + 1)
    s = out[0] = prm["s0"]
    absorbed = prm["boundary"] == "absorbed"
    for n, x in enumerate(xi, start=1):
        if absorbed:
            s = max(s + x, 0.0) if s > 0 else 0.0
        else:
            s = abs(s + x)
        out[n] = s
    return out


def _sample_tree(rng, sampler: PathSampler) -> np.ndarray:
    tree: TreeModel = sampler.params["tree"]
    u = rng.random(tree.T)
    out = np.empty(tree.T + 1)
    i = 0
    out[0] = tree.values[0][0]
    for n in range(tree.T):
        children = tree.levels[n][i].children
        cum = np.cumsum([q for _, q in children])
        k = min(int(np.searchsorted(cum, u[n], side="right")), len(children) - 1)
        i = children[k][0]
        out[n + 1] = tree.values[n + 1][i]
    return out


def sample_path(sampler: PathSampler, index: int) -> Path:
    """Path number ``index``; a pure function of ``(sampler, index)``."""
    rng = path_rng(sampler.seed, index, SAMPLER_STREAM)
    if sampler.model == "gbm":
        vals = _sample_gbm(rng, sampler)
    elif sampler.model == "walk":
        vals = _sample_walk(rng, sampler)
    elif sampler.model == "tree":
        vals = _sample_tree(rng, sampler)
    else:
        vals = sampler.params["fn"](rng, sampler.steps, sampler.horizon)
    return Path(vals)


def sample_paths(sampler: PathSampler, n: int, start: int = 0) -> list[Path]:
    return [sample_path(sampler, k) for k in range(start, start + n)]


@dataclass
class DriftEstimate:
    per_step: np.ndarray
    total: float
    stderr: float
    exact: bool


def empirical_submartingale_drift(
    paths: Sequence[Path], weights: Sequence[float] | None = None
) -> DriftEstimate:
    """Estimate ``E[sum smax_n (S_{n+1} - S_n)]`` per step and in total.

    With ``weights`` (e.g. from :func:`enumerate_paths`) the value is an
    exact expectation and the standard error is 0.
    """
    if len(paths) == 0:
        raise ValueError("no paths given")
    lengths = {len(p) for p in paths}
    if len(lengths) != 1:
        raise ValueError("paths must all have the same length")
    terms = np.array([p.running_max[:-1] * p.increments for p in paths])
    totals = terms.sum(axis=1)
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(paths),):
            raise ValueError("one weight per path is required")
        return DriftEstimate(w @ terms, float(w @ totals), 0.0, True)
    if len(paths) < 2:
        raise ValueError("Monte Carlo estimate needs at least 2 paths")
    se = float(np.std(totals, ddof=1) / math.sqrt(len(paths)))
    return DriftEstimate(terms.mean(axis=0), float(totals.mean()), se, False)
