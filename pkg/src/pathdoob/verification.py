"""Expectation-level Doob inequality suites.

A source is either exact (a :class:`TreeModel`, evaluated by enumerating
every path with its probability) or a Monte Carlo sample of paths. Every
suite reduces to a smooth function of a few moments, so Monte Carlo
standard errors come from the delta method with a central-difference
gradient and the sample covariance of the per-path features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from pathdoob.models import PathSampler, TreeModel, sample_path
from pathdoob.path_core import Path
from pathdoob.pathwise_ineq import E_CONST, validate_p

__all__ = [
    "MCReport",
    "PathEnsemble",
    "K_SIGMA",
    "SUITES",
    "ALL_SUITES",
    "verify_doob_lp",
    "verify_doob_l1",
    "verify_strong_doob",
    "verify_cbp",
    "verify_optimal1",
    "verify_sharkdoob_lp",
    "verify_quallp",
    "run_suites",
    "psi",
    "psi_invert",
]

K_SIGMA = 4.0
EQ_ABS = 1e-10
EQ_SE = 1e-3

VERDICTS = ("holds", "holds-with-equality", "violated", "inconclusive")


@dataclass
class MCReport:
    inequality: str
    p: float | None
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    gap: float
    gap_stderr: float
    verdict: str
    n: int
    exact: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "inequality": self.inequality,
            "p": self.p,
            "lhs": self.lhs,
            "lhs_stderr": self.lhs_stderr,
            "rhs": self.rhs,
            "rhs_stderr": self.rhs_stderr,
            "gap": self.gap,
            "gap_stderr": self.gap_stderr,
            "verdict": self.verdict,
            "n": self.n,
            "exact": self.exact,
        }
        if self.details:
            d["details"] = dict(self.details)
        return d


@dataclass
class PathEnsemble:
    """Per-path ``S_0``, ``S_T`` and ``max S`` with optional exact weights.

    ``weights is None`` means an equally weighted Monte Carlo sample.
    ``compensator`` holds ``A_T`` per path and is only known for trees.
    """

    s0: np.ndarray
    terminal: np.ndarray
    running_max: np.ndarray
    weights: np.ndarray | None = None
    compensator: np.ndarray | None = None
    submartingale: bool | None = None
    martingale: bool | None = None
    label: str = ""
    # per-path hedge gain sum(-log max S_i)(S_{i+1} - S_i), when full paths are known
    hedge_l1: np.ndarray | None = None

    def __post_init__(self):
        self.s0 = np.asarray(self.s0, dtype=float)
        self.terminal = np.asarray(self.terminal, dtype=float)
        self.running_max = np.asarray(self.running_max, dtype=float)
        n = self.s0.size
        if n == 0 or self.terminal.size != n or self.running_max.size != n:
            raise ValueError("ensemble arrays must be non-empty and of equal length")
        for name in ("s0", "terminal", "running_max"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            if np.any(arr < 0):
                raise ValueError(f"{name} contains negative values; a non-negative source is required")

    @property
    def exact(self) -> bool:
        return self.weights is not None

    @property
    def n(self) -> int:
        return self.s0.size

    @classmethod
    def from_tree(cls, model: TreeModel) -> "PathEnsemble":
        bad = model.submartingale_violation()
        if bad is not None:
            raise ValueError(f"source is not a submartingale (node {bad})")
        nodes, probs = model.enumerate_nodes()
        vals = model.path_values(nodes)
        incs = model.increments()
        comp = np.zeros(len(probs))
        for n in range(model.T):
            comp += np.maximum(incs[n][nodes[:, n]], 0.0)
        return cls(
            vals[:, 0],
            vals[:, -1],
            vals.max(axis=1),
            weights=probs,
            compensator=comp,
            submartingale=True,
            martingale=model.is_martingale(),
            label="tree",
            hedge_l1=_hedge_l1(vals),
        )

    @classmethod
    def from_paths(cls, paths: Sequence[Path], submartingale: bool | None = None, label: str = "") -> "PathEnsemble":
        if len(paths) == 0:
            raise ValueError("no paths given")
        return cls(
            [p.values[0] for p in paths],
            [p.values[-1] for p in paths],
            [p.running_max[-1] for p in paths],
            submartingale=submartingale,
            label=label,
            hedge_l1=np.array([_hedge_l1(p.values[None, :])[0] for p in paths]),
        )

    @classmethod
    def from_sampler(cls, sampler: PathSampler, n: int, n_jobs: int = 1) -> "PathEnsemble":
        """Paths ``0..n-1`` of ``sampler``; identical for every ``n_jobs``."""
        if sampler.is_submartingale() is False:
            raise ValueError(f"sampler {sampler.model!r} with these parameters is not a submartingale")
        if n < 1:
            raise ValueError("need at least one path")
        if n_jobs == 1:
            rows = _endpoints(sampler, 0, n)
        else:
            from joblib import Parallel, delayed

            edges = np.linspace(0, n, 4 * (n_jobs if n_jobs > 0 else 8) + 1).astype(int)
            rows = np.concatenate(Parallel(n_jobs=n_jobs)(
                delayed(_endpoints)(sampler, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a
            ))
        return cls(rows[:, 0], rows[:, 1], rows[:, 2], submartingale=sampler.is_submartingale(), label=sampler.model)

    @classmethod
    def from_stopped(cls, batch) -> "PathEnsemble":
        """Stopped Brownian samples started at 1 (capped samples should be removed first)."""
        return cls(
            np.ones(batch.terminal.size), batch.terminal, batch.running_max,
            submartingale=True, martingale=True, label="azema-yor",
        )


def _hedge_l1(vals: np.ndarray) -> np.ndarray:
    smax = np.maximum.accumulate(vals, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = -np.log(smax[:, :-1]) * np.diff(vals, axis=1)
    return np.where(np.isnan(terms), 0.0, terms).sum(axis=1)


def _endpoints(sampler: PathSampler, start: int, stop: int) -> np.ndarray:
    rows = np.empty((stop - start, 3))
    for r, k in enumerate(range(start, stop)):
        path = sample_path(sampler, k)
        rows[r] = (path.values[0], path.values[-1], path.running_max[-1])
    return rows


def _as_ensemble(source) -> PathEnsemble:
    if isinstance(source, PathEnsemble):
        if source.submartingale is False:
            raise ValueError("source is flagged as not a submartingale")
        return source
    if isinstance(source, TreeModel):
        return PathEnsemble.from_tree(source)
    if isinstance(source, (list, tuple)) and source and isinstance(source[0], Path):
        return PathEnsemble.from_paths(source)
    raise TypeError(f"unsupported source type {type(source).__name__}")


def _gradient(fn: Callable, m: np.ndarray) -> np.ndarray:
    g = np.empty_like(m)
    for j in range(m.size):
        h = 1e-6 * max(abs(m[j]), 1e-8)
        up, dn = m.copy(), m.copy()
        up[j] += h
        dn[j] -= h
        g[j] = (fn(up) - fn(dn)) / (2 * h)
    return g


def _verdict(lhs: float, rhs: float, gap: float, se: float, tol_scale: float) -> str:
    eq_tol = max(tol_scale * EQ_ABS * (1.0 + abs(lhs) + abs(rhs)), EQ_SE * se)
    if abs(gap) <= eq_tol:
        return "holds-with-equality"
    if gap >= 0:
        return "holds"
    if gap < -K_SIGMA * se:
        return "violated"
    return "inconclusive"


def _evaluate(
    name: str,
    p: float | None,
    ens: PathEnsemble,
    features: np.ndarray,
    lhs_fn: Callable,
    rhs_fn: Callable,
    tol_scale: float = 1.0,
    details: dict | None = None,
) -> MCReport:
    if ens.exact:
        m = ens.weights @ features
        lhs, rhs = float(lhs_fn(m)), float(rhs_fn(m))
        se_l = se_r = se_g = 0.0
    else:
        n = features.shape[0]
        m = features.mean(axis=0)
        lhs, rhs = float(lhs_fn(m)), float(rhs_fn(m))
        if n > 1:
            cov = np.atleast_2d(np.cov(features, rowvar=False)) / n
            gl, gr = _gradient(lhs_fn, m), _gradient(rhs_fn, m)
            se_l = float(math.sqrt(max(gl @ cov @ gl, 0.0)))
            se_r = float(math.sqrt(max(gr @ cov @ gr, 0.0)))
            dg = gr - gl
            se_g = float(math.sqrt(max(dg @ cov @ dg, 0.0)))
        else:
            se_l = se_r = se_g = float("inf")
    gap = rhs - lhs
    return MCReport(
        inequality=name,
        p=p,
        lhs=lhs,
        lhs_stderr=se_l,
        rhs=rhs,
        rhs_stderr=se_r,
        gap=gap,
        gap_stderr=se_g,
        verdict=_verdict(lhs, rhs, gap, se_g, tol_scale),
        n=ens.n,
        exact=ens.exact,
        details=details or {},
    )


def verify_doob_lp(source, p: float, tol_scale: float = 1.0) -> MCReport:
    """``E[max S^p] <= (p/(p-1))^p E[S_T^p]``."""
    p = validate_p(p)
    ens = _as_ensemble(source)
    q = p / (p - 1.0)
    F = np.column_stack((ens.running_max**p, ens.terminal**p))
    return _evaluate("doob-lp", p, ens, F, lambda m: m[0], lambda m: q**p * m[1], tol_scale)


def _xlogx(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def verify_doob_l1(source, tol_scale: float = 1.0) -> MCReport:
    """``E[max S] <= e/(e-1) (E[S_T log S_T] + E[S_0 (1 - log S_0)])``.

    Guaranteed for martingales and for submartingales with ``S_0 >= 1``.
    A submartingale drifting upward below 1 can break it (the chain
    0.1 -> 0.5 does); ``details["hedge_term"]`` then shows the positive
    expected hedge gain responsible.
    """
    ens = _as_ensemble(source)
    if np.any(ens.s0 <= 0):
        raise ValueError("the L^1 suite needs S_0 > 0 on every path")
    F = np.column_stack((ens.running_max, _xlogx(ens.terminal), ens.s0 * (1.0 - np.log(ens.s0))))
    details = {}
    if ens.hedge_l1 is not None:
        # the bound follows from the pathwise one only when this expectation is <= 0,
        # which a submartingale guarantees when its running max stays >= 1
        hedge = float(ens.weights @ ens.hedge_l1) if ens.exact else float(ens.hedge_l1.mean())
        details["hedge_term"] = hedge
    return _evaluate(
        "doob-l1", None, ens, F, lambda m: m[0], lambda m: E_CONST * (m[1] + m[2]), tol_scale, details
    )


def _strong(name, source, p, tol_scale):
    p = validate_p(p)
    ens = _as_ensemble(source)
    q = p / (p - 1.0)
    F = np.column_stack((ens.running_max**p, ens.terminal**p, ens.s0**p))
    return _evaluate(name, p, ens, F, lambda m: m[0], lambda m: q**p * m[1] - q * m[2], tol_scale)


def verify_strong_doob(source, p: float, tol_scale: float = 1.0) -> MCReport:
    """``E[max S^p] <= (p/(p-1))^p E[S_T^p] - p/(p-1) E[S_0^p]``."""
    return _strong("strong-doob", source, p, tol_scale)


def verify_cbp(source, tol_scale: float = 1.0) -> MCReport:
    """``E[max S^2] <= 4 E[S_T^2] - 2 E[S_0^2]`` (the strong form at p = 2)."""
    return _strong("cbp", source, 2.0, tol_scale)


def verify_optimal1(source, tol_scale: float = 1.0) -> MCReport:
    """``||max S||_2 <= ||S_T||_2 + ||S_T - S_0||_2``."""
    ens = _as_ensemble(source)
    F = np.column_stack((ens.running_max**2, ens.terminal**2, (ens.terminal - ens.s0) ** 2))
    return _evaluate(
        "optimal1", 2.0, ens, F,
        lambda m: math.sqrt(max(m[0], 0.0)),
        lambda m: math.sqrt(max(m[1], 0.0)) + math.sqrt(max(m[2], 0.0)),
        tol_scale,
    )


def verify_sharkdoob_lp(source, p: float, tol_scale: float = 1.0) -> MCReport:
    """``||max S||_p <= p/(p-1) ||S_T||_p - ||S_0||_p^p / ((p-1) ||max S||_p^(p-1))``.

    ``details`` carries the equivalent form ``psi(||max S||_p) <= ||S_T||_p``.
    """
    p = validate_p(p)
    ens = _as_ensemble(source)
    F = np.column_stack((ens.running_max**p, ens.terminal**p, ens.s0**p))
    m0 = (ens.weights @ F[:, 0]) if ens.exact else F[:, 0].mean()
    if m0 <= 0:
        raise ValueError("the sharp L^p suite requires S != 0")
    q = p / (p - 1.0)

    def lhs(m):
        return max(m[0], 0.0) ** (1.0 / p)

    def rhs(m):
        return q * max(m[1], 0.0) ** (1.0 / p) - m[2] / ((p - 1.0) * max(m[0], 1e-300) ** ((p - 1.0) / p))

    rep = _evaluate("sharkdoob-lp", p, ens, F, lhs, rhs, tol_scale)
    mm = (ens.weights @ F) if ens.exact else F.mean(axis=0)
    norm_max, norm_t, norm_0 = (float(v) ** (1.0 / p) for v in mm)
    rep.details = {"psi_lhs": psi(norm_max, norm_0, p), "psi_rhs": norm_t}
    return rep


def verify_quallp(model, p: float, tol_scale: float = 1.0) -> MCReport:
    """``E[max S^p] <= -q E[S_0^(p-1) A_T] + q E[max S^(p-1) S_T] - E[S_0^p]/(p-1)``
    with ``q = p/(p-1)`` and ``A`` the Doob compensator; exact on trees only."""
    if not isinstance(model, TreeModel):
        raise TypeError("the qualitative L^p suite needs a tree model (the compensator must be exact)")
    p = validate_p(p)
    ens = PathEnsemble.from_tree(model)
    q = p / (p - 1.0)
    F = np.column_stack((
        ens.running_max**p,
        ens.s0 ** (p - 1.0) * ens.compensator,
        ens.running_max ** (p - 1.0) * ens.terminal,
        ens.s0**p,
    ))
    return _evaluate(
        "quallp", p, ens, F,
        lambda m: m[0],
        lambda m: -q * m[1] + q * m[2] - m[3] / (p - 1.0),
        tol_scale,
        details={"martingale": bool(ens.martingale)},
    )


SUITES = {
    "doob-lp": (verify_doob_lp, True),
    "doob-l1": (verify_doob_l1, False),
    "strong-doob": (verify_strong_doob, True),
    "cbp": (verify_cbp, False),
    "optimal1": (verify_optimal1, False),
    "sharkdoob-lp": (verify_sharkdoob_lp, True),
    "quallp": (verify_quallp, True),
}
# suites valid for any source; quallp additionally needs a tree
ALL_SUITES = ("doob-lp", "doob-l1", "strong-doob", "cbp", "optimal1", "sharkdoob-lp")


def run_suites(source, suites: Sequence[str], ps: Sequence[float], tol_scale: float = 1.0) -> list[MCReport]:
    """Run suites in a fixed (suite, p) order; p-free suites run once."""
    ens = source if isinstance(source, TreeModel) else _as_ensemble(source)
    out = []
    for name in sorted(set(suites)):
        fn, takes_p = SUITES[name]
        if takes_p:
            for p in sorted(set(ps)):
                out.append(fn(ens, p, tol_scale=tol_scale))
        else:
            out.append(fn(ens, tol_scale=tol_scale))
    return out


# -- psi and its inverse -----------------------------------------------------

def psi(x: float, x0: float, p: float = 2.0) -> float:
    """``psi(x) = (p-1)/p x + x0^p / (p x^(p-1))``, increasing on ``[x0, inf)``."""
    return (p - 1.0) / p * x + x0**p / (p * x ** (p - 1.0))


def _bisect_psi(y: float, x0: float, p: float) -> float:
    lo, hi = x0, p / (p - 1.0) * y
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if psi(mid, x0, p) < y:
            lo = mid
        else:
            hi = mid
    return lo if abs(psi(lo, x0, p) - y) <= abs(psi(hi, x0, p) - y) else hi


def _newton_polish(x: float, y: float, x0: float, p: float, steps: int = 3) -> float:
    for _ in range(steps):
        d = (p - 1.0) / p * (1.0 - (x0 / x) ** p)
        if d <= 0:
            break
        nx = x - (psi(x, x0, p) - y) / d
        if not nx >= x0:
            break
        x = nx
    return x


def psi_invert(y: float, x0: float, p: float = 2.0) -> float:
    """The root ``x >= x0`` of ``psi(x) = y``.

    Closed forms for p = 2, 3, 4 (quadratic, trigonometric cubic and Ferrari
    quartic), monotone bisection otherwise.
    """
    p = float(p)
    if not x0 > 0:
        raise ValueError("x0 must be positive")
    if not p > 1:
        raise ValueError("p must be > 1")
    if y < x0:
        # a few ulps below x0 is rounding in psi(x0) = x0, not a domain error
        if x0 - y > 8 * np.finfo(float).eps * x0:
            raise ValueError(f"y={y!r} is below psi's range [x0, inf) with x0={x0!r}")
        return float(x0)
    if y == x0:
        return float(x0)
    if p == 2.0:
        return y + math.sqrt((y - x0) * (y + x0))
    if p == 3.0:
        c = min(max(1.0 - 2.0 * (x0 / y) ** 3, -1.0), 1.0)
        x = y / 2.0 + y * math.cos(math.acos(c) / 3.0)
        return _newton_polish(x, y, x0, p)
    if p == 4.0:
        # z = 1/x solves z^4 + qz + r = 0 with q = -4y/x0^4, r = 3/x0^4
        q = -4.0 * y / x0**4
        a = y * y / x0**8
        s = math.sqrt(max(y**4 / x0**16 - 1.0 / x0**12, 0.0))
        m = np.cbrt(a + s) + np.cbrt(a - s)
        w = math.sqrt(2.0 * m)
        c = -q / (2.0 * w)
        z = (w - math.sqrt(max(4.0 * c - 2.0 * m, 0.0))) / 2.0
        return _newton_polish(1.0 / z, y, x0, p)
    return _bisect_psi(y, x0, p)
