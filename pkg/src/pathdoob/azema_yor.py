"""Brownian motion from 1 stopped when it falls to ``1/alpha`` of its running
maximum, and the closed-form law of the stopped value.

The stopped value ``X = B_tau`` has density

    alpha^(-1/(alpha-1)) / (alpha-1) * x^(-(2 alpha - 1)/(alpha - 1))  on [1/alpha, inf),

i.e. ``alpha * X`` is Pareto with minimum 1 and tail index
``k = alpha/(alpha-1)``. Since the running max at ``tau`` equals
``alpha * X``, all the norms in the sharp Doob inequality follow from the
moments ``E[X^p] = alpha^(-p) k / (k - p)``, finite iff ``alpha < p/(p-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, optimize

from pathdoob.rng import AZEMA_YOR_STREAM, path_rng

__all__ = [
    "AlphaConfig",
    "StoppedBMSample",
    "StoppedBatch",
    "SharpnessReport",
    "mu_density",
    "mu_logpdf",
    "mu_cdf",
    "mu_quantile",
    "mu_moment",
    "mu_pnorm",
    "mu_pnorm_quad",
    "alpha_for_norm",
    "closed_form_norms",
    "has_finite_variance",
    "simulate_tau_alpha",
    "simulate_many",
    "equality_attainment_report",
]


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 1 or not math.isfinite(alpha):
        raise ValueError(f"alpha must be > 1, got {alpha!r}")
    return alpha


def _check_alpha_p(alpha: float, p: float) -> tuple[float, float]:
    alpha = float(alpha)
    p = float(p)
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p!r}")
    bound = p / (p - 1.0)
    if not 1 < alpha < bound:
        raise ValueError(
            f"alpha={alpha!r} must lie in (1, p/(p-1)) = (1, {bound:g}); "
            "outside this range the stopped value is not p-integrable"
        )
    return alpha, p


def _tail_index(alpha: float) -> float:
    return alpha / (alpha - 1.0)


def mu_logpdf(x, alpha: float):
    """Log of :func:`mu_density`; ``-inf`` below the support."""
    alpha = _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    inside = x >= 1.0 / alpha
    logc = -math.log(alpha) / (alpha - 1.0) - math.log(alpha - 1.0)
    expo = -(2.0 * alpha - 1.0) / (alpha - 1.0)
    out = np.where(inside, logc + expo * np.log(np.where(inside, x, 1.0)), -np.inf)
    return float(out) if out.ndim == 0 else out


def mu_density(x, alpha: float):
    out = np.exp(mu_logpdf(x, alpha))
    return float(out) if np.ndim(out) == 0 else out


def mu_cdf(x, alpha: float):
    """``F(x) = 1 - (alpha x)^(-alpha/(alpha-1))`` for ``x >= 1/alpha``."""
    alpha = _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    ax = np.maximum(alpha * x, 1.0)
    out = np.where(alpha * x >= 1.0, -np.expm1(-_tail_index(alpha) * np.log(ax)), 0.0)
    return float(out) if out.ndim == 0 else out


def mu_quantile(u, alpha: float):
    alpha = _check_alpha(alpha)
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u >= 1)):
        raise ValueError("quantile level must lie in [0, 1)")
    out = np.exp(-np.log1p(-u) / _tail_index(alpha)) / alpha
    return float(out) if out.ndim == 0 else out


def mu_moment(p: float, alpha: float) -> float:
    """``E[X^p]`` in closed form, for any ``0 < p < alpha/(alpha-1)``."""
    alpha = _check_alpha(alpha)
    p = float(p)
    k = _tail_index(alpha)
    if not 0 < p < k:
        raise ValueError(f"moment of order {p!r} needs 0 < p < alpha/(alpha-1) = {k:g}")
    return alpha ** (-p) * k / (k - p)


def mu_pnorm(p: float, alpha: float) -> float:
    alpha, p = _check_alpha_p(alpha, p)
    return mu_moment(p, alpha) ** (1.0 / p)


def mu_pnorm_quad(p: float, alpha: float) -> float:
    """Quadrature cross-check of :func:`mu_pnorm`.

    Integrates ``x^p`` against :func:`mu_density` in the variable
    ``t = (k - p) log(alpha x)`` (``k`` the tail index), which turns the
    heavy tail into an integrand decaying like ``exp(-t)``.
    """
    alpha, p = _check_alpha_p(alpha, p)
    rate = _tail_index(alpha) - p

    # x = exp(t / rate) / alpha,  dx = x dt / rate
    def integrand(t):
        logx = t / rate - math.log(alpha)
        x = math.exp(logx) if logx < 700.0 else math.inf
        return math.exp((p + 1.0) * logx + mu_logpdf(x, alpha)) / rate if x < math.inf else 0.0

    val, _ = integrate.quad(integrand, 0.0, math.inf, epsabs=0.0, epsrel=1e-13, limit=500)
    return val ** (1.0 / p)


def closed_form_norms(p: float, alpha: float) -> dict[str, float]:
    """Both sides of the sharp L^p inequality (and the L^2 form) for ``S_0 = 1``."""
    alpha, p = _check_alpha_p(alpha, p)
    norm_st = mu_pnorm(p, alpha)
    norm_max = alpha * norm_st
    rhs = p / (p - 1.0) * norm_st - 1.0 / ((p - 1.0) * norm_max ** (p - 1.0))
    out = {
        "norm_ST": norm_st,
        "norm_SbarT": norm_max,
        "rhs_sharkdoob": rhs,
        "gap": rhs - norm_max,
    }
    if p == 2.0:
        # S_0 = 1 and E[S_T] = 1, so ||S_T - S_0||_2^2 = E[S_T^2] - 1
        out["rhs_optimal1"] = norm_st + math.sqrt(max(norm_st**2 - 1.0, 0.0))
        out["gap_optimal1"] = out["rhs_optimal1"] - norm_max
    return out


def alpha_for_norm(x0: float, x1: float, p: float) -> float:
    """The ``alpha`` whose stopped value, scaled by ``x0``, has p-norm ``x1``."""
    if not 0 < x0 <= x1:
        raise ValueError("need 0 < x0 <= x1")
    target = x1 / x0
    if target == 1.0:
        return 1.0
    hi = p / (p - 1.0)
    f = lambda a: math.log(mu_pnorm(p, a)) - math.log(target)
    lo_a, hi_a = 1.0 + 1e-12, hi - 1e-12 * hi
    if f(hi_a) < 0:
        raise ValueError("target norm ratio too large to reach numerically")
    return optimize.brentq(f, lo_a, hi_a, xtol=1e-15, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class AlphaConfig:
    alpha: float
    p: float = 2.0
    dt: float = 1e-4
    t_max: float = 1e3
    seed: int = 0
    bridge_correction: bool = True

    def __post_init__(self):
        _check_alpha_p(self.alpha, self.p)
        if not (self.dt > 0 and self.t_max > 0):
            raise ValueError("dt and t_max must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class StoppedBMSample:
    path: np.ndarray | None
    running_max: float
    stop_index: int
    terminal: float
    capped: bool

    @property
    def ratio(self) -> float:
        """``running_max / terminal``; equals alpha for a continuous crossing."""
        return self.running_max / self.terminal


_CHUNK0 = 2048
_CHUNK_MAX = 1 << 20


def simulate_tau_alpha(config: AlphaConfig, index: int, keep_path: bool = True) -> StoppedBMSample:
    """Gaussian random walk from 1 with step variance ``dt``, stopped at the
    first crossing of ``running_max / alpha`` or at ``t_max``.

    With ``bridge_correction`` each step is treated as a Brownian bridge:
    the running max includes an exact draw of the bridge maximum, and the
    walk stops inside a step with the bridge probability
    ``exp(-2 (a - L)(b - L) / dt)`` of touching the barrier ``L``, in which
    case the terminal value is ``L`` itself. Without it the walk stops at
    the first grid point at or below the barrier, overshooting it.
    """
    alpha, dt = config.alpha, config.dt
    rng = path_rng(config.seed, index, AZEMA_YOR_STREAM)
    sd = math.sqrt(dt)
    nmax = max(int(round(config.t_max / dt)), 1)
    b, m, n = 1.0, 1.0, 0
    chunk = _CHUNK0
    pieces = [np.ones(1)] if keep_path else None
    while n < nmax:
        k = min(chunk, nmax - n)
        z = rng.standard_normal(k)
        x = b + np.cumsum(z) * sd
        if config.bridge_correction:
            u = rng.random((2, k))
            a = np.concatenate(([b], x[:-1]))
            bridge_max = 0.5 * (a + x + np.sqrt((x - a) ** 2 - 2.0 * dt * np.log1p(-u[0])))
            mx = np.maximum(np.maximum.accumulate(bridge_max), m)
            prev_max = np.concatenate(([m], mx[:-1]))
            barrier = prev_max / alpha
            da, db = a - barrier, x - barrier
            with np.errstate(over="ignore"):
                touch = np.where((da > 0) & (db > 0), np.exp(-2.0 * da * db / dt), 1.0)
            hit = np.flatnonzero((u[1] < touch) | (x <= mx / alpha))
        else:
            mx = np.maximum(np.maximum.accumulate(x), m)
            hit = np.flatnonzero(x <= mx / alpha)
        if hit.size:
            j = int(hit[0])
            if not config.bridge_correction:
                terminal, top = float(x[j]), float(mx[j])
            elif u[1, j] < touch[j]:
                terminal, top = float(barrier[j]), float(prev_max[j])
            else:
                # the bridge max lifted the barrier above the grid value
                terminal, top = float(mx[j] / alpha), float(mx[j])
            if keep_path:
                seg = x[: j + 1].copy()
                seg[-1] = terminal
                pieces.append(seg)
            return StoppedBMSample(
                np.concatenate(pieces) if keep_path else None, top, n + j + 1, terminal, False
            )
        if keep_path:
            pieces.append(x)
        b, m, n = float(x[-1]), float(mx[-1]), n + k
        chunk = min(2 * chunk, _CHUNK_MAX)
    return StoppedBMSample(np.concatenate(pieces) if keep_path else None, m, n, b, True)


@dataclass
class StoppedBatch:
    """Terminal values, running maxima, stop indices and cap flags of many samples."""

    terminal: np.ndarray
    running_max: np.ndarray
    stop_index: np.ndarray
    capped: np.ndarray

    @property
    def capped_fraction(self) -> float:
        return float(self.capped.mean()) if self.capped.size else 0.0

    def uncapped(self) -> "StoppedBatch":
        keep = ~self.capped
        return StoppedBatch(self.terminal[keep], self.running_max[keep], self.stop_index[keep], self.capped[keep])


def _simulate_block(config: AlphaConfig, start: int, stop: int) -> np.ndarray:
    out = np.empty((stop - start, 4))
    for row, idx in enumerate(range(start, stop)):
        s = simulate_tau_alpha(config, idx, keep_path=False)
        out[row] = (s.terminal, s.running_max, s.stop_index, s.capped)
    return out


def simulate_many(config: AlphaConfig, n: int, n_jobs: int = 1, start: int = 0) -> StoppedBatch:
    """Samples ``start .. start+n-1``; identical for every ``n_jobs``."""
    if n_jobs == 1 or n < 2:
        arr = _simulate_block(config, start, start + n)
    else:
        from joblib import Parallel, delayed

        n_workers = n_jobs if n_jobs > 0 else None
        edges = np.linspace(start, start + n, 4 * (n_workers or 8) + 1).astype(int)
        blocks = Parallel(n_jobs=n_jobs)(
            delayed(_simulate_block)(config, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a
        )
        arr = np.concatenate(blocks)
    return StoppedBatch(arr[:, 0], arr[:, 1], arr[:, 2].astype(np.int64), arr[:, 3].astype(bool))


@dataclass
class SharpnessReport:
    alpha: float
    p: float
    closed_form: dict
    mc_norm_ST: float
    mc_norm_SbarT: float
    mc_stderr: float
    capped_fraction: float
    sharkdoob: object = None
    optimal1: object = None

    def row(self) -> dict:
        """One row of the sharpness CSV."""
        cf = self.closed_form
        return {
            "alpha": self.alpha,
            "p": self.p,
            "norm_ST": cf["norm_ST"],
            "norm_SbarT": cf["norm_SbarT"],
            "rhs_sharkdoob": cf["rhs_sharkdoob"],
            "gap": cf["gap"],
            "mc_norm_ST": self.mc_norm_ST,
            "mc_norm_SbarT": self.mc_norm_SbarT,
            "mc_stderr": self.mc_stderr,
            "capped_fraction": self.capped_fraction,
        }


def has_finite_variance(p: float, alpha: float) -> bool:
    """Whether ``X^p`` has finite variance, i.e. ``2p < alpha/(alpha-1)``.

    Otherwise sample p-th moments converge slower than ``n^(-1/2)`` and a
    plug-in standard error is meaningless.
    """
    return 2.0 * p < _tail_index(alpha)


def _without_stderr(rep):
    # with an infinite-variance feature a negative gap cannot be called significant
    verdict = rep.verdict if rep.gap >= 0 else "inconclusive"
    details = {**rep.details, "stderr": "undefined: the 2p-th moment of the stopped value is infinite"}
    return replace(
        rep, lhs_stderr=math.inf, rhs_stderr=math.inf, gap_stderr=math.inf, verdict=verdict, details=details
    )


def equality_attainment_report(config: AlphaConfig, n_samples: int, n_jobs: int = 1) -> SharpnessReport:
    """Closed-form and Monte Carlo sides of the sharp Doob inequality for
    the stopped Brownian motion; the closed-form gap is zero.

    Capped samples are excluded from the Monte Carlo statistics and their
    share is reported. ``mc_stderr`` is the delta-method standard error of
    the estimated ``||S_T||_p``; it is infinite (and Monte Carlo verdicts
    are never ``violated``) when ``X^p`` has infinite variance, see
    :func:`has_finite_variance`.
    """
    from pathdoob.verification import PathEnsemble, verify_optimal1, verify_sharkdoob_lp

    cf = closed_form_norms(config.p, config.alpha)
    if n_samples <= 0:
        nan = float("nan")
        return SharpnessReport(config.alpha, config.p, cf, nan, nan, nan, 0.0)
    batch = simulate_many(config, n_samples, n_jobs=n_jobs)
    ok = batch.uncapped()
    p = config.p
    xp = ok.terminal**p
    m = float(xp.mean())
    norm_st = m ** (1.0 / p)
    se_moment = float(xp.std(ddof=1) / math.sqrt(xp.size)) if xp.size > 1 else float("nan")
    se_norm = norm_st / (p * m) * se_moment
    ens = PathEnsemble.from_stopped(ok)
    shark = verify_sharkdoob_lp(ens, p)
    opt = verify_optimal1(ens) if p == 2.0 else None
    if not has_finite_variance(p, config.alpha):
        se_norm = math.inf
        shark = _without_stderr(shark)
        opt = _without_stderr(opt) if opt is not None else None
    return SharpnessReport(
        config.alpha,
        p,
        cf,
        norm_st,
        float(np.mean(ok.running_max**p) ** (1.0 / p)),
        se_norm,
        batch.capped_fraction,
        shark,
        opt,
    )
