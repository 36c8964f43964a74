"""Exact per-trajectory checkers for the deterministic Doob inequalities.

Every checker returns a :class:`PathIneqReport`. The inequalities are
theorems, so ``holds`` is always true for valid input; a false verdict
beyond tolerance points at a bug, not at an unlucky path.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from pathdoob.path_core import Path, as_path, eval_on

__all__ = [
    "PathIneqReport",
    "check_tolerance",
    "validate_p",
    "check_path_l2",
    "check_path_lp",
    "check_path_l1",
    "hedge_value",
    "super_replication_check",
    "eval_g",
    "doob_hedge",
]

E_CONST = math.e / (math.e - 1.0)
MIN_P = 1.0 + 1e-6


@dataclass(frozen=True)
class PathIneqReport:
    inequality: str
    p: float | None
    lhs: float
    rhs: float
    slack: float
    holds: bool
    degenerate: bool = False
    # only set by the continuous-time checkers
    max_continuous: bool | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["max_continuous"] is None:
            del d["max_continuous"]
        for key in ("lhs", "rhs", "slack"):
            if not math.isfinite(d[key]):
                d[key] = None
        return d


def check_tolerance(lhs: float, rhs: float, tol_scale: float = 1.0) -> float:
    return tol_scale * 1e-9 * (1.0 + abs(lhs) + abs(rhs))


def _report(name, p, lhs, rhs, tol_scale, degenerate=False, **extra) -> PathIneqReport:
    slack = rhs - lhs
    if math.isinf(rhs) and rhs > 0:
        holds = True
    else:
        holds = slack >= -check_tolerance(lhs, rhs, tol_scale)
    return PathIneqReport(name, p, float(lhs), float(rhs), float(slack), bool(holds), degenerate, **extra)


def validate_p(p: float) -> float:
    p = float(p)
    if not math.isfinite(p) or p <= MIN_P:
        raise ValueError(
            f"exponent p={p!r} must satisfy p > 1 + 1e-6; use check_path_l1 for the p = 1 case"
        )
    return p


def doob_hedge(p: float) -> Callable[[np.ndarray], np.ndarray]:
    """The hedging integrand ``h(x) = -p^2/(p-1) x^(p-1)``."""
    coef = -p * p / (p - 1.0)
    return lambda x: coef * np.power(x, p - 1.0)


def check_path_l2(path: Path | Sequence[float], tol_scale: float = 1.0) -> PathIneqReport:
    """``smax_T^2 + 4 sum smax_n (s_{n+1} - s_n) <= 4 s_T^2``; real paths allowed."""
    path = as_path(path)
    s, smax = path.values, path.running_max
    lhs = smax[-1] ** 2 + 4.0 * float(np.dot(smax[:-1], np.diff(s)))
    rhs = 4.0 * s[-1] ** 2
    return _report("path-l2", None, lhs, rhs, tol_scale)


def _lp_sides(path: Path, p: float) -> tuple[float, float]:
    s, smax = path.values, path.running_max
    q = p / (p - 1.0)
    gain = -p * q * float(np.dot(np.power(smax[:-1], p - 1.0), np.diff(s)))
    lhs = smax[-1] ** p
    rhs = gain - q * s[0] ** p + (q * s[-1]) ** p
    return lhs, rhs


def check_path_lp(path: Path | Sequence[float], p: float, tol_scale: float = 1.0) -> PathIneqReport:
    """Pathwise Doob L^p inequality for a non-negative path.

    ``smax_T^p <= sum h(smax_i) ds_i - p/(p-1) s_0^p + (p/(p-1))^p s_T^p``
    with ``h(x) = -p^2/(p-1) x^(p-1)``.
    """
    p = validate_p(p)
    path = as_path(path)
    path.require_nonnegative()
    lhs, rhs = _lp_sides(path, p)
    return _report("path-lp", p, lhs, rhs, tol_scale)


def check_path_l1(path: Path | Sequence[float], tol_scale: float = 1.0) -> PathIneqReport:
    """Pathwise Doob L^1 (L log L) inequality with ``h(x) = -log x``.

    A path starting at zero is reported as degenerate: either it never
    leaves zero (both sides vanish) or the first positive step carries an
    infinite hedge term and the bound holds trivially.
    """
    path = as_path(path)
    path.require_nonnegative()
    s, smax = path.values, path.running_max
    lhs = float(smax[-1])
    if s[0] == 0.0:
        if smax[-1] == 0.0:
            return _report("path-l1", None, 0.0, 0.0, tol_scale, degenerate=True)
        return _report("path-l1", None, lhs, math.inf, tol_scale, degenerate=True)
    sT = s[-1]
    sT_log_sT = sT * math.log(sT) if sT > 0 else 0.0
    gain = -float(np.dot(np.log(smax[:-1]), np.diff(s)))
    rhs = E_CONST * (gain + sT_log_sT + s[0] * (1.0 - math.log(s[0])))
    return _report("path-l1", None, lhs, rhs, tol_scale)


def hedge_value(path: Path | Sequence[float], h: Callable) -> float:
    """Gain ``sum h(smax_n)(s_{n+1} - s_n)`` of holding ``h(smax_n)`` units over (n, n+1]."""
    path = as_path(path)
    hv = eval_on(h, path.running_max[:-1])
    return float(np.dot(hv, path.increments))


def super_replication_check(
    path: Path | Sequence[float], p: float, tol_scale: float = 1.0
) -> PathIneqReport:
    """Does buying ``(p/(p-1))^p`` claims on ``S_T^p``, paying ``p/(p-1) s_0^p``
    and trading ``h(smax)`` cover the lookback payoff ``smax_T^p``?

    ``slack`` is the super-replication surplus.
    """
    p = validate_p(p)
    path = as_path(path)
    path.require_nonnegative()
    q = p / (p - 1.0)
    gain = hedge_value(path, doob_hedge(p))
    payoff = float(path.running_max[-1] ** p)
    portfolio = gain + (q * path.values[-1]) ** p - q * path.values[0] ** p
    return _report("super-replication", p, payoff, portfolio, tol_scale)


def eval_g(c, p: float):
    """``g(c) = (p-1) - p^2/(p-1) c + (p/(p-1))^p c^p``; non-negative with
    its zero at ``c = (p-1)/p``."""
    p = validate_p(p)
    c_arr = np.asarray(c, dtype=float)
    if np.any(c_arr < 0):
        raise ValueError("c must be non-negative")
    out = (p - 1.0) - p * p / (p - 1.0) * c_arr + np.power(p * c_arr / (p - 1.0), p)
    return float(out) if out.ndim == 0 else out
