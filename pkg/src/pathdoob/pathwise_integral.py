"""Partition-limit pathwise integral for monotone integrands and the
continuous-time pathwise Doob inequality on sampled paths.

Continuous time only enters through grids. A :class:`SampledFunction` is
read as a cadlag function that is constant on ``[t_i, t_{i+1})``, so the
left limit at ``t_i`` is the value at ``t_{i-1}``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from pathlib import Path as FsPath
from typing import Callable, Sequence

import numpy as np

from pathdoob.path_core import Path
from pathdoob.pathwise_ineq import PathIneqReport, _lp_sides, _report, validate_p

__all__ = [
    "SampledFunction",
    "PartitionSequence",
    "IntegralEstimate",
    "resample",
    "pathwise_integral",
    "integration_by_parts_discrete",
    "check_cont_path_lp",
    "check_remark_cont_doob",
    "read_sampled",
    "write_sampled",
]

CONV_REL = 1e-6
CONV_WINDOW = 3


class SampledFunction:
    """Values of a cadlag function on a grid ``0 = t_0 < ... < t_N = T``."""

    __slots__ = ("times", "values")

    def __init__(self, times: Sequence[float], values: Sequence[float]):
        t = np.array(times, dtype=float).ravel()
        v = np.array(values, dtype=float).ravel()
        if t.size != v.size:
            raise ValueError(f"times and values differ in length ({t.size} vs {v.size})")
        if t.size < 1:
            raise ValueError("a sampled function needs at least one grid point")
        if t[0] != 0.0:
            raise ValueError(f"grid must start at t=0, got {t[0]!r}")
        steps = np.diff(t)
        bad = np.flatnonzero(~(steps > 0))
        if bad.size:
            raise ValueError(f"grid times must be strictly increasing (index {bad[0] + 1})")
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            raise ValueError(f"value at index {bad[0]} is not finite")
        t.flags.writeable = False
        v.flags.writeable = False
        self.times = t
        self.values = v

    @classmethod
    def from_callable(cls, fn: Callable, n_intervals: int, horizon: float = 1.0) -> "SampledFunction":
        t = np.linspace(0.0, horizon, n_intervals + 1)
        return cls(t, np.asarray(fn(t), dtype=float) * np.ones_like(t))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.times))) if self.times.size > 1 else 0.0

    def __len__(self) -> int:
        return self.times.size

    def running_max(self) -> "SampledFunction":
        return SampledFunction(self.times, np.maximum.accumulate(self.values))

    def map(self, fn: Callable) -> "SampledFunction":
        return SampledFunction(self.times, fn(self.values))

    def left_limits(self) -> np.ndarray:
        return np.concatenate((self.values[:1], self.values[:-1]))

    def at(self, t) -> np.ndarray:
        """Right-constant interpolation."""
        idx = np.searchsorted(self.times, t, side="right") - 1
        if np.any(idx < 0):
            raise ValueError("evaluation time before t=0")
        return self.values[idx]

    def as_path(self) -> Path:
        return Path(self.values)

    def same_grid(self, other: "SampledFunction") -> bool:
        return np.array_equal(self.times, other.times)


def resample(a: SampledFunction, b: SampledFunction) -> tuple[SampledFunction, SampledFunction]:
    """Bring two functions onto the union of their grids (right-constant)."""
    if a.same_grid(b):
        return a, b
    if a.horizon != b.horizon:
        raise ValueError(f"horizons differ ({a.horizon} vs {b.horizon})")
    t = np.union1d(a.times, b.times)
    return SampledFunction(t, a.at(t)), SampledFunction(t, b.at(t))


class PartitionSequence:
    """Finite partitions of a grid, stored as index arrays into it."""

    def __init__(self, partitions: Sequence[Sequence[int]]):
        self.partitions = [np.unique(np.asarray(p, dtype=np.intp)) for p in partitions]
        if not self.partitions:
            raise ValueError("partition sequence is empty")

    @classmethod
    def dyadic(cls, n_intervals: int, depths: Sequence[int] | None = None) -> "PartitionSequence":
        """Partitions with ``2^k`` (near-)equal cells for each depth ``k``.

        Depths coarser than the grid are dropped; the full grid is always
        appended last so the mesh reaches the grid resolution.
        """
        if n_intervals < 1:
            raise ValueError("grid must have at least one interval")
        if depths is None:
            depths = range(4, 15)
        parts = []
        for k in depths:
            if 2**k >= n_intervals:
                break
            parts.append(np.rint(np.linspace(0, n_intervals, 2**k + 1)).astype(np.intp))
        parts.append(np.arange(n_intervals + 1))
        return cls(parts)

    def __len__(self) -> int:
        return len(self.partitions)

    def __iter__(self):
        return iter(self.partitions)

    def meshes(self, times: np.ndarray) -> list[float]:
        return [float(np.max(np.diff(times[p]))) if p.size > 1 else 0.0 for p in self.partitions]

    def validate(self, times: np.ndarray) -> None:
        n = times.size - 1
        for k, p in enumerate(self.partitions):
            if p[0] != 0 or p[-1] != n:
                raise ValueError(f"partition {k} must contain both endpoints 0 and T")
            if p[-1] > n or p[0] < 0:
                raise ValueError(f"partition {k} has indices outside the grid")
        meshes = self.meshes(times)
        if any(b > a for a, b in zip(meshes, meshes[1:])):
            raise ValueError("partition meshes must be non-increasing")
        grid_mesh = float(np.max(np.diff(times))) if n > 0 else 0.0
        if meshes[-1] > grid_mesh:
            raise ValueError(
                f"partitions do not refine to the grid (final mesh {meshes[-1]:g} > grid mesh {grid_mesh:g})"
            )


@dataclass
class IntegralEstimate:
    value: float
    partition_values: list[float]
    converged: bool
    spread: float
    plain_value: float
    plain_partition_values: list[float]
    variant_gap: float
    meshes: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _monotone_direction(values: np.ndarray) -> int:
    d = np.diff(values)
    if np.all(d >= 0):
        return 1
    if np.all(d <= 0):
        return -1
    first = d[np.flatnonzero(d)[0]]
    bad = np.flatnonzero(d < 0) if first > 0 else np.flatnonzero(d > 0)
    raise ValueError(f"integrand is not monotone: direction changes at index {bad[0] + 1}")


def _left_sum(gv: np.ndarray, fv: np.ndarray, idx: np.ndarray) -> float:
    return float(np.dot(gv[idx[:-1]], np.diff(fv[idx])))


def pathwise_integral(
    g: SampledFunction,
    f: SampledFunction,
    partitions: PartitionSequence | None = None,
) -> IntegralEstimate:
    """Riemann-Stieltjes left sums of monotone ``g`` against ``f`` along refining partitions.

    ``value`` uses the left limits ``g_{t_i-}``; the plain ``g_{t_i}`` sums are
    reported alongside together with the final gap between the two.
    """
    g, f = resample(g, f)
    _monotone_direction(g.values)
    times = g.times
    if partitions is None:
        partitions = PartitionSequence.dyadic(times.size - 1)
    partitions.validate(times)
    g_minus = g.left_limits()
    sums = [_left_sum(g_minus, f.values, p) for p in partitions]
    plain = [_left_sum(g.values, f.values, p) for p in partitions]
    tail = sums[-CONV_WINDOW:]
    spread = max(tail) - min(tail)
    value = sums[-1]
    return IntegralEstimate(
        value=value,
        partition_values=sums,
        converged=bool(len(sums) >= CONV_WINDOW and spread <= CONV_REL * (1.0 + abs(value))),
        spread=spread,
        plain_value=plain[-1],
        plain_partition_values=plain,
        variant_gap=plain[-1] - value,
        meshes=partitions.meshes(times),
    )


def integration_by_parts_discrete(
    g: SampledFunction, f: SampledFunction, partition: Sequence[int] | None = None
) -> tuple[float, float]:
    """Both sides of discrete integration by parts along ``partition``.

    ``sum g_i df_i = -sum f_i dg_i + g_T f_T - g_0 f_0 - sum dg_i df_i``
    """
    if not g.same_grid(f):
        raise ValueError("g and f must share the same grid")
    if partition is None:
        idx = np.arange(g.times.size)
    else:
        arr = np.asarray(partition)
        if arr.dtype.kind == "f":
            idx = np.searchsorted(g.times, arr)
            if np.any(idx >= g.times.size) or not np.array_equal(g.times[idx], arr):
                raise ValueError("partition times are not grid points")
        else:
            idx = arr.astype(np.intp)
    gv, fv = g.values[idx], f.values[idx]
    dg, df = np.diff(gv), np.diff(fv)
    lhs = float(np.dot(gv[:-1], df))
    rhs = float(-np.dot(fv[:-1], dg) + gv[-1] * fv[-1] - gv[0] * fv[0] - np.dot(dg, df))
    return lhs, rhs


def _max_is_continuous(smax: np.ndarray, jump_tol: float) -> bool:
    # largest single-step rise of the running max relative to its total rise
    total = smax[-1] - smax[0]
    if total <= 0:
        return True
    return bool(np.max(np.diff(smax)) <= jump_tol * total)


def check_cont_path_lp(
    f: SampledFunction, p: float, jump_tol: float = 0.05, tol_scale: float = 1.0
) -> PathIneqReport:
    """Continuous-time pathwise L^p inequality evaluated on the grid of ``f``:

    ``fmax_T^p <= int p^{-1} h(fmax) df + p/(p-1) fmax_T^(p-1) f_T - f_0^p/(p-1)``.

    The integral is the left sum on the grid. Equality holds in the limit iff
    the running max is continuous; ``max_continuous`` flags whether the
    sampled running max looks continuous at resolution ``jump_tol``.
    """
    p = validate_p(p)
    path = f.as_path()
    path.require_nonnegative()
    s, smax = path.values, path.running_max
    integral = -p / (p - 1.0) * float(np.dot(np.power(smax[:-1], p - 1.0), np.diff(s)))
    lhs = smax[-1] ** p
    rhs = integral + p / (p - 1.0) * smax[-1] ** (p - 1.0) * s[-1] - s[0] ** p / (p - 1.0)
    return _report("cont-path-lp", p, lhs, rhs, tol_scale, max_continuous=_max_is_continuous(smax, jump_tol))


def check_remark_cont_doob(
    f: SampledFunction, p: float, jump_tol: float = 0.05, tol_scale: float = 1.0
) -> PathIneqReport:
    """``fmax_T^p <= -int p^2/(p-1) fmax^(p-1) df + (p/(p-1))^p f_T^p - p/(p-1) f_0^p``."""
    p = validate_p(p)
    path = f.as_path()
    path.require_nonnegative()
    lhs, rhs = _lp_sides(path, p)
    return _report(
        "cont-remark-lp", p, lhs, rhs, tol_scale,
        max_continuous=_max_is_continuous(path.running_max, jump_tol),
    )


def read_sampled(filename: str | FsPath) -> SampledFunction:
    """Read a CSV with columns ``t,value``."""
    text = FsPath(filename).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["t", "value"]:
        raise ValueError(f"{filename}: line 1: expected header 't,value'")
    t, v = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise ValueError(f"{filename}: line {lineno}: expected 2 columns, got {len(row)}")
        try:
            t.append(float(row[0]))
            v.append(float(row[1]))
        except ValueError:
            raise ValueError(f"{filename}: line {lineno}: cannot parse {row!r}") from None
    return SampledFunction(t, v)


def write_sampled(fn: SampledFunction, filename: str | FsPath) -> None:
    lines = ["t,value"] + [f"{t!r},{v!r}" for t, v in zip(fn.times.tolist(), fn.values.tolist())]
    FsPath(filename).write_text("\n".join(lines) + "\n")
