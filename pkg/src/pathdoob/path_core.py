"""Discrete trajectories, their running maximum and the summation-by-parts
identity behind every pathwise inequality in this package."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path as FsPath
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Path",
    "as_path",
    "running_max",
    "summation_by_parts",
    "identity_tolerance",
    "eval_on",
    "read_path",
    "write_path",
]


class Path:
    """Immutable finite trajectory ``s_0..s_T``.

    The running maximum is computed once at construction and cached, since
    nearly every consumer needs it.
    """

    __slots__ = ("_values", "_smax")

    def __init__(self, values: Iterable[float]):
        arr = np.array(values, dtype=float).ravel()
        if arr.size == 0:
            raise ValueError("path must contain at least one value")
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise ValueError(f"path value at index {bad[0]} is not finite: {arr[bad[0]]!r}")
        arr.flags.writeable = False
        smax = np.maximum.accumulate(arr)
        smax.flags.writeable = False
        self._values = arr
        self._smax = smax

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def running_max(self) -> np.ndarray:
        return self._smax

    @property
    def T(self) -> int:
        """Number of steps (length minus one)."""
        return self._values.size - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self._values)

    def __len__(self) -> int:
        return self._values.size

    def __iter__(self):
        return iter(self._values.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Path):
            return NotImplemented
        return np.array_equal(self._values, other._values)

    def __hash__(self) -> int:
        return hash(self._values.tobytes())

    def __repr__(self) -> str:
        return f"Path({self._values.tolist()!r})"

    def scaled(self, lam: float) -> "Path":
        return Path(lam * self._values)

    def require_nonnegative(self) -> None:
        neg = np.flatnonzero(self._values < 0)
        if neg.size:
            i = neg[0]
            raise ValueError(f"negative value {float(self._values[i])!r} at index {i}; a non-negative path is required")


def as_path(path: Path | Sequence[float] | np.ndarray) -> Path:
    return path if isinstance(path, Path) else Path(path)


def running_max(path: Path | Sequence[float]) -> np.ndarray:
    """Prefix maximum ``max(s_0..s_n)`` for every ``n``."""
    return as_path(path).running_max


def eval_on(h: Callable, x: np.ndarray) -> np.ndarray:
    """Evaluate ``h`` elementwise, accepting both vectorised and scalar callables."""
    try:
        with np.errstate(all="ignore"):
            out = np.asarray(h(x), dtype=float)
    except (TypeError, ValueError):
        out = None
    if out is None or out.shape != x.shape:
        out = np.array([float(h(v)) for v in x], dtype=float)
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise ValueError(f"integrand is not finite at running max value {x[bad[0]]!r}")
    return out


def identity_tolerance(path: Path, hvals: np.ndarray) -> float:
    """Tolerance for exact rearrangement identities on ``path``."""
    smax_abs = float(np.max(np.abs(path.values)))
    h_abs = float(np.max(np.abs(hvals))) if hvals.size else 0.0
    return 1e-9 * (1.0 + smax_abs * h_abs * path.T)


def summation_by_parts(path: Path | Sequence[float], h: Callable) -> tuple[float, float]:
    """Both sides of the running-max summation by parts identity.

    ``lhs = sum h(smax_i) (s_{i+1} - s_i)`` and
    ``rhs = sum h(smax_i) (smax_{i+1} - smax_i) + h(smax_T) (s_T - smax_T)``.
    They agree up to :func:`identity_tolerance`.
    """
    path = as_path(path)
    s, smax = path.values, path.running_max
    hv = eval_on(h, smax)
    lhs = float(np.dot(hv[:-1], np.diff(s)))
    rhs = float(np.dot(hv[:-1], np.diff(smax)) + hv[-1] * (s[-1] - smax[-1]))
    return lhs, rhs


# -- serialization -----------------------------------------------------------

def _parse_csv(text: str, source: str) -> list[float]:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader]
    if not rows or [c.strip() for c in rows[0]] != ["s"]:
        raise ValueError(f"{source}: line 1: expected header 's'")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 1:
            raise ValueError(f"{source}: line {lineno}: expected one value, got {len(row)}")
        try:
            values.append(float(row[0]))
        except ValueError:
            raise ValueError(f"{source}: line {lineno}: cannot parse {row[0]!r} as a number") from None
    return values


def read_path(filename: str | FsPath) -> Path:
    """Read a path from CSV (header ``s``) or JSON (``{"values": [...]}``)."""
    filename = FsPath(filename)
    text = filename.read_text()
    if filename.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{filename}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(doc, dict) or "values" not in doc:
            raise ValueError(f"{filename}: expected an object with key 'values'")
        values = doc["values"]
    else:
        values = _parse_csv(text, str(filename))
    return Path(values)


def write_path(path: Path, filename: str | FsPath) -> None:
    filename = FsPath(filename)
    if filename.suffix.lower() == ".json":
        filename.write_text(json.dumps({"values": path.values.tolist()}))
    else:
        lines = ["s"] + [repr(float(v)) for v in path.values]
        filename.write_text("\n".join(lines) + "\n")
