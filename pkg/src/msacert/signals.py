"""Uniform time grids, grid-sampled signals and box control sets."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.interpolate import CubicSpline

from .norms import NormKind, vector_norm

__all__ = [
    "Grid",
    "Signal",
    "BoxSet",
    "sup_distance",
    "reverse",
    "write_csv",
    "read_csv",
    "signal_to_csv",
    "node_norms",
    "zeros",
]

INTERPOLATIONS = ("constant", "linear", "cubic")


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``t_j = j T / N`` on ``[0, T]``."""

    T: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError(f"horizon must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"grid needs at least 2 steps, got {self.N}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)

    def refine(self, factor: int) -> "Grid":
        return Grid(self.T, self.N * factor)


class Signal:
    """Vector signal sampled at the ``N + 1`` nodes of a grid.

    Parameters
    ----------
    grid : Grid
    values : array_like, shape (N + 1, d) or (N + 1,)
        Node values. A 1-D array is read as a scalar signal.
    interpolation : {"constant", "linear", "cubic"}
        ``"constant"`` holds ``values[j]`` on ``[t_j, t_{j+1})``
        (piecewise-constant, left sample); ``"linear"`` interpolates
        linearly between nodes; ``"cubic"`` uses a not-a-knot cubic spline
        through the nodes.

    Signals are immutable; the value array is read-only.
    """

    __slots__ = ("grid", "values", "interpolation", "_spline", "_stages")

    def __init__(self, grid: Grid, values, interpolation: str = "linear"):
        v = np.array(values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != grid.N + 1:
            raise ValueError(f"expected {grid.N + 1} node values, got array of shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal values must be finite")
        if interpolation not in INTERPOLATIONS:
            raise ValueError(f"unknown interpolation {interpolation!r}")
        v.setflags(write=False)
        self.grid = grid
        self.values = v
        self.interpolation = interpolation
        self._spline = None
        self._stages = None

    @classmethod
    def constant(cls, grid: Grid, value, interpolation: str = "linear") -> "Signal":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(value, (grid.N + 1, 1)), interpolation)

    @classmethod
    def from_function(cls, grid: Grid, fun, interpolation: str = "linear") -> "Signal":
        return cls(grid, [np.atleast_1d(fun(t)) for t in grid.times], interpolation)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def with_values(self, values) -> "Signal":
        return Signal(self.grid, values, self.interpolation)

    def with_interpolation(self, interpolation: str) -> "Signal":
        return Signal(self.grid, self.values, interpolation)

    def _get_spline(self) -> CubicSpline:
        if self._spline is None:
            self._spline = CubicSpline(self.grid.times, self.values, axis=0)
        return self._spline

    def __call__(self, t: float) -> np.ndarray:
        return self.eval(t)

    def eval(self, t: float) -> np.ndarray:
        """Interpolated value at time ``t``; exact at nodes."""
        T, N = self.grid.T, self.grid.N
        if not (0.0 <= t <= T):
            raise ValueError(f"time {t} outside [0, {T}]")
        s = t / self.grid.h
        j = min(int(np.floor(s)), N)
        if self.interpolation == "constant" or j == N:
            return self.values[j].copy()
        if self.interpolation == "linear":
            a = s - j
            if a == 0.0:
                return self.values[j].copy()
            return (1.0 - a) * self.values[j] + a * self.values[j + 1]
        if s == j:
            return self.values[j].copy()
        return np.asarray(self._get_spline()(t), dtype=float)

    def step_samples(self):
        """Values seen by a one-step integrator on each grid step.

        Returns ``(left, mid, right)``, each of shape ``(N, d)``: the signal
        at ``t_j``, ``t_j + h/2`` and the left limit at ``t_{j+1}`` for the
        step ``[t_j, t_{j+1}]``. For piecewise-constant signals all three
        equal ``values[j]``.
        """
        if self._stages is None:
            v = self.values
            if self.interpolation == "constant":
                left = mid = right = v[:-1]
            elif self.interpolation == "linear":
                left, right = v[:-1], v[1:]
                mid = 0.5 * (left + right)
            else:
                left, right = v[:-1], v[1:]
                tm = self.grid.times[:-1] + 0.5 * self.grid.h
                mid = np.asarray(self._get_spline()(tm), dtype=float).reshape(left.shape)
            self._stages = (left, mid, right)
        return self._stages

    def __repr__(self):
        return f"Signal(N={self.grid.N}, T={self.grid.T}, dim={self.dim}, {self.interpolation})"


def _check_same_grid(u: Signal, v: Signal):
    if u.grid != v.grid:
        raise ValueError(f"grid mismatch: {u.grid} vs {v.grid}")
    if u.dim != v.dim:
        raise ValueError(f"dimension mismatch: {u.dim} vs {v.dim}")


def node_norms(s: Signal, kind: NormKind) -> np.ndarray:
    """Per-node norms of a signal."""
    w = kind.scale(s.dim)
    x = np.abs(s.values * w)
    if kind.p == 1:
        return x.sum(axis=1)
    if kind.p == 2:
        return np.sqrt((x * x).sum(axis=1))
    return x.max(axis=1)


def sup_distance(u: Signal, v: Signal, kind: NormKind) -> float:
    """Max over grid nodes of ``||u(t_j) - v(t_j)||``.

    This is the sup-in-time control distance restricted to the grid. For
    piecewise-constant and piecewise-linear signals the node max equals the
    continuum sup.
    """
    _check_same_grid(u, v)
    return float(node_norms(Signal(u.grid, u.values - v.values), kind).max())


def reverse(s: Signal) -> Signal:
    """Reverse a signal in time: node ``j`` takes the value of node ``N - j``."""
    return Signal(s.grid, s.values[::-1], s.interpolation)


@dataclass(frozen=True, eq=False)
class BoxSet:
    """Axis-aligned box ``{u : lower <= u <= upper}`` containing the origin."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).reshape(-1)
        hi = np.array(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("box bounds must be non-empty vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        if np.any(lo > 0) or np.any(hi < 0):
            raise ValueError("control box must contain the origin")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def symmetric(cls, radius, dim: int = 1) -> "BoxSet":
        r = np.broadcast_to(np.asarray(radius, dtype=float), (dim,))
        return cls(-r, r)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def clamp(self, u) -> np.ndarray:
        return np.clip(np.asarray(u, dtype=float), self.lower, self.upper)

    def contains(self, u, atol: float = 0.0) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower - atol) and np.all(u <= self.upper + atol))

    def max_norm(self, kind: NormKind) -> float:
        """``max_{u in box} ||u||``; weighted p-norms are monotone in ``|u_i|``."""
        return vector_norm(np.maximum(np.abs(self.lower), np.abs(self.upper)), kind)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = (self.dim,) if size is None else tuple(np.atleast_1d(size)) + (self.dim,)
        return self.lower + (self.upper - self.lower) * rng.random(shape)

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def signal_to_csv(s: Signal, names=None) -> str:
    """Render a signal as CSV text: header ``t,x_0,...``, 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if names is None:
        names = [f"x_{i}" for i in range(s.dim)]
    writer.writerow(["t", *names])
    for t, row in zip(s.grid.times, s.values):
        writer.writerow([f"{t:.17g}", *(f"{v:.17g}" for v in row)])
    return buf.getvalue()


def write_csv(path: Union[str, os.PathLike], s: Signal, names=None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(signal_to_csv(s, names))


def read_csv(path: Union[str, os.PathLike], interpolation: str = "linear") -> Signal:
    """Read a signal written by :func:`write_csv`; the grid must be uniform."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0].strip() != "t":
        raise ValueError("missing 't' header column")
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    t = data[:, 0]
    grid = Grid(t[-1], len(t) - 1)
    if t[0] != 0.0 or not np.allclose(t, grid.times, rtol=0, atol=1e-12 * max(1.0, grid.T)):
        raise ValueError("CSV time column is not a uniform grid starting at 0")
    return Signal(grid, data[:, 1:], interpolation)


def as_signal(grid: Grid, u, interpolation: str = "linear") -> Signal:
    if isinstance(u, Signal):
        return u
    return Signal(grid, u, interpolation)


def zeros(grid: Grid, dim: int, interpolation: str = "linear") -> Signal:
    return Signal(grid, np.zeros((grid.N + 1, dim)), interpolation)
