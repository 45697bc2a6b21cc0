"""Fixed-step RK4 sweeps for the state and the costate.

The costate equation ``lam' = -D_x f^T lam - phi_x`` is solved by
integrating the time-reversed variable ``lam_rev(s) = lam(T - s)`` forward
in ``s`` with the same RK4 routine as the state, then flipping the result.
States needed at RK4 midpoints are taken from the cubic Hermite dense
output of the forward sweep, which keeps both sweeps fourth order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .exceptions import IntegrationDivergedError
from .problem import ProblemSpec
from .signals import Grid, Signal, sup_distance

__all__ = [
    "rk4",
    "Trajectory",
    "CostateTrajectory",
    "forward_sweep",
    "backward_sweep",
    "integrate_costate",
    "pmp_residual",
]


def rk4(fun, y0, h: float, steps: int):
    """Classical RK4 on a uniform grid.

    ``fun(m, stage, y)`` evaluates the vector field on step ``m`` at the
    step start (``stage=0``), midpoint (``1``) or end (``2``), so callers
    can freeze time-dependent inputs per step.

    Returns the ``(steps + 1, n)`` solution array and the first-stage slopes
    ``(steps, n)``.
    """
    y = np.array(y0, dtype=float).reshape(-1)
    ys = np.empty((steps + 1, y.size))
    k1s = np.empty((steps, y.size))
    ys[0] = y
    h2, h6 = 0.5 * h, h / 6.0
    for m in range(steps):
        k1 = fun(m, 0, y)
        k2 = fun(m, 1, y + h2 * k1)
        k3 = fun(m, 1, y + h2 * k2)
        k4 = fun(m, 2, y + h * k3)
        y = y + h6 * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationDivergedError(f"non-finite value at step {m + 1}", node=m + 1)
        ys[m + 1] = y
        k1s[m] = k1
    return ys, k1s


def _vec(a) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1)


def _mat(a, n: int) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(n, -1)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Forward state solution with Hermite dense output.

    ``dleft[j]`` and ``dright[j]`` are the state derivatives at the two
    ends of step ``j`` using the control seen on that step.
    """

    state: Signal
    control: Signal
    dleft: np.ndarray
    dright: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.state.grid

    @cached_property
    def midpoints(self) -> np.ndarray:
        x = self.state.values
        return 0.5 * (x[:-1] + x[1:]) + (self.grid.h / 8.0) * (self.dleft - self.dright)

    def dense(self, t: float) -> np.ndarray:
        """Cubic Hermite interpolant of the state at time ``t``."""
        g = self.grid
        if not (0.0 <= t <= g.T):
            raise ValueError(f"time {t} outside [0, {g.T}]")
        j = min(int(t / g.h), g.N - 1)
        s = t / g.h - j
        x = self.state.values
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return h00 * x[j] + h10 * g.h * self.dleft[j] + h01 * x[j + 1] + h11 * g.h * self.dright[j]


@dataclass(frozen=True, eq=False)
class CostateTrajectory:
    costate: Signal


def _check_in_box(spec: ProblemSpec, u: Signal):
    if u.dim != spec.k:
        raise ValueError(f"control has dimension {u.dim}, problem expects {spec.k}")
    box = spec.control_box
    if not (np.all(u.values >= box.lower - 1e-9) and np.all(u.values <= box.upper + 1e-9)):
        raise ValueError("control values leave the control box")


def forward_sweep(
    spec: ProblemSpec, u: Signal, grid: Optional[Grid] = None, x0=None
) -> Trajectory:
    """Integrate ``x' = f(t, x, u)`` from ``x0`` with RK4 at step ``T/N``.

    Stages inside step ``j`` see the control through the signal's
    interpolation rule; a piecewise-constant control is ``u(t_j)`` on the
    whole step.
    """
    if not isinstance(u, Signal):
        if grid is None:
            raise ValueError("a grid is required when u is not a Signal")
        u = Signal(grid, u)
    elif grid is not None and grid != u.grid:
        raise ValueError("control grid does not match the requested grid")
    _check_in_box(spec, u)
    grid = u.grid
    t, h, N = grid.times, grid.h, grid.N
    tm = t[:-1] + 0.5 * h
    ul, um, ur = u.step_samples()
    f = spec.f
    stage_t = (t[:-1], tm, t[1:])
    stage_u = (ul, um, ur)

    def rhs(m, stage, y):
        return _vec(f(stage_t[stage][m], y, stage_u[stage][m]))

    x_init = spec.x0 if x0 is None else _vec(x0)
    xs, k1s = rk4(rhs, x_init, h, N)
    if u.interpolation == "constant":
        dright = np.array([_vec(f(t[j + 1], xs[j + 1], ur[j])) for j in range(N)])
    else:
        dright = np.empty_like(k1s)
        dright[:-1] = k1s[1:]
        dright[-1] = _vec(f(t[N], xs[N], ur[N - 1]))
    return Trajectory(Signal(grid, xs, "linear"), u, k1s, dright)


def _stage_fields(spec: ProblemSpec, traj: Trajectory, fun, shape_n: Optional[int]):
    """Evaluate ``fun(t, x, u)`` at the left, mid and right stage of every step."""
    g = traj.grid
    t, N = g.times, g.N
    x, xm = traj.state.values, traj.midpoints
    u = traj.control
    ul, um, ur = u.step_samples()
    conv = _vec if shape_n is None else (lambda a: _mat(a, shape_n))
    nodes = [conv(fun(t[j], x[j], ul[j] if j < N else ur[N - 1])) for j in range(N + 1)]
    left = np.array(nodes[:-1])
    if u.interpolation == "constant":
        right = np.array([conv(fun(t[j + 1], x[j + 1], ur[j])) for j in range(N)])
    else:
        right = np.array(nodes[1:])
    mid = np.array([conv(fun(t[j] + 0.5 * g.h, xm[j], um[j])) for j in range(N)])
    return left, mid, right


def integrate_costate(
    spec: ProblemSpec,
    traj: Trajectory,
    forcing: Optional[Signal] = None,
    terminal=None,
) -> CostateTrajectory:
    """Solve ``lam' = -D_x f^T lam - v`` backward from ``lam(T) = terminal``.

    ``forcing`` is the signal ``v``; by default ``v = phi_x`` along the
    trajectory. ``terminal`` defaults to ``psi_x(x(T))``.
    """
    n, N, h = spec.n, traj.grid.N, traj.grid.h
    A = _stage_fields(spec, traj, spec.dxf, n)
    if forcing is None:
        V = _stage_fields(spec, traj, spec.phix, None)
    else:
        if forcing.grid != traj.grid or forcing.dim != n:
            raise ValueError("forcing signal must share the trajectory grid and state dimension")
        V = forcing.step_samples()
    if terminal is None:
        terminal = spec.psix(traj.state.values[-1])
    terminal = _vec(terminal)
    # reversed step m covers original step N-1-m, entered from its right end
    AT = tuple(np.ascontiguousarray(np.swapaxes(a, 1, 2)) for a in (A[2], A[1], A[0]))
    VS = (V[2], V[1], V[0])

    def rhs(m, stage, y):
        j = N - 1 - m
        return AT[stage][j] @ y + VS[stage][j]

    lam_rev, _ = rk4(rhs, terminal, h, N)
    lam = lam_rev[::-1].copy()
    lam[-1] = terminal
    return CostateTrajectory(Signal(traj.grid, lam, "linear"))


def backward_sweep(
    spec: ProblemSpec,
    x: Trajectory,
    u: Optional[Signal] = None,
    grid: Optional[Grid] = None,
    terminal=None,
) -> CostateTrajectory:
    """Costate of PMP along ``x``: forcing ``phi_x``, terminal ``psi_x(x(T))``."""
    if u is not None and (u.grid != x.grid or not np.array_equal(u.values, x.control.values)):
        raise ValueError("control does not match the one used for the trajectory")
    if grid is not None and grid != x.grid:
        raise ValueError("grid does not match the trajectory grid")
    return integrate_costate(spec, x, terminal=terminal)


def pmp_residual(spec: ProblemSpec, u: Signal) -> float:
    """``sup_j ||u(t_j) - argmin_v H(t_j, x(t_j), lam(t_j), v)||_U``.

    Zero exactly when ``u`` is a fixed point of the discrete MSA map.
    """
    from .msa import msa_step

    return sup_distance(msa_step(spec, u).u_next, u, spec.control_norm)
