"""Independent reference solutions: LQR via the Riccati ODE and a direct method.

Neither path shares code with the MSA iteration beyond the problem
callbacks and the forward/backward sweeps used by the direct method's
gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import IntegrationDivergedError
from .msa import _cost_from_trajectory
from .problem import ProblemSpec
from .signals import Grid, Signal, sup_distance, zeros
from .sweep import Trajectory, backward_sweep, forward_sweep, rk4

__all__ = ["LqrSpec", "RiccatiSolution", "riccati_solve", "direct_solve", "DirectResult"]


def _sym_psd(M: np.ndarray, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-12):
        raise ValueError(f"{name} must be square and symmetric")
    if np.linalg.eigvalsh(M)[0] < -1e-12:
        raise ValueError(f"{name} must be positive semidefinite")
    return M


@dataclass(frozen=True, eq=False)
class LqrSpec:
    """``x' = A x + B u`` with cost ``int (x'Qx + u'Ru)/2 dt + x(T)' P_T x(T) / 2``."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P_T: np.ndarray
    x0: np.ndarray
    T: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(n, -1)
        Q = _sym_psd(self.Q, "Q")
        P_T = _sym_psd(self.P_T, "P_T")
        R = _sym_psd(self.R, "R")
        try:
            np.linalg.cholesky(R)
        except np.linalg.LinAlgError:
            raise ValueError("R must be positive definite") from None
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if A.shape != (n, n) or Q.shape != (n, n) or P_T.shape != (n, n) or x0.size != n:
            raise ValueError("inconsistent LQR dimensions")
        if R.shape != (B.shape[1], B.shape[1]):
            raise ValueError("R must be k x k")
        for name, val in zip("A B Q R P_T x0".split(), (A, B, Q, R, P_T, x0)):
            object.__setattr__(self, name, val)
        if not self.T > 0:
            raise ValueError("horizon must be positive")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return self.B.shape[1]


class RiccatiSolution(NamedTuple):
    P: np.ndarray  # (N + 1, n, n) at the grid nodes
    u_star: Signal
    x_star: Trajectory


def riccati_solve(lqr: LqrSpec, grid: Grid) -> RiccatiSolution:
    """Finite-horizon LQR by RK4 on ``-P' = A'P + PA - P B R^-1 B' P + Q``.

    The Riccati equation is integrated backward from ``P(T) = P_T`` on a
    grid of half the step so the closed-loop RK4 pass sees ``P`` at its
    stage times. The optimal control is returned as a cubic-spline signal.
    """
    if abs(grid.T - lqr.T) > 1e-12 * lqr.T:
        raise ValueError("grid horizon differs from the LQR horizon")
    A, B, Q, n = lqr.A, lqr.B, lqr.Q, lqr.n
    Rinv = np.linalg.inv(lqr.R)
    S = B @ Rinv @ B.T

    def riccati_rev(m, stage, y):
        P = y.reshape(n, n)
        return (A.T @ P + P @ A - P @ S @ P + Q).ravel()

    fine = 2 * grid.N
    Prev, _ = rk4(riccati_rev, lqr.P_T.ravel(), grid.h / 2.0, fine)
    Pf = Prev[::-1].reshape(fine + 1, n, n)
    Pf = 0.5 * (Pf + np.swapaxes(Pf, 1, 2))
    K = np.einsum("ij,tjk->tik", Rinv @ B.T, Pf)  # gain u = -K x
    Acl = A[None] - np.einsum("ij,tjk->tik", B, K)
    # Acl[2j], Acl[2j+1], Acl[2j+2] are the left, mid and right stages of step j
    def closed_loop(m, stage, y):
        return Acl[2 * m + stage] @ y

    xs, k1s = rk4(closed_loop, lqr.x0, grid.h, grid.N)
    P = Pf[::2]
    us = -np.einsum("tij,tj->ti", K[::2], xs)
    if not np.all(np.isfinite(us)):
        raise IntegrationDivergedError("Riccati solution is not finite")
    dright = np.einsum("tij,tj->ti", Acl[2::2], xs[1:])
    u_star = Signal(grid, us, "cubic")
    x_star = Trajectory(Signal(grid, xs, "linear"), u_star, k1s, dright)
    return RiccatiSolution(P, u_star, x_star)


class DirectResult(NamedTuple):
    control: Signal
    cost: float
    iterations: int
    step_size: float


def _gradient(spec: ProblemSpec, traj: Trajectory) -> np.ndarray:
    lam = backward_sweep(spec, traj).costate.values
    x = traj.state.values
    u = traj.control.values
    t = traj.grid.times
    g = np.empty_like(u)
    for j in range(len(t)):
        duf = np.asarray(spec.duf(t[j], x[j], u[j]), dtype=float).reshape(spec.n, spec.k)
        g[j] = duf.T @ lam[j] + spec.grad_phi_u(t[j], x[j], u[j])
    return g


def direct_solve(
    spec: ProblemSpec,
    grid: Grid,
    steps: int = 500,
    step_size: Optional[float] = None,
    u0: Optional[Signal] = None,
    tol: float = 1e-12,
    seed: int = 0,
    full_output: bool = False,
):
    """Projected gradient descent on the discretized cost over nodal controls.

    The search direction at node ``j`` is ``dH/du = D_u f' lam + phi_u``
    from one forward and one backward sweep. The step starts at
    ``1 / L_est`` (``L_est`` a sampled Lipschitz estimate of that gradient)
    and is halved whenever the cost would increase. Returns the best-cost
    iterate, or a :class:`DirectResult` with ``full_output=True``.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    box = spec.control_box
    u = zeros(grid, spec.k) if u0 is None else u0
    traj = forward_sweep(spec, u)
    J = _cost_from_trajectory(spec, traj)
    g = _gradient(spec, traj)

    if step_size is None:
        rng = np.random.default_rng(seed)
        L_est = 0.0
        for _ in range(3):
            w = u.with_values(box.clamp(u.values + 0.1 * (box.sample(rng, grid.N + 1) - box.center)))
            d = sup_distance(w, u, spec.control_norm)
            if d > 0:
                gw = _gradient(spec, forward_sweep(spec, w))
                dg = float(np.max(np.abs(gw - g)))
                L_est = max(L_est, dg / float(np.max(np.abs(w.values - u.values))))
        step_size = 1.0 / L_est if L_est > 0 else 1.0

    s = step_size
    best_u, best_J = u, J
    it = 0
    for it in range(1, steps + 1):
        accepted = False
        for _ in range(60):
            v = u.with_values(box.clamp(u.values - s * g))
            tv = forward_sweep(spec, v)
            Jv = _cost_from_trajectory(spec, tv)
            if not np.isfinite(Jv):
                raise IntegrationDivergedError("direct method cost is not finite")
            if Jv <= J:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
        moved = float(np.max(np.abs(v.values - u.values)))
        u, traj, J = v, tv, Jv
        if J < best_J:
            best_u, best_J = u, J
        if moved <= tol:
            break
        g = _gradient(spec, traj)
    if full_output:
        return DirectResult(best_u, best_J, it, step_size)
    return best_u
