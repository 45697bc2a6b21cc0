"""Method of successive approximations: the forward-backward sweep iteration.

One MSA step maps a control ``u`` to the pointwise Hamiltonian minimizer
along the state and costate generated by ``u``. :func:`solve` iterates that
map until successive controls agree in the sup-in-time norm.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .exceptions import IntegrationDivergedError, MinimizerFailedError
from .problem import ProblemSpec, _hamiltonian
from .signals import Grid, Signal, sup_distance, zeros
from .sweep import CostateTrajectory, Trajectory, backward_sweep, forward_sweep

__all__ = [
    "minimize_hamiltonian",
    "msa_step",
    "MsaStep",
    "MsaReport",
    "solve",
    "cost",
    "empirical_contraction",
]

log = logging.getLogger(__name__)

STATIONARITY_TOL = 1e-9
_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


def _golden_section(fun, a: float, b: float, rtol: float = 1e-6) -> float:
    width = rtol * max(b - a, 1e-300)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > width:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def _numeric_argmin(spec: ProblemSpec, t, x, lam, start, max_iter: int = 200) -> np.ndarray:
    box = spec.control_box
    lo, hi = box.lower, box.upper
    lam = np.asarray(lam, dtype=float)

    def H(v):
        return _hamiltonian(spec, t, x, lam, v)

    def grad(v):
        duf = np.asarray(spec.duf(t, x, v), dtype=float).reshape(spec.n, spec.k)
        return duf.T @ lam + spec.grad_phi_u(t, x, v)

    def stationarity(v, gv):
        return float(np.max(np.abs(v - np.clip(v - gv, lo, hi))))

    u = np.array(start, dtype=float)
    # coordinate search over the box; one cycle suffices for a single control
    for _ in range(1 if spec.k == 1 else 2):
        for i in range(spec.k):
            if hi[i] == lo[i]:
                continue

            def line(s, i=i):
                v = u.copy()
                v[i] = s
                return H(v)

            u[i] = _golden_section(line, lo[i], hi[i])

    # projected gradient polish with Barzilai-Borwein steps, pushed well
    # below the required stationarity so MSA iterates are not noise-limited
    step = 1.0
    g = grad(u)
    Hu = H(u)
    best_u, best_r = u, stationarity(u, g)
    stall = 0
    for _ in range(max_iter):
        if best_r <= 1e-14 or stall >= 8:
            break
        while True:
            v = np.clip(u - step * g, lo, hi)
            Hv = H(v)
            if Hv <= Hu + 1e-14 * (1.0 + abs(Hu)) or step < 1e-12:
                break
            step *= 0.5
        gv = grad(v)
        s, y = v - u, gv - g
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else 1.0
        step = min(max(step, 1e-6), 1e6)
        u, g, Hu = v, gv, Hv
        r = stationarity(u, g)
        if r < best_r:
            best_u, best_r, stall = u, r, 0
        else:
            stall += 1
    if best_r <= STATIONARITY_TOL:
        return best_u
    raise MinimizerFailedError(f"Hamiltonian minimizer did not converge at t={t:.6g}", t=t)


def minimize_hamiltonian(spec: ProblemSpec, t: float, x, lam, method: str = "auto") -> np.ndarray:
    """Pointwise minimizer of ``u -> H(t, x, lam, u)`` over the control box.

    With ``method="auto"`` the problem's analytic minimizer is used when
    available (clamped into the box); otherwise, or with
    ``method="numeric"``, a deterministic coordinate search started at the
    box centre is followed by projected-gradient polishing to projected
    stationarity ``<= 1e-9``.
    """
    if method not in ("auto", "numeric", "analytic"):
        raise ValueError(f"unknown method {method!r}")
    x = np.asarray(x, dtype=float).reshape(-1)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if method != "numeric" and spec.analytic_minimizer is not None:
        u = np.asarray(spec.analytic_minimizer(t, x, lam), dtype=float).reshape(-1)
        return spec.control_box.clamp(u)
    if method == "analytic":
        raise ValueError("problem has no analytic minimizer")
    return _numeric_argmin(spec, t, x, lam, spec.control_box.center)


def hamiltonian_restart_gap(spec: ProblemSpec, t: float, x, lam) -> float:
    """Difference in H between two numeric minimizer starts (centre vs lower corner)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    a = _numeric_argmin(spec, t, x, lam, spec.control_box.center)
    b = _numeric_argmin(spec, t, x, lam, spec.control_box.lower)
    return abs(_hamiltonian(spec, t, x, lam, a) - _hamiltonian(spec, t, x, lam, b))


class MsaStep(NamedTuple):
    u_next: Signal
    x: Trajectory
    lam: CostateTrajectory


def msa_step(spec: ProblemSpec, u: Signal) -> MsaStep:
    """One MSA iteration: forward sweep, backward sweep, nodewise argmin of H."""
    x = forward_sweep(spec, u)
    lam = backward_sweep(spec, x)
    t = u.grid.times
    xs, ls = x.state.values, lam.costate.values
    nxt = np.array([minimize_hamiltonian(spec, t[j], xs[j], ls[j]) for j in range(len(t))])
    return MsaStep(u.with_values(nxt), x, lam)


def _cost_from_trajectory(spec: ProblemSpec, traj: Trajectory) -> float:
    g = traj.grid
    t, h, N = g.times, g.h, g.N
    x, xm = traj.state.values, traj.midpoints
    ul, um, ur = traj.control.step_samples()
    phi = spec.phi
    total = 0.0
    for j in range(N):
        total += (
            float(phi(t[j], x[j], ul[j]))
            + 4.0 * float(phi(t[j] + 0.5 * h, xm[j], um[j]))
            + float(phi(t[j + 1], x[j + 1], ur[j]))
        )
    J = total * h / 6.0 + float(spec.psi(x[-1]))
    if not np.isfinite(J):
        raise IntegrationDivergedError("cost is not finite")
    return J


def cost(spec: ProblemSpec, u: Signal) -> float:
    """``J[u] = int_0^T phi dt + psi(x(T))``, Simpson's rule on every grid step."""
    return _cost_from_trajectory(spec, forward_sweep(spec, u))


@dataclass
class MsaReport:
    """Outcome of :func:`solve`.

    ``iterates[0]`` is the initial guess and ``costs[i]`` is ``J`` of
    ``iterates[i]``; ``residuals[i - 1]`` is the sup-norm gap between
    iterates ``i`` and ``i - 1``.
    """

    iterates: List[Signal]
    residuals: List[float]
    costs: List[float]
    converged: bool
    iterations: int
    final_pmp_residual: float
    tie_warnings: int = 0
    final_state: Optional[Trajectory] = field(default=None, repr=False)
    final_costate: Optional[CostateTrajectory] = field(default=None, repr=False)

    @property
    def control(self) -> Signal:
        return self.iterates[-1]

    def ratios(self) -> np.ndarray:
        r = np.asarray(self.residuals)
        ok = r[:-1] > 0
        return r[1:][ok] / r[:-1][ok]

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residuals": list(map(float, self.residuals)),
            "costs": list(map(float, self.costs)),
            "final_pmp_residual": float(self.final_pmp_residual),
            "tie_warnings": self.tie_warnings,
        }


def solve(
    spec: ProblemSpec,
    u0: Optional[Signal] = None,
    max_iter: int = 100,
    tol: float = 1e-9,
    grid: Optional[Grid] = None,
    check_ties: bool = False,
) -> MsaReport:
    """Iterate the MSA map from ``u0`` (zero control by default).

    Stops when ``||u_i - u_{i-1}||_U <= tol`` or after ``max_iter`` steps.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if u0 is None:
        u0 = zeros(grid or Grid(spec.T, 200), spec.k)
    u = u0
    iterates, residuals, costs = [u0], [], []
    ties = 0
    converged = False
    step = msa_step(spec, u)
    for _ in range(max_iter):
        costs.append(_cost_from_trajectory(spec, step.x))
        u_next = step.u_next
        if check_ties and spec.analytic_minimizer is None:
            xs, ls = step.x.state.values, step.lam.costate.values
            for j, tj in enumerate(u.grid.times):
                if hamiltonian_restart_gap(spec, tj, xs[j], ls[j]) > 1e-6:
                    ties += 1
        r = sup_distance(u_next, u, spec.control_norm)
        residuals.append(r)
        iterates.append(u_next)
        u = u_next
        step = msa_step(spec, u)
        if r <= tol:
            converged = True
            break
    costs.append(_cost_from_trajectory(spec, step.x))
    final = sup_distance(step.u_next, u, spec.control_norm)
    if ties:
        log.warning("%d nodes where minimizer restarts disagree by more than 1e-6", ties)
    return MsaReport(
        iterates=iterates,
        residuals=residuals,
        costs=costs,
        converged=converged,
        iterations=len(residuals),
        final_pmp_residual=final,
        tie_warnings=ties,
        final_state=step.x,
        final_costate=step.lam,
    )


def _random_control(spec: ProblemSpec, grid: Grid, rng: np.random.Generator) -> np.ndarray:
    return spec.control_box.sample(rng, grid.N + 1)


def empirical_contraction(
    spec: ProblemSpec,
    pairs: int = 50,
    seed: int = 0,
    grid: Optional[Grid] = None,
    shrink: float = 1.0,
    interpolation: str = "linear",
) -> float:
    """Largest observed ``||MSA(u) - MSA(v)||_U / ||u - v||_U`` over random pairs.

    Even draws pair two independent random controls; odd draws perturb
    one of them by a random constant offset. ``shrink`` pulls both members
    of every pair towards their midpoint before applying MSA.
    """
    if pairs < 1:
        raise ValueError("pairs must be at least 1")
    grid = grid or Grid(spec.T, 200)
    rng = np.random.default_rng(seed)
    box = spec.control_box
    worst = 0.0
    done = 0
    draw = 0
    while done < pairs:
        a = _random_control(spec, grid, rng)
        if draw % 2 == 0:
            b = _random_control(spec, grid, rng)
        else:
            offset = (box.upper - box.lower) * (rng.random(spec.k) - 0.5) * 0.2
            b = np.clip(a + offset, box.lower, box.upper)
        draw += 1
        mid = 0.5 * (a + b)
        a = mid + shrink * (a - mid)
        b = mid + shrink * (b - mid)
        u = Signal(grid, a, interpolation)
        v = Signal(grid, b, interpolation)
        den = sup_distance(u, v, spec.control_norm)
        if den == 0.0:
            continue
        num = sup_distance(msa_step(spec, u).u_next, msa_step(spec, v).u_next, spec.control_norm)
        worst = max(worst, num / den)
        done += 1
    return worst
