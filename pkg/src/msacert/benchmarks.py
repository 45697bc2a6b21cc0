"""Built-in benchmark problems with declared Lipschitz constants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import UnknownProblemError
from .norms import L2, NormKind, dual_kind, induced_matrix_norm, log_norm, weighted_l2
from .oracle import LqrSpec
from .problem import BoundedSets, LipschitzData, ProblemSpec, bounded_sets
from .signals import BoxSet

__all__ = ["BenchmarkProblem", "BUILTINS", "builtin", "lqr_problem"]


@dataclass(frozen=True, eq=False)
class BenchmarkProblem:
    name: str
    spec: ProblemSpec
    constants: LipschitzData
    reference: str  # "riccati" | "direct" | "none"
    bounds: BoundedSets
    lqr: Optional[LqrSpec] = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "horizon": self.spec.T,
            "x0": self.spec.x0.tolist(),
            "control_box": self.spec.control_box.to_dict(),
            "state_norm": self.spec.state_norm.to_dict(),
            "control_norm": self.spec.control_norm.to_dict(),
            "reference": self.reference,
            "constants": self.constants.to_dict(),
            "bounds": self.bounds.to_dict(),
        }


def lqr_problem(
    lqr: LqrSpec,
    box: BoxSet,
    state_norm: NormKind = L2,
    control_norm: NormKind = L2,
    c: Optional[float] = None,
    name: str = "lqr",
) -> BenchmarkProblem:
    """Wrap an LQR instance as a problem with exact Lipschitz constants.

    The minimizer ``-R^-1 B' lam`` is linear, so every constant is an
    induced matrix norm between the appropriate norms; ``c`` defaults to
    ``-log_norm(A)``.
    """
    A, B, Q, R, P_T = lqr.A, lqr.B, lqr.Q, lqr.R, lqr.P_T
    K = np.linalg.solve(R, B.T)
    spec = ProblemSpec(
        f=lambda t, x, u: A @ x + B @ u,
        dxf=lambda t, x, u: A,
        duf=lambda t, x, u: B,
        phi=lambda t, x, u: 0.5 * float(x @ Q @ x + u @ R @ u),
        phix=lambda t, x, u: Q @ x,
        phiu=lambda t, x, u: R @ u,
        psi=lambda x: 0.5 * float(x @ P_T @ x),
        psix=lambda x: P_T @ x,
        control_box=box,
        x0=lqr.x0,
        T=lqr.T,
        state_norm=state_norm,
        control_norm=control_norm,
        analytic_minimizer=lambda t, x, lam: -K @ lam,
        name=name,
    )
    dn = dual_kind(state_norm)
    mu = log_norm(A, state_norm)
    if c is None:
        c = -mu
    elif mu > -c + 1e-12:
        raise ValueError(f"log_norm(A) = {mu} does not certify rate {c}")
    lip = LipschitzData(
        c=c,
        l_fu=induced_matrix_norm(B, state_norm, control_norm),
        l_phixx=induced_matrix_norm(Q, dn, state_norm),
        l_psixx=induced_matrix_norm(P_T, dn, state_norm),
        l_hlam=induced_matrix_norm(K, control_norm, dn),
    )
    return BenchmarkProblem(name, spec, lip, "riccati", bounded_sets(spec, lip), lqr)


def _lqr_scalar(T: float) -> BenchmarkProblem:
    lqr = LqrSpec(A=[[-1.0]], B=[[1.0]], Q=[[1.0]], R=[[1.0]], P_T=[[0.0]], x0=[1.0], T=T)
    return lqr_problem(lqr, BoxSet.symmetric(10.0), c=1.0, name="lqr-scalar")


LQR2D_WEIGHTS = (1.0, 1.25)


def _lqr_2d(T: float) -> BenchmarkProblem:
    lqr = LqrSpec(
        A=[[-2.0, 1.0], [0.0, -2.0]],
        B=np.eye(2),
        Q=np.eye(2),
        R=np.eye(2),
        P_T=np.zeros((2, 2)),
        x0=[1.0, 1.0],
        T=T,
    )
    return lqr_problem(
        lqr, BoxSet.symmetric(10.0, 2), weighted_l2(LQR2D_WEIGHTS), L2, c=1.0, name="lqr-2d"
    )


def _tanh_input(T: float) -> BenchmarkProblem:
    spec = ProblemSpec(
        f=lambda t, x, u: -x + np.tanh(u),
        dxf=lambda t, x, u: np.array([[-1.0]]),
        duf=lambda t, x, u: np.array([[1.0 / np.cosh(u[0]) ** 2]]),
        phi=lambda t, x, u: 0.5 * float(x[0] ** 2 + u[0] ** 2),
        phix=lambda t, x, u: np.array([x[0]]),
        phiu=lambda t, x, u: np.array([u[0]]),
        psi=lambda x: 0.0,
        psix=lambda x: np.zeros(1),
        control_box=BoxSet.symmetric(1.5),
        x0=[1.0],
        T=T,
        name="tanh-input",
    )
    # u -> tanh(u) has slope at most 1; the minimizer of lam tanh(u) + u^2/2
    # satisfies u + lam sech^2(u) = 0 with |du/dlam| <= 1 since lam tanh(u) <= 0
    lip = LipschitzData(c=1.0, l_fu=1.0, l_phixx=1.0, l_hlam=1.0)
    return BenchmarkProblem("tanh-input", spec, lip, "direct", bounded_sets(spec, lip))


def _cubic_damped(T: float) -> BenchmarkProblem:
    spec = ProblemSpec(
        f=lambda t, x, u: -x - x**3 + u,
        dxf=lambda t, x, u: np.array([[-1.0 - 3.0 * x[0] ** 2]]),
        duf=lambda t, x, u: np.array([[1.0]]),
        phi=lambda t, x, u: 0.5 * float(x[0] ** 2 + u[0] ** 2),
        phix=lambda t, x, u: np.array([x[0]]),
        phiu=lambda t, x, u: np.array([u[0]]),
        psi=lambda x: 0.5 * float(x[0] ** 2),
        psix=lambda x: np.array([x[0]]),
        control_box=BoxSet.symmetric(0.5),
        x0=[0.5],
        T=T,
        analytic_minimizer=lambda t, x, lam: -np.asarray(lam, dtype=float),
        name="cubic-damped",
    )
    base = LipschitzData(c=1.0, l_fu=1.0, l_phixx=1.0, l_psixx=1.0, l_hlam=1.0)
    # X depends only on c, l_fu and l_psixx, so it can be fixed before l_fxx:
    # d/dx [(-1 - 3x^2) lam] = -6 x lam is bounded by 6 sup|x| sup|lam| on X x Lambda
    bounds = bounded_sets(spec, base)
    x_abs = float(abs(bounds.x_center[0]) + bounds.x_radius)
    lip = base.replace(l_fxx=6.0 * x_abs * bounds.lam_radius)
    return BenchmarkProblem("cubic-damped", spec, lip, "direct", bounds)


_FACTORIES = {
    "lqr-scalar": (_lqr_scalar, 1.0),
    "lqr-2d": (_lqr_2d, 1.0),
    "tanh-input": (_tanh_input, 1.0),
    "cubic-damped": (_cubic_damped, 1.0),
}

BUILTINS = tuple(_FACTORIES)


def builtin(name: str, horizon: Optional[float] = None) -> BenchmarkProblem:
    """Built-in benchmark by name, optionally at a different horizon."""
    try:
        factory, T = _FACTORIES[name]
    except KeyError:
        raise UnknownProblemError(f"unknown problem {name!r}; choose from {list(BUILTINS)}") from None
    return factory(T if horizon is None else float(horizon))
