"""Optimal control problem instances, Lipschitz data and bounded sets.

A :class:`ProblemSpec` bundles dynamics, Jacobians, costs, the control box
and the norm choices. The Hamiltonian uses the nonsingular convention
``H = lam^T f + phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .norms import L2, NormKind, dual_kind, log_norm, vector_norm
from .signals import BoxSet

__all__ = [
    "ProblemSpec",
    "LipschitzData",
    "BoundedSets",
    "ContractionReport",
    "hamiltonian",
    "verify_contraction",
    "estimate_constants",
    "bounded_sets",
    "check_derivatives",
]

FD_RTOL = 1e-5
FD_STEP = 1e-6

Vec = np.ndarray


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """One instance of the fixed-horizon optimal control problem.

    Callbacks take ``(t, x, u)`` (``psi``/``psix`` take ``x`` only) and
    must be pure. ``phiu`` (gradient of the running cost in ``u``) is
    optional; when missing it is approximated by central differences.
    ``analytic_minimizer(t, x, lam)`` returns the Hamiltonian minimizer
    and is clamped into the box before use.

    Derivative callbacks are checked against central differences at
    construction; a mismatch raises ``ValueError``.
    """

    f: Callable
    dxf: Callable
    duf: Callable
    phi: Callable
    phix: Callable
    psi: Callable
    psix: Callable
    control_box: BoxSet
    x0: np.ndarray
    T: float
    state_norm: NormKind = L2
    control_norm: NormKind = L2
    analytic_minimizer: Optional[Callable] = None
    phiu: Optional[Callable] = None
    name: str = "custom"
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"horizon must be positive, got {self.T}")
        object.__setattr__(self, "T", float(self.T))
        # weights, if any, must match the dimensions
        self.state_norm.scale(self.n)
        self.control_norm.scale(self.k)
        fx = np.asarray(self.f(0.0, x0, self.control_box.center), dtype=float).reshape(-1)
        if fx.shape != x0.shape:
            raise ValueError(f"f returns shape {fx.shape}, state has shape {x0.shape}")
        if self.validate:
            check_derivatives(self)

    @property
    def n(self) -> int:
        return self.x0.size

    @property
    def k(self) -> int:
        return self.control_box.dim

    @property
    def dual_norm(self) -> NormKind:
        return dual_kind(self.state_norm)

    def with_horizon(self, T: float) -> "ProblemSpec":
        return replace(self, T=T, validate=False)

    def grad_phi_u(self, t, x, u) -> Vec:
        if self.phiu is not None:
            return np.asarray(self.phiu(t, x, u), dtype=float).reshape(-1)
        return _fd_gradient(lambda v: self.phi(t, x, v), np.asarray(u, dtype=float))


def _fd_gradient(fun, x: Vec) -> Vec:
    g = np.empty(x.size)
    for i in range(x.size):
        hi = FD_STEP * max(1.0, abs(x[i]))
        e = np.zeros(x.size)
        e[i] = hi
        g[i] = (float(fun(x + e)) - float(fun(x - e))) / (2 * hi)
    return g


def _fd_jacobian(fun, x: Vec) -> np.ndarray:
    cols = []
    for i in range(x.size):
        hi = FD_STEP * max(1.0, abs(x[i]))
        e = np.zeros(x.size)
        e[i] = hi
        fp = np.asarray(fun(x + e), dtype=float).reshape(-1)
        fm = np.asarray(fun(x - e), dtype=float).reshape(-1)
        cols.append((fp - fm) / (2 * hi))
    return np.column_stack(cols)


def _close(a, b) -> bool:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        return False
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    return bool(np.max(np.abs(a - b), initial=0.0) <= FD_RTOL * scale)


def check_derivatives(spec: ProblemSpec, samples: int = 8, seed: int = 0) -> None:
    """Compare user Jacobians and gradients with central differences.

    Raises ``ValueError`` naming the first callback that disagrees.
    """
    rng = np.random.default_rng(seed)
    spread = max(1.0, float(np.max(np.abs(spec.x0))))
    for _ in range(samples):
        t = spec.T * rng.random()
        x = spec.x0 + spread * rng.standard_normal(spec.n)
        u = spec.control_box.sample(rng)
        checks = [
            ("dxf", spec.dxf(t, x, u), _fd_jacobian(lambda v: spec.f(t, v, u), x)),
            ("duf", spec.duf(t, x, u), _fd_jacobian(lambda v: spec.f(t, x, v), u)),
            ("phix", spec.phix(t, x, u), _fd_gradient(lambda v: spec.phi(t, v, u), x)),
            ("psix", spec.psix(x), _fd_gradient(spec.psi, x)),
        ]
        if spec.phiu is not None:
            checks.append(("phiu", spec.phiu(t, x, u), _fd_gradient(lambda v: spec.phi(t, x, v), u)))
        for name, given, approx in checks:
            given = np.asarray(given, dtype=float)
            if given.size != approx.size:
                raise ValueError(f"{name} returns {given.size} entries, expected {approx.size}")
            given = given.reshape(approx.shape)
            if not _close(given, approx):
                raise ValueError(
                    f"{name} disagrees with finite differences at t={t:.6g}: "
                    f"given {np.round(given, 8).tolist()}, numeric {np.round(approx, 8).tolist()}"
                )


def hamiltonian(spec: ProblemSpec, t: float, x, lam, u) -> float:
    """``lam^T f(t, x, u) + phi(t, x, u)``; ``u`` must lie in the control box."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if not spec.control_box.contains(u, atol=1e-12):
        raise ValueError(f"control {u.tolist()} outside the control box")
    x = np.asarray(x, dtype=float).reshape(-1)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    return _hamiltonian(spec, t, x, lam, u)


def _hamiltonian(spec, t, x, lam, u) -> float:
    return float(np.dot(lam, np.asarray(spec.f(t, x, u), dtype=float).reshape(-1))) + float(
        spec.phi(t, x, u)
    )


CONSTANT_NAMES = ("c", "l_fu", "l_fxx", "l_fxu", "l_phixx", "l_phixu", "l_psixx", "l_hx", "l_hlam")


@dataclass(frozen=True)
class LipschitzData:
    """Contraction rate and the Lipschitz constants entering the MSA bound.

    ``provenance`` maps each constant name to ``"declared"`` or
    ``"estimated"``. Estimated constants are sampled maxima and therefore
    lower bounds of the true constants.
    """

    c: float
    l_fu: float = 0.0
    l_fxx: float = 0.0
    l_fxu: float = 0.0
    l_phixx: float = 0.0
    l_phixu: float = 0.0
    l_psixx: float = 0.0
    l_hx: float = 0.0
    l_hlam: float = 0.0
    provenance: dict = field(default=None, compare=False)
    notes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        for name in CONSTANT_NAMES:
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            if v < 0:
                raise ValueError(f"{name} must be nonnegative, got {v}")
            object.__setattr__(self, name, v)
        if self.c <= 0:
            raise ValueError(f"contraction rate must be positive, got {self.c}")
        prov = dict(self.provenance or {})
        for name in CONSTANT_NAMES:
            prov.setdefault(name, "declared")
        bad = set(prov.values()) - {"declared", "estimated"}
        if bad:
            raise ValueError(f"unknown provenance {sorted(bad)}")
        object.__setattr__(self, "provenance", prov)
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def soundness(self) -> str:
        return "declared" if all(v == "declared" for v in self.provenance.values()) else "sampled"

    def replace(self, **changes) -> "LipschitzData":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = {name: getattr(self, name) for name in CONSTANT_NAMES}
        d["provenance"] = dict(self.provenance)
        if self.notes:
            d["notes"] = list(self.notes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LipschitzData":
        allowed = set(CONSTANT_NAMES) | {"provenance", "notes"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown constant keys: {sorted(unknown)}")
        return cls(**{k: (tuple(v) if k == "notes" else v) for k, v in d.items()})


@dataclass(frozen=True, eq=False)
class BoundedSets:
    """A state ball ``X`` and a costate ball ``Lambda`` containing all trajectories.

    ``x_radius`` is measured in the state norm around ``x_center``;
    ``lam_radius`` in the dual norm around the origin. ``v_radius`` bounds
    the costate forcing ``phi_x`` over ``X x U`` and ``lam_terminal_radius``
    bounds ``psi_x`` over ``X``.
    """

    x_center: np.ndarray
    x_radius: float
    lam_radius: float
    v_radius: float = 0.0
    lam_terminal_radius: float = 0.0
    zero_input_radius: float = 0.0
    control_radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x_center", np.array(self.x_center, dtype=float).reshape(-1))
        for f_ in fields(self)[1:]:
            v = float(getattr(self, f_.name))
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{f_.name} must be finite and nonnegative, got {v}")
            object.__setattr__(self, f_.name, v)

    def to_dict(self) -> dict:
        d = {f_.name: getattr(self, f_.name) for f_ in fields(self)}
        d["x_center"] = self.x_center.tolist()
        return d


def _default_bounds(spec: ProblemSpec) -> BoundedSets:
    r = max(1.0, vector_norm(spec.x0, spec.state_norm))
    return BoundedSets(spec.x0, r, 1.0)


def _ball_points(unit: np.ndarray, center, radius: float, kind: NormKind) -> np.ndarray:
    """Map points of ``[0, 1]^n`` into the ball ``||x - center|| <= radius``."""
    z = 2.0 * unit - 1.0
    w = kind.scale(z.shape[1])
    if kind.p == 1:
        nz = np.abs(z).sum(axis=1)
    elif kind.p == 2:
        nz = np.sqrt((z * z).sum(axis=1))
    else:
        nz = np.abs(z).max(axis=1)
    z = z / np.maximum(1.0, nz)[:, None]
    return np.asarray(center, dtype=float) + radius * z / w


def _halton(d: int, n: int, seed: int) -> np.ndarray:
    # prefixes of the same scrambled sequence are nested, so estimates are
    # monotone in the budget
    return qmc.Halton(d=d, scramble=True, seed=seed).random(n)


@dataclass(frozen=True)
class ContractionReport:
    max_lognorm: float
    passed: bool
    c_claimed: float
    samples: int
    note: str = "sampled necessary check, not a proof"

    def to_dict(self) -> dict:
        return {
            "max_lognorm": self.max_lognorm,
            "pass": self.passed,
            "c_claimed": self.c_claimed,
            "samples": self.samples,
            "note": self.note,
        }


def _sample_txu(spec: ProblemSpec, bounds: BoundedSets, budget: int, seed: int, extra: int = 0):
    n, k = spec.n, spec.k
    pts = _halton(1 + n + k + extra, budget, seed)
    ts = spec.T * pts[:, 0]
    xs = _ball_points(pts[:, 1 : 1 + n], bounds.x_center, bounds.x_radius, spec.state_norm)
    box = spec.control_box
    us = box.lower + (box.upper - box.lower) * pts[:, 1 + n : 1 + n + k]
    return ts, xs, us, pts[:, 1 + n + k :]


def verify_contraction(
    spec: ProblemSpec,
    c_claimed: float,
    budget: int = 256,
    bounds: Optional[BoundedSets] = None,
    seed: int = 0,
    reversed_costate: bool = False,
) -> ContractionReport:
    """Sampled check that ``log_norm(D_x f) <= -c_claimed``.

    With ``reversed_costate=True`` the check is run on the time-reversed
    costate field instead, whose Jacobian is ``D_x f^T`` measured in the
    dual norm.
    """
    if budget < 1:
        raise ValueError("sampling budget must be at least 1")
    bounds = _default_bounds(spec) if bounds is None else bounds
    ts, xs, us, _ = _sample_txu(spec, bounds, budget, seed)
    kind = spec.dual_norm if reversed_costate else spec.state_norm
    worst = -np.inf
    for t, x, u in zip(ts, xs, us):
        J = np.atleast_2d(np.asarray(spec.dxf(t, x, u), dtype=float))
        worst = max(worst, log_norm(J.T if reversed_costate else J, kind))
    return ContractionReport(float(worst), bool(worst <= -c_claimed + 1e-9), float(c_claimed), budget)


def estimate_constants(
    spec: ProblemSpec, bounds: BoundedSets, budget: int = 256, seed: int = 0
) -> LipschitzData:
    """Sampled difference-quotient estimates of every constant.

    Pairs are drawn from a scrambled Halton sequence over
    ``[0, T] x X x U x Lambda``; every other pair is a near pair (a
    ``1e-4`` convex step towards the partner) so that the estimates
    approach local derivative norms. Each value is a lower bound of the
    true constant.
    """
    from .msa import minimize_hamiltonian

    if budget < 1:
        raise ValueError("sampling budget must be at least 1")
    n, k = spec.n, spec.k
    sn, cn, dn = spec.state_norm, spec.control_norm, spec.dual_norm
    ts, xs, us, rest = _sample_txu(spec, bounds, budget, seed, extra=n + k + 2 * n)
    xbs = _ball_points(rest[:, :n], bounds.x_center, bounds.x_radius, sn)
    box = spec.control_box
    ubs = box.lower + (box.upper - box.lower) * rest[:, n : n + k]
    lams = _ball_points(rest[:, n + k : 2 * n + k], np.zeros(n), bounds.lam_radius, dn)
    lbs = _ball_points(rest[:, 2 * n + k :], np.zeros(n), bounds.lam_radius, dn)

    est = dict.fromkeys(CONSTANT_NAMES[1:], 0.0)
    worst_mu = -np.inf

    def upd(name, num, den):
        if den > 0:
            est[name] = max(est[name], num / den)

    for i, (t, x, u, xb, ub, lam, lb) in enumerate(zip(ts, xs, us, xbs, ubs, lams, lbs)):
        if i % 2 == 1:
            xb = x + 1e-4 * (xb - x)
            ub = u + 1e-4 * (ub - u)
            lb = lam + 1e-4 * (lb - lam)
        dx = vector_norm(x - xb, sn)
        du = vector_norm(u - ub, cn)
        dl = vector_norm(lam - lb, dn)
        J = np.atleast_2d(np.asarray(spec.dxf(t, x, u), dtype=float))
        worst_mu = max(worst_mu, log_norm(J, sn))
        f = lambda xx, uu: np.asarray(spec.f(t, xx, uu), dtype=float).reshape(-1)
        upd("l_fu", vector_norm(f(x, u) - f(x, ub), sn), du)
        fxl = lambda xx, uu: np.atleast_2d(np.asarray(spec.dxf(t, xx, uu), dtype=float)).T @ lam
        upd("l_fxx", vector_norm(fxl(x, u) - fxl(xb, u), dn), dx)
        upd("l_fxu", vector_norm(fxl(x, u) - fxl(x, ub), dn), du)
        px = lambda xx, uu: np.asarray(spec.phix(t, xx, uu), dtype=float).reshape(-1)
        upd("l_phixx", vector_norm(px(x, u) - px(xb, u), dn), dx)
        upd("l_phixu", vector_norm(px(x, u) - px(x, ub), dn), du)
        ps = lambda xx: np.asarray(spec.psix(xx), dtype=float).reshape(-1)
        upd("l_psixx", vector_norm(ps(x) - ps(xb), dn), dx)
        h0 = minimize_hamiltonian(spec, t, x, lam)
        upd("l_hx", vector_norm(h0 - minimize_hamiltonian(spec, t, xb, lam), cn), dx)
        upd("l_hlam", vector_norm(h0 - minimize_hamiltonian(spec, t, x, lb), cn), dl)

    notes = []
    if bounds.x_radius == 0:
        notes.append("x_radius is zero: constants over x collapse to 0")
    if bounds.lam_radius == 0:
        notes.append("lam_radius is zero: constants over lambda collapse to 0")
    if not worst_mu < 0:
        raise ValueError(
            f"sampled log norm {worst_mu:.6g} is nonnegative: dynamics are not contracting on X x U"
        )
    return LipschitzData(
        c=-worst_mu,
        provenance=dict.fromkeys(CONSTANT_NAMES, "estimated"),
        notes=tuple(notes),
        **est,
    )


def bounded_sets(
    spec: ProblemSpec, lip: LipschitzData, grid_steps: int = 200, budget: int = 256, seed: int = 0
) -> BoundedSets:
    """Balls ``X`` and ``Lambda`` that contain every state and costate trajectory.

    The state ball is centred on the zero-input trajectory's bounding box;
    its radius is that trajectory's envelope plus
    ``l_fu * kappa * max_{u in U} ||u||_U``. The costate radius is a bound
    on ``||psi_x||_*`` over ``X`` plus ``kappa`` times the sampled sup of
    ``||phi_x||_*`` over ``X x U``.
    """
    from .certificate import kappa
    from .signals import Grid, zeros
    from .sweep import forward_sweep

    grid = Grid(spec.T, grid_steps)
    xbar = forward_sweep(spec, zeros(grid, spec.k)).state.values
    center = 0.5 * (xbar.min(axis=0) + xbar.max(axis=0))
    sn, dn = spec.state_norm, spec.dual_norm
    r0 = max(vector_norm(row - center, sn) for row in xbar)
    kap = kappa(lip.c, spec.T)
    r_ctrl = lip.l_fu * kap * spec.control_box.max_norm(spec.control_norm)
    x_radius = r0 + r_ctrl
    terminal = vector_norm(np.asarray(spec.psix(center), dtype=float), dn) + lip.l_psixx * x_radius

    probe = BoundedSets(center, x_radius, 0.0)
    ts, xs, us, _ = _sample_txu(spec, probe, budget, seed)
    # add the axis extremes of X and the box corners at both ends of the horizon
    extremes = [center]
    w = sn.scale(spec.n)
    for i in range(spec.n):
        e = np.zeros(spec.n)
        e[i] = x_radius / w[i]
        extremes += [center + e, center - e]
    box = spec.control_box
    corners = [box.lower, box.upper, box.center]
    if spec.k <= 8:
        grids = np.meshgrid(*[[lo, hi] for lo, hi in zip(box.lower, box.upper)], indexing="ij")
        corners = [np.array(c) for c in zip(*(g.ravel() for g in grids))] + [box.center]
    v_radius = 0.0
    for t, x, u in zip(ts, xs, us):
        v_radius = max(v_radius, vector_norm(spec.phix(t, x, u), dn))
    for t in (0.0, spec.T):
        for x in extremes:
            for u in corners:
                v_radius = max(v_radius, vector_norm(spec.phix(t, x, u), dn))
    lam_radius = terminal + kap * v_radius
    return BoundedSets(
        x_center=center,
        x_radius=x_radius,
        lam_radius=lam_radius,
        v_radius=v_radius,
        lam_terminal_radius=terminal,
        zero_input_radius=r0,
        control_radius=r_ctrl,
    )
