"""Closed-form contraction certificates for the MSA iteration.

Everything here is arithmetic on the Lipschitz data: the horizon factor
``kappa = (1 - exp(-c T)) / c``, the coefficients ``b1``, ``b2``, the
Lipschitz bound ``b1 kappa + b2 kappa^2`` of one MSA step, and the
comparison bounds for states and costates that the bound is built from.

Convolution integrals against gap signals are evaluated exactly for the
signal's interpolation: piecewise-constant gaps integrate exactly, and for
piecewise-linear (or cubic) signals the node norms are interpolated
linearly, which over-estimates the norm of a linear interpolant by
convexity. Either way the computed right-hand sides are never below the
continuous ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .problem import LipschitzData
from .signals import Signal

__all__ = [
    "kappa",
    "coefficients",
    "Certificate",
    "certify",
    "critical_horizon",
    "gronwall_rhs",
    "costate_bound_terms",
    "costate_bound_rhs",
    "costate_sup_rhs",
    "exp_weighted_integral",
]


def kappa(c: float, T: float) -> float:
    """``(1 - exp(-c T)) / c``."""
    if not c > 0:
        raise ValueError(f"contraction rate must be positive, got {c}")
    if T < 0:
        raise ValueError(f"horizon must be nonnegative, got {T}")
    return -math.expm1(-c * T) / c


def coefficients(lip: LipschitzData):
    """Return ``(b1, b2)`` of the MSA Lipschitz bound."""
    b1 = lip.l_hx * lip.l_fu + lip.l_hlam * (lip.l_psixx * lip.l_fu + lip.l_phixu + lip.l_fxu)
    b2 = lip.l_hlam * lip.l_fu * (lip.l_phixx + lip.l_fxx)
    return b1, b2


def _bound(b1: float, b2: float, k: float) -> float:
    return b1 * k + b2 * k * k


@dataclass(frozen=True)
class Certificate:
    kappa: float
    b1: float
    b2: float
    lip_bound: float
    contractive: bool
    critical_horizon: Optional[float]
    constants: LipschitzData
    horizon: float

    @property
    def soundness(self) -> str:
        return self.constants.soundness

    def iterations_for(self, tol: float, init_gap: float) -> Optional[int]:
        """Smallest ``i`` with ``L^i / (1 - L) * init_gap <= tol``; ``None`` if not contractive."""
        if not self.contractive:
            return None
        L = self.lip_bound
        if init_gap <= 0 or init_gap / (1.0 - L) <= tol:
            return 0
        if L == 0.0:
            return 1
        i = math.ceil(math.log(tol * (1.0 - L) / init_gap) / math.log(L))
        # repair any off-by-one from rounding in the logarithms
        while i > 0 and L ** (i - 1) / (1.0 - L) * init_gap <= tol:
            i -= 1
        while L**i / (1.0 - L) * init_gap > tol:
            i += 1
        return i

    def to_dict(self) -> dict:
        verdict = "contractive" if self.contractive else "not contractive"
        if self.soundness == "sampled":
            verdict += " (heuristic: sampled constants)"
        return {
            "horizon": self.horizon,
            "c": self.constants.c,
            "kappa": self.kappa,
            "b1": self.b1,
            "b2": self.b2,
            "b1_kappa": self.b1 * self.kappa,
            "b2_kappa2": self.b2 * self.kappa**2,
            "lip_bound": self.lip_bound,
            "contractive": self.contractive,
            "critical_horizon": self.critical_horizon,
            "soundness": self.soundness,
            "verdict": verdict,
            "constants": self.constants.to_dict(),
        }


def certify(lip: LipschitzData, T: float) -> Certificate:
    k = kappa(lip.c, T)
    b1, b2 = coefficients(lip)
    L = _bound(b1, b2, k)
    return Certificate(
        kappa=k,
        b1=b1,
        b2=b2,
        lip_bound=L,
        contractive=L < 1.0,
        critical_horizon=critical_horizon(lip),
        constants=lip,
        horizon=float(T),
    )


def critical_horizon(lip: LipschitzData, xtol: float = 1e-12) -> Optional[float]:
    """Horizon ``T*`` at which ``b1 kappa + b2 kappa^2 = 1``.

    Found by bisection (the left side increases strictly in ``T``). Returns
    ``None`` when the bound stays below 1 for every horizon, i.e. when its
    limit ``b1 / c + b2 / c^2`` is at most 1.
    """
    b1, b2 = coefficients(lip)
    c = lip.c
    if _bound(b1, b2, 1.0 / c) <= 1.0:
        return None

    def g(T):
        return _bound(b1, b2, kappa(c, T)) - 1.0

    lo, hi = 0.0, 1.0 / c
    while g(hi) < 0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > xtol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _phi1(z: np.ndarray) -> np.ndarray:
    """``(exp(z) - 1) / z``, stable near 0."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    big = np.abs(z) > 1e-8
    out[big] = np.expm1(z[big]) / z[big]
    out[~big] = 1.0 + 0.5 * z[~big]
    return out


def _phi2(z: np.ndarray) -> np.ndarray:
    """``((z - 1) exp(z) + 1) / z^2 = int_0^1 s exp(z s) ds``, stable near 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    big = np.abs(z) > 1e-3
    zb = z[big]
    out[big] = (zb * np.expm1(zb) - np.expm1(zb) + zb) / (zb * zb)
    zs = z[~big]
    out[~big] = 0.5 + zs / 3.0 + zs * zs / 8.0 + zs**3 / 30.0
    return out


def _gap_pieces(gap):
    """Per-step ``(left value, slope per unit time)`` of a nonnegative gap signal."""
    if isinstance(gap, Signal):
        g = gap.values
        if g.shape[1] != 1:
            raise ValueError("gap signals must be scalar (already normed)")
        g = g[:, 0]
        grid = gap.grid
        if gap.interpolation == "constant":
            return grid, g[:-1], np.zeros(grid.N)
        return grid, g[:-1], (g[1:] - g[:-1]) / grid.h
    raise TypeError("gap must be a Signal")


def exp_weighted_integral(gap: Signal, a: float, b: float, beta: float, anchor: float) -> float:
    """``int_a^b exp(beta (tau - anchor)) g(tau) dtau`` for a scalar gap signal.

    Exact for piecewise-constant ``g`` and for the linear interpolant of
    the node values otherwise.
    """
    grid, g0, slope = _gap_pieces(gap)
    if b <= a:
        return 0.0
    t = grid.times
    h = grid.h
    j0 = max(int(math.floor(a / h)), 0)
    j1 = min(int(math.ceil(b / h)), grid.N)
    js = np.arange(j0, j1)
    p = np.maximum(t[js], a)
    q = np.minimum(t[js + 1], b)
    d = q - p
    keep = d > 0
    js, p, d = js[keep], p[keep], d[keep]
    val0 = g0[js] + slope[js] * (p - t[js])
    z = beta * d
    base = np.exp(beta * (p - anchor)) * d
    return float(np.sum(base * (val0 * _phi1(z) + slope[js] * d * _phi2(z))))


def gronwall_rhs(
    c: float,
    l_fu_list: Sequence[float],
    input_gaps: Sequence[Signal],
    x0_gap: float,
    t: float,
) -> float:
    """State comparison bound for a contracting system with ``m`` inputs.

    ``exp(-c t) x0_gap + sum_i l_i int_0^t exp(-c (t - tau)) gap_i(tau) dtau``.
    Each gap is a scalar signal of input distances ``||u_i - v_i||``.
    """
    if len(l_fu_list) != len(input_gaps):
        raise ValueError("one Lipschitz constant per input gap is required")
    total = math.exp(-c * t) * x0_gap
    for ell, gap in zip(l_fu_list, input_gaps):
        if ell:
            total += ell * exp_weighted_integral(gap, 0.0, t, c, t)
    return total


def costate_bound_terms(
    lip: LipschitzData, terminal_gap: float, v_gap: Signal, u_gap: Signal, t: float, T: float
):
    """The five terms of the costate comparison bound at time ``t``.

    In order: terminal decay, forcing convolution on ``[t, T]``, direct
    control term on ``[t, T]``, and the two ``sinh``-weighted control terms
    on ``[0, t]`` and ``[t, T]`` coming from the state gap. Hyperbolic sines
    are expanded into decaying exponentials so nothing overflows.
    """
    if not 0.0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    c = lip.c
    k2 = lip.l_fxx * lip.l_fu
    t1 = math.exp(-c * (T - t)) * terminal_gap
    t2 = exp_weighted_integral(v_gap, t, T, -c, t)
    conv_u = exp_weighted_integral(u_gap, t, T, -c, t)
    t3 = lip.l_fxu * conv_u
    t4 = t5 = 0.0
    if k2:
        # sinh(c(T-t)) exp(-c(T-tau)) / c = (1 - exp(-2c(T-t))) exp(-c(t-tau)) / (2c)
        t4 = k2 * (-math.expm1(-2.0 * c * (T - t)) / (2.0 * c)) * exp_weighted_integral(
            u_gap, 0.0, t, c, t
        )
        # exp(-c(T-t)) sinh(c(T-tau)) / c = (exp(-c(tau-t)) - exp(-c(2T-t-tau))) / (2c)
        t5 = k2 / (2.0 * c) * (conv_u - exp_weighted_integral(u_gap, t, T, c, 2.0 * T - t))
        t5 = max(t5, 0.0)
    return (t1, t2, t3, t4, t5)


def costate_bound_rhs(
    lip: LipschitzData, terminal_gap: float, v_gap: Signal, u_gap: Signal, t: float, T: float
) -> float:
    """Sum of :func:`costate_bound_terms`: bound on ``||lam(t) - lam_bar(t)||_*``."""
    return float(sum(costate_bound_terms(lip, terminal_gap, v_gap, u_gap, t, T)))


def costate_sup_rhs(
    lip: LipschitzData,
    terminal_gap: float,
    v_sup_gap: float,
    u_sup_gap: float,
    c: Optional[float] = None,
    T: float = 1.0,
) -> float:
    """Sup-in-time costate bound: incremental ISS form of the comparison bound."""
    c = lip.c if c is None else c
    k = kappa(c, T)
    return terminal_gap + k * v_sup_gap + (lip.l_fxu * k + lip.l_fxx * lip.l_fu * k * k) * u_sup_gap
