import math

import numpy as np
import pytest

from msacert import BUILTINS, builtin, lqr_problem
from msacert.certificate import certify
from msacert.exceptions import UnknownProblemError
from msacert.msa import cost, solve
from msacert.oracle import LqrSpec, direct_solve, riccati_solve
from msacert.problem import verify_contraction
from msacert.signals import BoxSet, Grid, sup_distance, zeros
from msacert.sweep import backward_sweep, forward_sweep, pmp_residual
from conftest import make_scalar


def scalar_lqr(T=1.0, Q=1.0, P_T=0.0):
    return LqrSpec(A=[[-1.0]], B=[[1.0]], Q=[[Q]], R=[[1.0]], P_T=[[P_T]], x0=[1.0], T=T)


def test_riccati_steady_state():
    ric = riccati_solve(scalar_lqr(T=20.0), Grid(20.0, 400))
    # -P' = -2P - P^2 + 1 settles at the positive root of P^2 + 2P - 1
    assert ric.P[0, 0, 0] == pytest.approx(math.sqrt(2) - 1, abs=1e-10)
    assert ric.P[-1, 0, 0] == 0.0


def test_riccati_without_state_cost_is_zero():
    ric = riccati_solve(scalar_lqr(Q=0.0), Grid(1.0, 50))
    np.testing.assert_array_equal(ric.P, 0.0)
    np.testing.assert_array_equal(ric.u_star.values, 0.0)
    np.testing.assert_allclose(ric.x_star.state.values[:, 0], np.exp(-ric.x_star.grid.times), atol=1e-9)


def test_riccati_terminal_only_closed_form():
    # Q = 0, P_T = 1: P solves -P' = -2P - P^2, so 1/P + 1/2 grows like exp(2(T - t))
    ric = riccati_solve(scalar_lqr(Q=0.0, P_T=1.0), Grid(1.0, 100))
    t = ric.x_star.grid.times
    exact = 1.0 / (1.5 * np.exp(2.0 * (1.0 - t)) - 0.5)
    np.testing.assert_allclose(ric.P[:, 0, 0], exact, atol=1e-10)


def test_riccati_replay_and_costate():
    for name in ("lqr-scalar", "lqr-2d"):
        bp = builtin(name)
        g = Grid(1.0, 400)
        ric = riccati_solve(bp.lqr, g)
        x = forward_sweep(bp.spec, ric.u_star)
        assert np.max(np.abs(x.state.values - ric.x_star.state.values)) <= 1e-8
        lam = backward_sweep(bp.spec, x).costate.values
        px = np.einsum("tij,tj->ti", ric.P, ric.x_star.state.values)
        assert np.max(np.abs(lam - px)) <= 1e-6
        assert pmp_residual(bp.spec, ric.u_star) <= 1e-5


def test_riccati_grid_must_match_horizon():
    with pytest.raises(ValueError):
        riccati_solve(scalar_lqr(), Grid(2.0, 10))


def test_direct_solve_matches_riccati():
    bp = builtin("lqr-scalar")
    g = Grid(1.0, 100)
    u = direct_solve(bp.spec, g, steps=2000)
    ric = riccati_solve(bp.lqr, g)
    assert sup_distance(u, ric.u_star, bp.spec.control_norm) <= 1e-4
    assert pmp_residual(bp.spec, u) <= 1e-5


def test_direct_solve_stationary_start():
    spec = make_scalar(q=0.0, pT=0.0)
    g = Grid(1.0, 20)
    res = direct_solve(spec, g, full_output=True)
    np.testing.assert_array_equal(res.control.values, 0.0)
    assert res.cost == 0.0
    with pytest.raises(ValueError):
        direct_solve(spec, g, steps=0)


def test_direct_and_msa_agree_on_nonlinear_problem():
    bp = builtin("tanh-input")
    g = Grid(1.0, 100)
    res = direct_solve(bp.spec, g, steps=2000, full_output=True)
    rep = solve(bp.spec, grid=g)
    assert rep.converged
    assert res.cost == pytest.approx(cost(bp.spec, rep.control), abs=1e-8)
    assert res.cost <= cost(bp.spec, zeros(g, 1))
    assert sup_distance(res.control, rep.control, bp.spec.control_norm) <= 1e-4


def test_builtin_lqr_scalar_constants():
    bp = builtin("lqr-scalar")
    cert = certify(bp.constants, bp.spec.T)
    assert (cert.b1, cert.b2) == (0.0, 1.0)
    assert bp.reference == "riccati" and bp.constants.soundness == "declared"


@pytest.mark.parametrize("name", BUILTINS)
def test_builtins_declare_valid_rates(name):
    bp = builtin(name)
    assert verify_contraction(bp.spec, bp.constants.c, budget=128, bounds=bp.bounds).passed
    d = bp.to_dict()
    assert d["name"] == name and d["horizon"] == 1.0


def test_builtin_horizon_override():
    bp = builtin("lqr-2d", horizon=3.0)
    assert bp.spec.T == 3.0 and bp.lqr.T == 3.0
    assert certify(bp.constants, 3.0).kappa > certify(builtin("lqr-2d").constants, 1.0).kappa


def test_unknown_builtin():
    with pytest.raises(UnknownProblemError, match="lqr-scalar"):
        builtin("pendulum")


@pytest.mark.parametrize(
    "kw",
    [
        {"R": [[0.0]]},
        {"R": [[-1.0]]},
        {"Q": [[-1.0]]},
        {"Q": [[1.0, 0.5], [0.0, 1.0]]},
        {"x0": [1.0, 2.0]},
        {"T": 0.0},
    ],
)
def test_lqr_validation(kw):
    base = dict(A=[[-1.0]], B=[[1.0]], Q=[[1.0]], R=[[1.0]], P_T=[[0.0]], x0=[1.0], T=1.0)
    base.update(kw)
    with pytest.raises(ValueError):
        LqrSpec(**base)


def test_lqr_problem_rejects_unjustified_rate():
    with pytest.raises(ValueError, match="log_norm"):
        lqr_problem(scalar_lqr(), BoxSet.symmetric(1.0), c=1.5)
    bp = lqr_problem(scalar_lqr(), BoxSet.symmetric(1.0))
    assert bp.constants.c == 1.0
