import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msacert import builtin
from msacert.certificate import certify
from msacert.msa import (
    cost,
    empirical_contraction,
    minimize_hamiltonian,
    msa_step,
    solve,
)
from msacert.oracle import riccati_solve
from msacert.problem import ProblemSpec, hamiltonian
from msacert.signals import BoxSet, Grid, Signal, sup_distance, zeros
from conftest import make_scalar


def test_quadratic_minimizer_examples():
    spec = make_scalar(analytic=False)
    assert minimize_hamiltonian(spec, 0.0, [0.0], [0.5])[0] == pytest.approx(-0.5, abs=1e-9)
    assert minimize_hamiltonian(spec, 0.0, [0.0], [3.0])[0] == -1.0
    assert minimize_hamiltonian(spec, 0.0, [0.0], [-3.0])[0] == 1.0


def test_minimizer_method_selection(scalar):
    with pytest.raises(ValueError):
        minimize_hamiltonian(scalar(analytic=False), 0.0, [0.0], [0.0], method="analytic")
    with pytest.raises(ValueError):
        minimize_hamiltonian(scalar(), 0.0, [0.0], [0.0], method="newton")
    # analytic results are clamped into the box
    assert minimize_hamiltonian(scalar(box=0.25), 0.0, [0.0], [1.0])[0] == -0.25


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-3, 3), st.floats(0.1, 4.0))
def test_numeric_minimizer_matches_analytic(lam, x, r):
    spec = make_scalar(r=r, box=1.0)
    a = minimize_hamiltonian(spec, 0.0, [x], [lam])
    b = minimize_hamiltonian(spec, 0.0, [x], [lam], method="numeric")
    assert abs(a[0] - b[0]) <= 1e-7


def test_numeric_minimizer_two_controls():
    bp = builtin("lqr-2d")
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, lam = rng.standard_normal((2, 2)) * 5
        a = minimize_hamiltonian(bp.spec, 0.5, x, lam)
        b = minimize_hamiltonian(bp.spec, 0.5, x, lam, method="numeric")
        np.testing.assert_allclose(a, b, atol=1e-7)


def test_numeric_minimizer_is_a_minimum():
    spec = builtin("tanh-input").spec
    rng = np.random.default_rng(1)
    for _ in range(20):
        x, lam = rng.standard_normal(2) * 2
        u = minimize_hamiltonian(spec, 0.0, [x], [lam])
        grid = np.linspace(-1.5, 1.5, 601)
        best = min(hamiltonian(spec, 0.0, [x], [lam], [v]) for v in grid)
        assert hamiltonian(spec, 0.0, [x], [lam], u) <= best + 1e-12


def test_step_maps_fixed_point_to_itself():
    bp = builtin("lqr-scalar")
    rep = solve(bp.spec, grid=Grid(1.0, 100))
    nxt = msa_step(bp.spec, rep.control).u_next
    assert sup_distance(nxt, rep.control, bp.spec.control_norm) <= 1e-9


def test_zero_costs_give_zero_control():
    spec = make_scalar(q=0.0, pT=0.0)
    u = Signal.constant(Grid(1.0, 20), 0.7)
    np.testing.assert_array_equal(msa_step(spec, u).u_next.values, 0.0)
    rep = solve(spec, u0=u)
    assert rep.converged and rep.iterations == 2
    np.testing.assert_array_equal(rep.control.values, 0.0)


def test_solve_is_deterministic():
    spec = builtin("tanh-input").spec
    a = solve(spec, grid=Grid(1.0, 50))
    b = solve(spec, grid=Grid(1.0, 50))
    assert a.residuals == b.residuals
    np.testing.assert_array_equal(a.control.values, b.control.values)


def test_solve_lqr_scalar_matches_riccati():
    bp = builtin("lqr-scalar")
    g = Grid(1.0, 400)
    rep = solve(bp.spec, grid=g)
    assert rep.converged
    ric = riccati_solve(bp.lqr, g)
    assert np.max(np.abs(rep.control.values - ric.u_star.values)) <= 1e-5


def test_residual_ratios_below_bound():
    bp = builtin("lqr-scalar")
    L = certify(bp.constants, 1.0).lip_bound
    rep = solve(bp.spec, grid=Grid(1.0, 200))
    r = np.asarray(rep.residuals)
    keep = r[:-1] > 1e-11
    assert np.all(r[1:][keep] / r[:-1][keep] <= L + 0.02)
    # the iteration ends no worse than it started
    assert rep.costs[-1] <= rep.costs[0]


def test_starting_at_the_fixed_point_converges_at_once():
    bp = builtin("lqr-2d")
    first = solve(bp.spec, grid=Grid(1.0, 100))
    again = solve(bp.spec, u0=first.control)
    assert again.converged and again.iterations == 1


def test_solve_reports_non_convergence():
    bp = builtin("lqr-scalar")
    rep = solve(bp.spec, grid=Grid(1.0, 50), max_iter=2)
    assert not rep.converged and rep.iterations == 2
    assert rep.final_pmp_residual > 1e-9
    with pytest.raises(ValueError):
        solve(bp.spec, max_iter=0)
    with pytest.raises(ValueError):
        solve(bp.spec, tol=0.0)


def test_report_to_dict():
    rep = solve(builtin("lqr-scalar").spec, grid=Grid(1.0, 50))
    d = rep.to_dict()
    assert d["iterations"] == len(d["residuals"]) == rep.iterations
    assert len(d["costs"]) == rep.iterations + 1


def test_cost_examples():
    g = Grid(1.0, 100)
    spec = make_scalar()
    assert cost(spec, zeros(g, 1)) == pytest.approx((1 - math.exp(-2)) / 4, abs=1e-8)
    term = make_scalar(q=0.0, r=0.0, pT=2.0)
    # phi = 0, so J is psi(x(T)) = x(T)^2 exactly
    assert cost(term, zeros(g, 1)) == pytest.approx(math.exp(-2), abs=1e-9)
    # u = 1 holds x at its equilibrium 1, so J = (1 + 1) / 2 over unit time
    assert cost(spec, Signal.constant(g, 1.0)) == pytest.approx(1.0, abs=1e-12)


def test_empirical_contraction_is_zero_when_minimizer_ignores_costate():
    spec = ProblemSpec(
        f=lambda t, x, u: -x,
        dxf=lambda t, x, u: np.array([[-1.0]]),
        duf=lambda t, x, u: np.array([[0.0]]),
        phi=lambda t, x, u: 0.5 * float(x[0] ** 2 + (u[0] - 0.2) ** 2),
        phix=lambda t, x, u: np.array([x[0]]),
        phiu=lambda t, x, u: np.array([u[0] - 0.2]),
        psi=lambda x: 0.0,
        psix=lambda x: np.zeros(1),
        control_box=BoxSet.symmetric(1.0),
        x0=[1.0],
        T=1.0,
    )
    assert empirical_contraction(spec, pairs=6, grid=Grid(1.0, 20)) == 0.0
    np.testing.assert_allclose(msa_step(spec, zeros(Grid(1.0, 20), 1)).u_next.values, 0.2, atol=1e-9)


def test_empirical_contraction_below_certificate():
    bp = builtin("lqr-scalar")
    L = certify(bp.constants, 1.0).lip_bound
    g = Grid(1.0, 100)
    full = empirical_contraction(bp.spec, pairs=10, grid=g)
    small = empirical_contraction(bp.spec, pairs=10, grid=g, shrink=0.01)
    assert 0 < full <= L + 0.05
    # the unclamped LQR map is affine, so shrinking the pairs changes nothing
    assert small == pytest.approx(full, rel=1e-6)
    with pytest.raises(ValueError):
        empirical_contraction(bp.spec, pairs=0)


def test_iterates_stay_in_box():
    bp = builtin("cubic-damped")
    rep = solve(bp.spec, grid=Grid(1.0, 100))
    for u in rep.iterates:
        assert all(bp.spec.control_box.contains(v) for v in u.values)
    assert rep.converged
