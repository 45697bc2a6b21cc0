import dataclasses
import math

import numpy as np
import pytest

from msacert.norms import L1, LINF, induced_matrix_norm, vector_norm, weighted_l2
from msacert.problem import (
    CONSTANT_NAMES,
    BoundedSets,
    LipschitzData,
    ProblemSpec,
    bounded_sets,
    estimate_constants,
    hamiltonian,
    verify_contraction,
)
from msacert.signals import BoxSet, Grid, Signal
from msacert.sweep import backward_sweep, forward_sweep
from conftest import make_scalar


def linear_problem(A, B, norm=None, box=1.0):
    A, B = np.asarray(A, float), np.asarray(B, float)
    kw = {} if norm is None else {"state_norm": norm}
    return ProblemSpec(
        f=lambda t, x, u: A @ x + B @ u,
        dxf=lambda t, x, u: A,
        duf=lambda t, x, u: B,
        phi=lambda t, x, u: 0.5 * float(x @ x + u @ u),
        phix=lambda t, x, u: np.asarray(x, float),
        psi=lambda x: 0.0,
        psix=lambda x: np.zeros(len(x)),
        control_box=BoxSet.symmetric(box, B.shape[1]),
        x0=np.ones(A.shape[0]),
        T=1.0,
        **kw,
    )


def test_hamiltonian_examples(scalar):
    spec = scalar()
    assert hamiltonian(spec, 0.0, [1.0], [1.0], [0.0]) == pytest.approx(-0.5)
    assert hamiltonian(spec, 0.3, [2.0], [0.0], [0.5]) == pytest.approx(spec.phi(0.3, [2.0], [0.5]))
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, l1, l2 = rng.standard_normal((3, 1))
        u = spec.control_box.sample(rng)
        lhs = hamiltonian(spec, 0.1, x, l1 + l2, u)
        rhs = hamiltonian(spec, 0.1, x, l1, u) + hamiltonian(spec, 0.1, x, l2, u) - spec.phi(0.1, x, u)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_hamiltonian_rejects_control_outside_box(scalar):
    with pytest.raises(ValueError):
        hamiltonian(scalar(box=1.0), 0.0, [0.0], [0.0], [1.5])


def test_wrong_jacobian_is_rejected():
    with pytest.raises(ValueError, match="dxf"):
        ProblemSpec(
            f=lambda t, x, u: -x + u,
            dxf=lambda t, x, u: np.array([[-2.0]]),
            duf=lambda t, x, u: np.array([[1.0]]),
            phi=lambda t, x, u: 0.0,
            phix=lambda t, x, u: np.zeros(1),
            psi=lambda x: 0.0,
            psix=lambda x: np.zeros(1),
            control_box=BoxSet.symmetric(1.0),
            x0=[1.0],
            T=1.0,
        )


def test_wrong_gradient_is_rejected():
    with pytest.raises(ValueError, match="phix"):
        dataclasses.replace(make_scalar(), phix=lambda t, x, u: 2.0 * np.asarray(x))
    with pytest.raises(ValueError, match="psix"):
        dataclasses.replace(make_scalar(pT=1.0), psix=lambda x: np.zeros(1))


def test_verify_contraction_examples():
    spec = linear_problem(-2 * np.eye(2), np.eye(2))
    rep = verify_contraction(spec, 2.0, budget=32)
    assert rep.max_lognorm == pytest.approx(-2.0)
    assert rep.passed
    assert not verify_contraction(spec, 2.5, budget=32).passed
    assert "not a proof" in rep.note

    cubic = ProblemSpec(
        f=lambda t, x, u: -x - x**3 + u,
        dxf=lambda t, x, u: np.array([[-1 - 3 * x[0] ** 2]]),
        duf=lambda t, x, u: np.array([[1.0]]),
        phi=lambda t, x, u: 0.0,
        phix=lambda t, x, u: np.zeros(1),
        psi=lambda x: 0.0,
        psix=lambda x: np.zeros(1),
        control_box=BoxSet.symmetric(1.0),
        x0=[0.5],
        T=1.0,
    )
    rep = verify_contraction(cubic, 1.0, budget=64)
    assert rep.passed and rep.max_lognorm <= -1.0


def test_reversed_costate_field_has_same_lognorm(problems):
    for bp in problems.values():
        a = verify_contraction(bp.spec, bp.constants.c, 128, bp.bounds)
        b = verify_contraction(bp.spec, bp.constants.c, 128, bp.bounds, reversed_costate=True)
        assert abs(a.max_lognorm - b.max_lognorm) <= 1e-9
        assert a.passed


def test_verify_contraction_weighted_norm():
    A = np.array([[-2.0, 1.0], [0.0, -2.0]])
    spec = linear_problem(A, np.eye(2), norm=weighted_l2([1.0, 1.25]))
    rep = verify_contraction(spec, 1.0)
    assert rep.passed
    assert rep.max_lognorm == pytest.approx(-1.6, abs=1e-12)


def test_estimate_linear_constants_exact():
    A = np.array([[-1.0, 0.2], [0.0, -1.5]])
    B = np.array([[1.0], [0.5]])
    spec = linear_problem(A, B)
    bounds = BoundedSets(np.zeros(2), 2.0, 2.0)
    est = estimate_constants(spec, bounds, budget=128)
    assert est.l_fxx == 0.0 and est.l_fxu == 0.0
    true = induced_matrix_norm(B, spec.state_norm, spec.control_norm)
    assert est.l_fu == pytest.approx(true, rel=1e-9)
    assert est.l_phixx == pytest.approx(1.0, rel=1e-2)
    assert est.c == pytest.approx(-max(np.linalg.eigvalsh(0.5 * (A + A.T))), rel=1e-12)
    assert est.soundness == "sampled"
    assert set(est.provenance.values()) == {"estimated"}


def test_estimated_lfu_for_tanh_approaches_one():
    spec = ProblemSpec(
        f=lambda t, x, u: -2.0 * x + np.tanh(u),
        dxf=lambda t, x, u: np.array([[-2.0]]),
        duf=lambda t, x, u: np.array([[1 / np.cosh(u[0]) ** 2]]),
        phi=lambda t, x, u: 0.0,
        phix=lambda t, x, u: np.zeros(1),
        psi=lambda x: 0.0,
        psix=lambda x: np.zeros(1),
        control_box=BoxSet.symmetric(2.0),
        x0=[0.0],
        T=1.0,
    )
    bounds = BoundedSets([0.0], 1.0, 1.0)
    vals = [estimate_constants(spec, bounds, budget=b).l_fu for b in (8, 64, 512)]
    assert vals[0] <= vals[1] <= vals[2] <= 1.0
    assert vals[2] > 0.99


def test_estimates_monotone_in_budget(problems):
    bp = problems["cubic-damped"]
    small = estimate_constants(bp.spec, bp.bounds, budget=32)
    big = estimate_constants(bp.spec, bp.bounds, budget=128)
    for name in CONSTANT_NAMES[1:]:
        assert getattr(big, name) >= getattr(small, name)
    # sampled values never exceed the declared (true) ones
    for name in CONSTANT_NAMES[1:]:
        assert getattr(big, name) <= getattr(bp.constants, name) + 1e-6


def test_degenerate_bounds_flagged():
    spec = linear_problem(-np.eye(1), np.eye(1))
    est = estimate_constants(spec, BoundedSets([0.0], 0.0, 0.0), budget=16)
    assert est.l_fxx == 0 and est.l_phixx == 0 and est.l_hlam == 0
    assert any("x_radius" in n for n in est.notes)


def test_bounded_sets_control_contribution(scalar):
    lip = LipschitzData(c=1.0, l_fu=1.0)
    b1 = bounded_sets(scalar(box=1.0), lip)
    assert b1.control_radius == pytest.approx(1 - math.exp(-1), rel=1e-12)
    b2 = bounded_sets(scalar(box=2.0), lip)
    assert b2.control_radius == pytest.approx(2 * b1.control_radius, rel=1e-12)
    assert b2.x_radius == pytest.approx(b2.zero_input_radius + b2.control_radius)


def test_bounded_sets_without_forcing():
    spec = ProblemSpec(
        f=lambda t, x, u: -x + u,
        dxf=lambda t, x, u: np.array([[-1.0]]),
        duf=lambda t, x, u: np.array([[1.0]]),
        phi=lambda t, x, u: 0.0,
        phix=lambda t, x, u: np.zeros(1),
        psi=lambda x: 0.0,
        psix=lambda x: np.zeros(1),
        control_box=BoxSet([0.0], [0.0]),
        x0=[1.0],
        T=1.0,
    )
    b = bounded_sets(spec, LipschitzData(c=1.0, l_fu=1.0))
    assert b.lam_radius == 0.0
    assert b.x_radius == b.zero_input_radius
    assert b.zero_input_radius == pytest.approx(0.5 * (1 - math.exp(-1)), rel=1e-9)


def test_trajectories_stay_in_bounded_sets(problems):
    rng = np.random.default_rng(11)
    for bp in problems.values():
        spec, B = bp.spec, bp.bounds
        g = Grid(spec.T, 100)
        for _ in range(10):
            u = Signal(g, spec.control_box.sample(rng, g.N + 1))
            x = forward_sweep(spec, u)
            lam = backward_sweep(spec, x)
            dx = max(vector_norm(r - B.x_center, spec.state_norm) for r in x.state.values)
            dl = max(vector_norm(r, spec.dual_norm) for r in lam.costate.values)
            assert dx <= B.x_radius + 1e-9
            assert dl <= B.lam_radius + 1e-9


def test_lipschitz_data_validation_and_round_trip():
    lip = LipschitzData(c=2.0, l_fu=1.5, l_hlam=0.5, provenance={"l_fu": "estimated"})
    assert lip.soundness == "sampled"
    back = LipschitzData.from_dict(lip.to_dict())
    assert back == lip and back.provenance == lip.provenance
    with pytest.raises(ValueError):
        LipschitzData(c=0.0)
    with pytest.raises(ValueError):
        LipschitzData(c=1.0, l_fu=-1.0)
    with pytest.raises(ValueError):
        LipschitzData(c=1.0, l_fu=math.inf)
    with pytest.raises(ValueError):
        LipschitzData.from_dict({"c": 1.0, "l_zz": 2.0})
    with pytest.raises(ValueError):
        LipschitzData(c=1.0, provenance={"c": "guessed"})


def test_norm_weight_dimension_checked_at_construction():
    with pytest.raises(ValueError):
        linear_problem(-np.eye(2), np.eye(2), norm=weighted_l2([1.0, 2.0, 3.0]))


def test_with_horizon_keeps_callbacks(scalar):
    spec = scalar()
    longer = spec.with_horizon(3.0)
    assert longer.T == 3.0 and longer.f is spec.f


@pytest.mark.parametrize("kind", [L1, LINF])
def test_norm_choice_changes_dual(kind):
    spec = linear_problem(-np.eye(2), np.eye(2), norm=kind)
    assert spec.dual_norm.tag == {"l1": "linf", "linf": "l1"}[kind.tag]
