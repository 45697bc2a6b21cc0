import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msacert.norms import L1, L2, LINF, weighted_l2
from msacert.signals import (
    BoxSet,
    Grid,
    Signal,
    node_norms,
    read_csv,
    reverse,
    signal_to_csv,
    sup_distance,
    write_csv,
)


def test_grid_nodes():
    g = Grid(2.0, 4)
    np.testing.assert_array_equal(g.times, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert g.h == 0.5
    assert g.refine(3).N == 12


@pytest.mark.parametrize("T,N", [(0.0, 4), (-1.0, 4), (1.0, 1), (1.0, 2.5), (np.inf, 4)])
def test_grid_rejects(T, N):
    with pytest.raises(ValueError):
        Grid(T, N)


def test_eval_rules():
    g = Grid(1.0, 2)
    lin = Signal(g, [0.0, 2.0, 2.0])
    const = Signal(g, [0.0, 2.0, 2.0], "constant")
    assert lin(0.25)[0] == 1.0
    assert lin(0.6)[0] == 2.0
    assert const(0.25)[0] == 0.0
    assert const(0.6)[0] == 2.0
    for j, t in enumerate(g.times):
        for sig in (lin, const, lin.with_interpolation("cubic")):
            assert sig(t)[0] == sig.values[j, 0]


def test_eval_midpoint_of_two_node_values():
    g = Grid(1.0, 2)
    s = Signal(g, [0.0, 1.0, 2.0])
    assert s(0.25)[0] == pytest.approx(0.5)
    c = s.with_interpolation("constant")
    assert c(0.25)[0] == 0.0


def test_eval_out_of_range():
    s = Signal(Grid(1.0, 4), np.zeros(5))
    with pytest.raises(ValueError):
        s(1.5)
    with pytest.raises(ValueError):
        s(-1e-9)


def test_signal_validation():
    g = Grid(1.0, 3)
    with pytest.raises(ValueError):
        Signal(g, np.zeros(3))
    with pytest.raises(ValueError):
        Signal(g, [0.0, np.nan, 0.0, 0.0])
    with pytest.raises(ValueError):
        Signal(g, np.zeros(4), "quadratic")


def test_signal_is_immutable():
    s = Signal(Grid(1.0, 3), np.zeros(4))
    with pytest.raises(ValueError):
        s.values[0, 0] = 1.0


def test_cubic_interpolation_reproduces_cubics():
    g = Grid(2.0, 10)
    s = Signal.from_function(g, lambda t: t**3 - t, "cubic")
    for t in (0.13, 0.77, 1.91):
        assert s(t)[0] == pytest.approx(t**3 - t, abs=1e-12)


def test_step_samples():
    g = Grid(1.0, 2)
    s = Signal(g, [[0.0], [2.0], [4.0]])
    left, mid, right = s.step_samples()
    np.testing.assert_array_equal(mid[:, 0], [1.0, 3.0])
    np.testing.assert_array_equal(right[:, 0], [2.0, 4.0])
    lc, mc, rc = s.with_interpolation("constant").step_samples()
    np.testing.assert_array_equal(lc, mc)
    np.testing.assert_array_equal(lc, rc)


def test_sup_distance_examples():
    g = Grid(1.0, 2)
    u = Signal(g, [0.0, 1.0, 3.0])
    v = Signal(g, np.zeros(3))
    assert sup_distance(u, v, L2) == 3.0
    assert sup_distance(u, u, L2) == 0.0
    c = np.array([1.0, -2.0])
    a = Signal(Grid(1.0, 5), np.random.default_rng(0).standard_normal((6, 2)))
    b = a.with_values(a.values - c)
    for k in (L1, L2, LINF, weighted_l2([2.0, 1.0])):
        assert sup_distance(a, b, k) == pytest.approx(
            {"l1": 3.0, "l2": np.sqrt(5), "linf": 2.0, "wl2": np.sqrt(8)}[k.tag]
        )


def test_sup_distance_grid_mismatch():
    with pytest.raises(ValueError):
        sup_distance(Signal(Grid(1.0, 2), np.zeros(3)), Signal(Grid(1.0, 3), np.zeros(4)), L2)
    with pytest.raises(ValueError):
        sup_distance(Signal(Grid(1.0, 2), np.zeros(3)), Signal(Grid(1.0, 2), np.zeros((3, 2))), L2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_sup_distance_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    g = Grid(1.0, 7)
    u, v, w = (Signal(g, rng.standard_normal((8, 2))) for _ in range(3))
    for k in (L1, L2, LINF):
        assert sup_distance(u, v, k) == sup_distance(v, u, k)
        assert sup_distance(u, w, k) <= sup_distance(u, v, k) + sup_distance(v, w, k) + 1e-12


def test_sup_over_nodes_is_continuum_sup_for_linear_signals():
    rng = np.random.default_rng(1)
    g = Grid(1.0, 6)
    u = Signal(g, rng.standard_normal((7, 2)))
    fine = np.linspace(0.0, 1.0, 601)
    dense = max(np.linalg.norm(u(t)) for t in fine)
    assert dense <= sup_distance(u, u.with_values(np.zeros((7, 2))), L2) + 1e-12


def test_reverse():
    g = Grid(1.0, 2)
    s = Signal(g, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(reverse(s).values[:, 0], [3.0, 2.0, 1.0])
    pal = Signal(g, [1.0, 5.0, 1.0])
    np.testing.assert_array_equal(reverse(pal).values, pal.values)
    rng = np.random.default_rng(2)
    for _ in range(100):
        r = Signal(Grid(1.0, 9), rng.standard_normal((10, 3)))
        np.testing.assert_array_equal(reverse(reverse(r)).values, r.values)


def test_linear_signal_lipschitz_in_time():
    rng = np.random.default_rng(3)
    g = Grid(1.0, 10)
    s = Signal(g, rng.standard_normal(11))
    slope = np.max(np.abs(np.diff(s.values[:, 0]))) / g.h
    ts = rng.uniform(0, 1, (200, 2))
    for a, b in ts:
        assert abs(s(a)[0] - s(b)[0]) <= slope * abs(a - b) + 1e-12


def test_node_norms():
    s = Signal(Grid(1.0, 2), [[3.0, 4.0], [0.0, 0.0], [1.0, -1.0]])
    np.testing.assert_allclose(node_norms(s, L2), [5.0, 0.0, np.sqrt(2)])


def test_box():
    box = BoxSet([-1.0, -2.0], [1.0, 0.5])
    np.testing.assert_array_equal(box.clamp([3.0, -3.0]), [1.0, -2.0])
    assert box.contains([0.0, 0.0])
    assert not box.contains([0.0, 1.0])
    assert box.max_norm(LINF) == 2.0
    assert box.max_norm(L1) == 3.0
    pts = box.sample(np.random.default_rng(0), 500)
    assert pts.shape == (500, 2)
    assert all(box.contains(p) for p in pts)
    np.testing.assert_array_equal(BoxSet.symmetric(2.0, 3).upper, [2.0, 2.0, 2.0])


@pytest.mark.parametrize(
    "lo,hi", [([1.0], [2.0]), ([-1.0], [-0.5]), ([1.0], [0.0]), ([-1.0, 0.0], [1.0]), ([-np.inf], [1.0])]
)
def test_box_rejects(lo, hi):
    with pytest.raises(ValueError):
        BoxSet(lo, hi)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    s = Signal(Grid(0.7, 13), rng.standard_normal((14, 3)))
    path = tmp_path / "s.csv"
    write_csv(path, s)
    text = path.read_text()
    assert text.splitlines()[0] == "t,x_0,x_1,x_2"
    back = read_csv(path)
    np.testing.assert_array_equal(back.values, s.values)
    assert back.grid.N == 13
    assert back.grid.T == pytest.approx(0.7, abs=1e-15)
    assert signal_to_csv(s) == text


def test_csv_rejects_nonuniform(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,x_0\n0,1\n0.3,1\n1,1\n")
    with pytest.raises(ValueError):
        read_csv(p)
