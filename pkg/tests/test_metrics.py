import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import domain, whitney
from subhyp.geometry import DomainError, polygon_domain, segment_in_domain
from subhyp.metrics import (DivergentLength, alpha_from_exponent, batch_csv, best_chain, chain_graph,
                            check_alpha, d_alpha, d_tilde, d_tilde_many, lower_bound, segment_integrals,
                            subhyperbolic_length)
from subhyp.whitney import ResolutionError

alphas = st.sampled_from([1 / 3, 0.5, 2 / 3, 1.0])
inner = st.floats(0.02, 0.98)


@pytest.fixture(scope="module")
def half_plane():
    return polygon_domain([(-10, 0), (10, 0), (10, 20), (-10, 20)], name="big_box")


def test_half_plane_closed_form(half_plane):
    v = subhyperbolic_length(half_plane, [(0, 1), (0, 4)], 0.5)
    assert v == pytest.approx(2.0, rel=1e-6)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.9])
def test_segment_ending_on_boundary_closed_form(half_plane, alpha):
    # integral of t^(alpha-1) from 0 to 3
    v = subhyperbolic_length(half_plane, [(0, 3), (0, 0)], alpha)
    assert v == pytest.approx(3 ** alpha / alpha, rel=1e-6)


@given(st.lists(st.tuples(inner, inner), min_size=2, max_size=6))
def test_alpha_one_is_sup_arclength(pts):
    P = np.array(pts)
    v = subhyperbolic_length(domain("unit_square"), P, 1.0)
    assert v == pytest.approx(np.sum(np.max(np.abs(np.diff(P, axis=0)), axis=1)), abs=1e-12)


@settings(max_examples=60)
@given(inner, inner, st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 0.99), alphas)
def test_q_om_segment_bound(x, y, u, v, s, alpha):
    d = domain("unit_square")
    X = np.array([x, y])
    dirv = np.array([u, v])
    if np.max(np.abs(dirv)) < 1e-3:
        return
    dirv /= np.max(np.abs(dirv))
    Y = X + s * d.rho(X)[0] * dirv
    L = np.max(np.abs(X - Y))
    val = segment_integrals(d, X, Y, alpha)[0]
    assert val <= L ** alpha / alpha * (1 + 1e-6)
    # and at least the Lipschitz lower bound
    assert val >= lower_bound(d, X, Y, alpha) * (1 - 1e-6)


def test_exits_domain_raises():
    with pytest.raises(DomainError):
        subhyperbolic_length(domain("slit_square"), [(0, 0.1), (0, -0.1)], 0.5)


def test_divergence_guard():
    d = domain("unit_square")
    with pytest.raises(DivergentLength):
        segment_integrals(d, [(0.5, 0.5)], [(0.5, 0.0)], 0.5, guard=1e-3)


def test_alpha_parameters():
    assert alpha_from_exponent(4) == pytest.approx(2 / 3)
    assert alpha_from_exponent(3) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        alpha_from_exponent(2)
    for bad in (0, -0.5, 1.5):
        with pytest.raises(ValueError):
            check_alpha(bad)


def test_identity_pair():
    d, w = domain("unit_square"), whitney("unit_square", 7)
    e = d_alpha(d, w, (0.3, 0.4), (0.3, 0.4), 0.5)
    assert (e.upper, e.chain_sum, e.certified_lower) == (0.0, 0.0, 0.0)
    assert d_tilde(d, w, (0.3, 0.4), (0.3, 0.4), 0.5).upper == 0.0


def test_unit_square_alpha_one():
    d, w = domain("unit_square"), whitney("unit_square", 8)
    e = d_alpha(d, w, (0.3, 0.5), (0.7, 0.5), 1.0)
    assert 0.4 * (1 - 1e-12) <= e.upper <= 0.8


def test_slit_pair_goes_around():
    d, w = domain("slit_square"), whitney("slit_square", 8)
    e = d_alpha(d, w, (0, 0.1), (0, -0.1), 0.5)
    # the path must reach the tips: sup length at least 2 * 0.5
    assert e.upper >= lower_bound(d, (0, 0.1), (0.5, 0), 0.5) * 2
    assert e.upper > 4 * 0.2 ** 0.5
    chain = e.chain
    c, r = w.center[chain], w.radius[chain]
    assert not np.any((np.abs(c[:, 1]) <= r) & (np.abs(c[:, 0]) - r < 0.5))


def test_chain_is_touching_sequence():
    w = whitney("multi_slit", 7)
    ch = best_chain(w, (0.0, 0.0), (-0.6, 0.6), 0.5)
    for a, b in zip(ch[:-1], ch[1:]):
        assert b in w.neighbors(a).tolist()
    q = int(w.locate((0.1, 0.1))[0])
    assert best_chain(w, w.center[q], w.center[q] + 0.1 * w.radius[q], 0.5) == [q]


@settings(max_examples=40, deadline=None)
@given(inner, inner, inner, inner, alphas)
def test_cmp_and_chain_bounds(x1, y1, x2, y2, alpha):
    d, w = domain("unit_square"), whitney("unit_square", 7)
    x, y = np.array([x1, y1]), np.array([x2, y2])
    if w.locate(x)[0] < 0 or w.locate(y)[0] < 0:
        return
    e = d_tilde(d, w, x, y, alpha)
    L = np.max(np.abs(x - y))
    gap = L ** alpha
    assert e.certified_lower <= e.upper + 1e-12
    assert e.upper <= (1 + 2 / alpha) * e.chain_sum + gap + 1e-12
    if L < min(d.rho(x)[0], d.rho(y)[0]):
        assert e.upper <= (1 + 1 / alpha) * gap * (1 + 1e-6)
    elif L > 0:
        assert e.upper >= 2 ** (alpha - 1) * gap


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.95, 0.95), st.floats(-0.95, 0.95), st.floats(-0.95, 0.95), st.floats(-0.95, 0.95))
def test_lower_bound_below_upper_and_symmetric(x1, y1, x2, y2):
    d, w = domain("slit_square"), whitney("slit_square", 7)
    x, y = np.array([x1, y1]), np.array([x2, y2])
    if not (d.contains(x)[0] and d.contains(y)[0]) or w.locate(x)[0] < 0 or w.locate(y)[0] < 0:
        return
    a = d_alpha(d, w, x, y, 0.5)
    b = d_alpha(d, w, y, x, 0.5)
    assert a.certified_lower <= a.upper * (1 + 1e-9)
    assert a.chain_sum == pytest.approx(b.chain_sum, rel=1e-12)
    if segment_in_domain(d, x, y):
        assert a.upper <= subhyperbolic_length(d, [x, y], 0.5) * (1 + 1e-9)


def test_heap_and_scipy_dijkstra_agree():
    w = whitney("comb_domain", 7)
    g = chain_graph(w, 0.5)
    dist, _ = g.dijkstra([0])
    cost = g.node_cost_from(0)
    ref = dist + 0.5 * (g.node_w[0] + g.node_w)
    assert np.allclose(cost[np.isfinite(ref)], ref[np.isfinite(ref)], rtol=1e-12)


def test_batch_matches_single():
    d, w = domain("annulus"), whitney("annulus", 7)
    rng = np.random.default_rng(0)
    X = rng.uniform(-0.95, 0.95, (40, 2))
    Y = rng.uniform(-0.95, 0.95, (40, 2))
    ok = d.contains(X) & d.contains(Y) & (w.locate(X) >= 0) & (w.locate(Y) >= 0)
    X, Y = X[ok], Y[ok]
    many = d_tilde_many(d, w, X, Y, 0.5)
    for x, y, e in zip(X, Y, many):
        assert e.upper == pytest.approx(d_tilde(d, w, x, y, 0.5).upper, rel=1e-12)


def test_snap_errors():
    d, w = domain("unit_square"), whitney("unit_square", 6)
    with pytest.raises(DomainError):
        d_alpha(d, w, (2, 2), (0.5, 0.5), 0.5)
    with pytest.raises(ResolutionError):
        d_alpha(d, w, (1e-4, 0.5), (0.5, 0.5), 0.5)


def test_batch_csv_rows():
    d, w = domain("slit_square"), whitney("slit_square", 7)
    text = "x1,y1,x2,y2,alpha\n0,0.1,0,-0.1,0.5\n5,5,0,0,0.5\n0.001,0.9999,0,0.5,0.5\nfoo,1,2,3,4\n0.2,0.2,0.3,0.3,2\n"
    rows = [r.split(",") for r in batch_csv(d, w, text).strip().split("\n")]
    assert rows[0] == ["upper", "chain_sum", "certified_lower", "chain_len", "error"]
    assert float(rows[1][0]) > 0 and rows[1][4] == ""
    assert rows[2][4] == "outside_domain"
    assert rows[3][4] == "refine_decomposition"
    assert rows[4][4] == "bad_row"
    assert rows[5][4] == "bad_row"
