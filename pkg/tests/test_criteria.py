import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import domain, whitney
from subhyp import criteria as cr
from subhyp import extension as ex


def test_lambda_vanishes_for_constant():
    w = whitney("slit_square", 7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = cr.variational_lambda(ex.constant_datum(3.0), w)
    assert rep.lambda_est == 0.0 and rep.per_cube_terms == []


@settings(max_examples=10, deadline=None)
@given(st.floats(-10, 10), st.floats(0.1, 5))
def test_lambda_shift_and_scale(c, s):
    w = whitney("slit_square", 7)
    f = ex.linear_datum()
    base = cr.variational_lambda(f, w).lambda_est
    assert cr.variational_lambda(f.scaled(1.0, c), w).lambda_est == pytest.approx(base, rel=1e-9)
    assert cr.variational_lambda(f.scaled(-s, 0.0), w).lambda_est == pytest.approx(s ** 4 * base, rel=1e-9)


def test_recheck_report():
    w = whitney("slit_square", 7)
    rep = cr.variational_lambda(ex.slit_datum(), w)
    assert rep.lambda_est > 0 and cr.recheck_report(rep, w)
    assert rep.top(3)[0][2] == max(t[2] for t in rep.per_cube_terms)


def test_lambda_sums_whitney_terms():
    w = whitney("unit_square", 7)
    rep = cr.variational_lambda(ex.linear_datum(), w)
    assert rep.lambda_est == pytest.approx(sum(t[2] for t in rep.per_cube_terms), rel=1e-12)
    for q, _, term in rep.per_cube_terms[:50]:
        # oscillation of x1 over anchors in eta*Q is at most the width of eta*Q
        assert term <= (2 * rep.eta * w.radius[q]) ** 4 / w.diam[q] ** 2 * (1 + 1e-12)


def test_raw_boundary_blows_up_on_slit():
    f = ex.slit_datum()
    proper = [cr.variational_lambda(f, whitney("slit_square", k)).lambda_est for k in (7, 8)]
    raw = [cr.variational_lambda(f, whitney("slit_square", k), ignore_agglutination=True).lambda_est
           for k in (7, 8)]
    assert raw[0] > 10 * proper[0]
    assert raw[1] / raw[0] > 2 * proper[1] / proper[0]


def test_collar_cubes_examples():
    w = whitney("unit_square", 6)
    c = cr.collar_cubes(w, 0.1)
    assert np.all(w.dist[c] < 0.1)
    assert set(np.nonzero(w.dist >= 0.1)[0]).isdisjoint(c.tolist())
    assert len(cr.collar_cubes(w, 1e-9)) == 0


def test_collar_constant_and_monotone():
    w = whitney("unit_square", 8)
    prev = 0.0
    for eps in (0.05, 0.1, 0.2):
        v = cr.collar_lp_norm(ex.constant_datum(2.0), w, None, cr.CollarConfig(eps), 4.0)
        area = 1 - (1 - 2 * eps) ** 2
        # the uncovered boundary layer is at most 4 * perimeter * 2^-8
        assert 16 * (area - 16 * 2.0 ** -8) <= v <= 16 * area * (1 + 1e-9)
        assert v > prev
        prev = v


def test_collar_x1_against_nearest_point_oracle():
    d, w = domain("unit_square"), whitney("unit_square", 8)
    n = 1000
    g = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(g, g, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel()])
    for eps in (0.05, 0.1):
        Q = P[d.rho(P) < eps]
        nearest = d.nearest_boundary(Q)[0]
        want = np.sum(nearest[:, 0] ** 4) / n ** 2
        got = cr.collar_lp_norm(ex.linear_datum(), w, None, cr.CollarConfig(eps), 4.0)
        assert got == pytest.approx(want, rel=0.2)


def test_lambda_against_gradient_norm():
    r = []
    for k in (7, 8):
        w = whitney("unit_square", k)
        lam = cr.variational_lambda(ex.linear_datum(), w).lambda_est
        grad = ex.seminorm_quadrature(ex.build_extension(ex.linear_datum(), w), 4)
        assert 1e-2 <= lam / grad <= 1e2
        r.append(lam / grad)
    assert 0.5 <= r[1] / r[0] <= 2


def test_collar_config_validation():
    cfg = cr.CollarConfig()
    assert cfg.eta >= 22 * cfg.theta ** 2
    for kw in ({"epsilon": 0}, {"theta": 0.5}, {"theta": 2.0, "eta": 50.0}):
        with pytest.raises(ValueError):
            cr.CollarConfig(**kw)


def test_trace_norm_combines_terms():
    w = whitney("slit_square", 7)
    out = cr.trace_norm_W1p(ex.slit_datum(), w, None, cr.CollarConfig(0.1), 4.0)
    assert out["norm"] == pytest.approx(out["collar_lp"] ** 0.25 + out["lambda"] ** 0.25)
    assert out["lambda"] <= cr.variational_lambda(ex.slit_datum(), w, eta=cr.ETA_W1P).lambda_est


def test_sharp_maximal_constant_and_scaling():
    w = whitney("unit_square", 7)
    assert cr.sharp_maximal(ex.constant_datum(4.0), w).lp_norm == 0.0
    f = ex.linear_datum()
    a = cr.sharp_maximal(f, w)
    b = cr.sharp_maximal(f.scaled(-3.0, 7.0), w)
    assert np.allclose(b.values, 3 * a.values, rtol=1e-9)
    assert b.lp_norm == pytest.approx(3 * a.lp_norm, rel=1e-9)
    assert a.alpha == pytest.approx(2 / 3) and a.beta == pytest.approx(0.5)
    with pytest.raises(ValueError):
        cr.sharp_maximal(f, w, q=4.0, p=4.0)


def test_sharp_maximal_collar_part():
    w = whitney("unit_square", 7)
    s = cr.sharp_maximal(ex.linear_datum(), w, collar_epsilon=0.1)
    assert 0 < s.collar_lp_norm <= s.lp_norm


def test_holder_and_poincare_constant_vanish():
    w = whitney("annulus", 7)
    ef = ex.build_extension(ex.constant_datum(5.0), w)
    assert cr.check_holder(ef, w, n_pairs=200)["max_ratio"] <= 1e-12
    assert cr.check_sobolev_poincare(ef, n_cubes=50)["max_ratio"] == 0.0


def test_holder_linear_is_bounded():
    w = whitney("unit_square", 7)
    ef = ex.build_extension(ex.linear_datum(), w)
    h = cr.check_holder(ef, w, n_pairs=300)
    assert 0 < h["max_ratio"] < np.inf and h["n_unreachable"] == 0


def test_lemma_suite_passes_on_square():
    rep = cr.lemma_suite(domain("unit_square"), 7)
    assert rep["pass"], {k: v for k, v in rep.items() if isinstance(v, dict) and not v["pass"]}
