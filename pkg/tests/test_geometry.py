import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import domain
from subhyp.geometry import (Cube, DomainError, Q_visible_batch, dist_to_boundary, gallery_names,
                             is_Q_visible, load_domain, polygon_domain, segment_in_domain)

coord = st.floats(-1, 1, allow_nan=False)
unit = st.floats(0.001, 0.999, allow_nan=False)


def slit_face(side):
    d = domain("slit_square")
    return d.parse_face("slit0+" if side > 0 else "slit0-")


def test_dist_examples():
    sq, sl = domain("unit_square"), domain("slit_square")
    assert dist_to_boundary(sq, (0.5, 0.5)) == pytest.approx(0.5)
    assert dist_to_boundary(sq, (0.25, 0.5)) == pytest.approx(0.25)
    assert dist_to_boundary(sl, (0.0, 0.1)) == pytest.approx(0.1)


def test_dist_outside_raises():
    with pytest.raises(DomainError):
        dist_to_boundary(domain("unit_square"), (2.0, 0.5))
    with pytest.raises(DomainError):
        dist_to_boundary(domain("unit_square"), (np.nan, 0.5))


@given(unit, unit)
def test_unit_square_rho_closed_form(x, y):
    d = domain("unit_square")
    assert d.rho((x, y))[0] == pytest.approx(min(x, 1 - x, y, 1 - y), abs=1e-15)


@settings(max_examples=200)
@given(coord, coord, coord, coord)
def test_rho_is_sup_lipschitz(x1, y1, x2, y2):
    d = domain("multi_slit")
    r = d.rho(np.array([[x1, y1], [x2, y2]]))
    assert abs(r[0] - r[1]) <= max(abs(x1 - x2), abs(y1 - y2)) + 1e-12


@settings(max_examples=100)
@given(coord, coord)
def test_nearest_boundary_realizes_rho(x, y):
    d = domain("multi_slit")
    pt, seg, dist = d.nearest_boundary(np.array([[x, y]]))
    assert dist[0] == pytest.approx(d.rho((x, y))[0], abs=1e-12)
    assert np.max(np.abs(pt[0] - (x, y))) == pytest.approx(dist[0], abs=1e-9)
    assert d.segments_through(pt[0], tol=1e-9).size >= 1


def test_segment_examples():
    sq, sl = domain("unit_square"), domain("slit_square")
    assert segment_in_domain(sq, (0.1, 0.1), (0.9, 0.9), exclude_a=False)
    assert not segment_in_domain(sl, (0, 0.1), (0, -0.1))
    assert segment_in_domain(sl, (0.5, 0.0), (0.6, 0.0), exclude_a=True)
    assert not segment_in_domain(sl, (0.5, 0.0), (0.6, 0.0), exclude_a=False)


@given(unit, unit, unit, unit)
def test_convex_segments_always_inside(a, b, c, e):
    assert segment_in_domain(domain("unit_square"), (a, b), (c, e))


@settings(max_examples=200)
@given(coord, coord, coord, coord)
def test_segment_symmetric_and_slit_crossing(x1, y1, x2, y2):
    d = domain("slit_square")
    a, b = np.array([x1, y1]), np.array([x2, y2])
    if not (d.contains(a)[0] and d.contains(b)[0]):
        return
    s = segment_in_domain(d, a, b)
    assert s == segment_in_domain(d, b, a)
    # crossing y = 0 inside |x| < 0.5 must be blocked
    if y1 * y2 < 0:
        t = y1 / (y1 - y2)
        xc = x1 + t * (x2 - x1)
        if abs(xc) < 0.5 - 1e-9:
            assert not s


def test_q_visibility_examples():
    sl = domain("slit_square")
    q = Cube((0.0, 0.3), 0.05)
    assert is_Q_visible(sl, q, (0.0, 0.0), slit_face(+1))
    assert not is_Q_visible(sl, q, (0.0, 0.0), slit_face(-1))
    sq = domain("unit_square")
    for x in [(0, 0.5), (1, 1), (0.3, 0.0)]:
        assert is_Q_visible(sq, Cube((0.5, 0.5), 0.1), x)


def test_visibility_batch_matches_scalar():
    rng = np.random.default_rng(3)
    for name in ("slit_square", "multi_slit"):
        d = domain(name)
        C = rng.uniform(-0.95, 0.95, (400, 2))
        C = C[d.contains(C)]
        R = 0.5 * d.rho(C) * rng.uniform(0.1, 0.9, len(C))
        pts, segs, _ = d.nearest_boundary(rng.uniform(-1, 1, (len(C), 2)))
        faces = d.boundary_faces(pts, segs, C)
        batch = Q_visible_batch(d, C, R, pts, faces)
        scalar = [is_Q_visible(d, Cube(tuple(c), r), x, f) for c, r, x, f in zip(C, R, pts, faces)]
        assert batch.tolist() == scalar


def test_load_domain_forms(tmp_path):
    spec = {"type": "polygon", "outer": [[0, 0], [2, 0], [2, 1], [0, 1]], "slits": [[[1, 0], [1, 0.5]]]}
    p = tmp_path / "d.json"
    p.write_text(json.dumps(spec))
    d1, d2 = load_domain(str(p)), load_domain(spec)
    assert d1.area() == pytest.approx(2.0) and d2.area() == pytest.approx(2.0)
    assert not segment_in_domain(d1, (0.9, 0.2), (1.1, 0.2))
    boxes = load_domain({"type": "boxes", "boxes": [[0, 0, 1, 1], [1, 0, 2, 0.5]]})
    assert boxes.area() == pytest.approx(1.5)


@pytest.mark.parametrize("bad", ["{not json", json.dumps({"type": "blob"}), json.dumps([1, 2])])
def test_load_domain_rejects(tmp_path, bad):
    p = tmp_path / "bad.json"
    p.write_text(bad)
    with pytest.raises(DomainError):
        load_domain(str(p))


def test_disconnected_domain_rejected():
    with pytest.raises(DomainError):
        load_domain({"type": "boxes", "boxes": [[0, 0, 1, 1], [2, 0, 3, 1]]})


def test_gallery_is_well_formed():
    for name in gallery_names():
        d = load_domain(name)
        assert d.area() > 0
        assert d.contains(np.asarray(d.basepoint, float))[0]
    with pytest.raises(DomainError):
        load_domain("no_such_domain")


def test_polygon_domain_with_hole():
    d = polygon_domain([(0, 0), (3, 0), (3, 3), (0, 3)], holes=[[(1, 1), (2, 1), (2, 2), (1, 2)]])
    assert d.area() == pytest.approx(8.0)
    assert not d.contains((1.5, 1.5))[0]
    assert d.rho((0.5, 1.5))[0] == pytest.approx(0.5)
