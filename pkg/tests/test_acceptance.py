"""Acceptance criteria 1-10, one test each; a PASS/FAIL line per criterion is
printed in the terminal summary."""
import time

import numpy as np
from conftest import boundary, domain, whitney
from oracle import GridOracle
from subhyp import criteria, extension
from subhyp.alpha_boundary import build_alpha_boundary
from subhyp.geometry import MULTI_SLIT_JUNCTIONS, gallery_names, load_domain
from subhyp.metrics import DIVERGENCE_GUARD, d_tilde
from subhyp.whitney import build_whitney, verify_whitney

RESULTS = {}


def record(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    assert ok, detail


# five designated pairs per gallery domain
ORACLE_PAIRS = {
    "unit_square": [((0.3, 0.5), (0.7, 0.5)), ((0.1, 0.1), (0.9, 0.9)), ((0.05, 0.5), (0.95, 0.5)),
                    ((0.2, 0.8), (0.25, 0.75)), ((0.02, 0.02), (0.5, 0.3))],
    "slit_square": [((0, 0.1), (0, -0.1)), ((-0.3, 0.05), (0.3, -0.05)), ((0.7, 0.5), (-0.7, -0.5)),
                    ((0, 0.5), (0, 0.9)), ((0.45, 0.02), (0.45, -0.02))],
    "comb_domain": [((0.25, 0.5), (0.6, 0.5)), ((0.1, 0.1), (0.4, 0.9)), ((0.45, 0.5), (0.55, 0.5)),
                    ((0.25, 0.5), (0.7, 0.8)), ((0.3, 0.95), (0.6, 0.05))],
    "multi_slit": [((0, 0), (-0.6, 0.6)), ((0.4, 0.6), (0.6, 0.4)), ((-0.5, -0.45), (-0.5, -0.55)),
                   ((0.45, -0.4), (0.55, -0.6)), ((0.9, 0.9), (-0.9, -0.9))],
    "annulus": [((0.5, 0.5), (-0.5, -0.5)), ((0, 0.5), (0, -0.5)), ((0.6, 0), (0.9, 0)),
                ((0.3, 0.3), (-0.3, 0.3)), ((-0.9, 0.9), (0.9, -0.9))],
    "outward_cusp": [((-0.5, 0), (0.5, 0)), ((-0.9, 0.4), (-0.1, -0.4)), ((0.2, 0), (0.7, 0)),
                     ((-0.5, 0.3), (-0.5, -0.3)), ((0, 0.2), (0.8, 0))],
}


def test_criterion_01_whitney_validity():
    bad, detail = [], {}
    for name in gallery_names():
        rep = verify_whitney(whitney(name, 8))
        defs = [whitney(name, k).deficit_area for k in (6, 7, 8, 9)]
        shrink = [defs[i] / defs[i + 1] for i in range(3)]
        detail[name] = (rep["wcov_ii"]["failures"], rep["wadd_1"]["failures"], [round(s, 3) for s in shrink])
        if not (rep["wcov_ii"]["pass"] and rep["wadd_1"]["pass"] and min(shrink) >= 1.9):
            bad.append(name)
    record(1, not bad, f"failing domains {bad}; (wcov fails, wadd fails, deficit shrink) {detail}")


def test_criterion_02_partition_of_unity():
    out = {}
    for name in gallery_names():
        out[name] = criteria.check_pu(whitney(name, 8), n_sum=10000, n_grad=1000, seed=0)
    ok = all(r["max_sum_error"] < 1e-9 and r["max_grad_rel_error"] <= 1e-5
             and r["n_sum"] >= 10000 and r["n_grad"] >= 1000 for r in out.values())
    worst = {n: (r["max_sum_error"], r["max_grad_rel_error"]) for n, r in out.items()}
    record(2, ok, f"(sum error, gradient relative error) {worst}")


def test_criterion_03_metric_oracle():
    ratios = {}
    for name, pairs in ORACLE_PAIRS.items():
        d = domain(name)
        w = whitney(name, 8)
        orc = GridOracle(d, 1024)
        for a in (1 / 3, 0.5, 1.0):
            for x, y in pairs:
                ratios[(name, round(a, 3), x, y)] = d_tilde(d, w, x, y, a).upper / orc.d_tilde(x, y, a)
    r = np.array(list(ratios.values()))
    worst = max(ratios, key=lambda k: max(ratios[k], 1 / ratios[k]))
    record(3, bool(np.all((r >= 0.5) & (r <= 2.0))),
           f"{len(r)} pairs, ratio range [{r.min():.3f}, {r.max():.3f}], worst {worst}")


def test_criterion_04_lemma_suite():
    failed, times = {}, {}
    for name in gallery_names():
        t = time.time()
        rep = criteria.lemma_suite(domain(name), depth=8, seed=0)
        times[name] = round(time.time() - t, 1)
        bad = [k for k, v in rep.items() if isinstance(v, dict) and not v["pass"]]
        if bad or not rep["pass"]:
            failed[name] = bad
    record(4, not failed, f"failed checks {failed}; seconds per domain {times}")


def test_criterion_05_agglutination():
    ab = build_alpha_boundary(domain("slit_square"), whitney("slit_square", 9), 0.5)
    S = np.asarray(ab.sample_set)
    c = np.asarray(ab.counts())
    on_slit = (np.abs(S[:, 1]) < 1e-12) & (np.abs(S[:, 0]) < 0.5)
    mid = on_slit & (np.abs(S[:, 0]) <= 0.25)
    tips = (np.abs(S[:, 1]) < 1e-12) & (np.abs(np.abs(S[:, 0]) - 0.5) < 1e-12)
    outer = np.max(np.abs(S), axis=1) > 1 - 1e-12
    slit_ok = mid.sum() > 0 and np.all(c[mid] == 2) and tips.sum() == 2 and np.all(c[tips] == 1) \
        and np.all(c[outer] == 1)
    # multi-slit junctions
    pts = list(MULTI_SLIT_JUNCTIONS)
    abm = build_alpha_boundary(domain("multi_slit"), whitney("multi_slit", 9), 0.5, samples=pts)
    got = abm.counts()
    want = [MULTI_SLIT_JUNCTIONS[p] for p in pts]
    record(5, slit_ok and got == want,
           f"slit: {int(mid.sum())} mid-slit samples with counts {sorted(set(c[mid].tolist()))}, "
           f"tip counts {c[tips].tolist()}, outer counts {sorted(set(c[outer].tolist()))}; "
           f"multi-slit junction counts {got} vs hand-computed {want}")


def test_criterion_06_inaccessibility():
    dist, flagged = {}, {}
    back = np.array([[1.0, 0.5]])
    for k in range(2, 7):
        name = f"comb_domain:{k}"
        d = load_domain(name)
        w = build_whitney(d, 9)
        ab = build_alpha_boundary(d, w, 1.0, samples=back)
        if ab.elements:
            dist[k] = min(e.ladder[-1] for e in ab.elements)
        else:
            dist[k] = ab.inaccessible[0]["ladder"][-1]
        flagged[k] = len(ab.inaccessible) == 1
    growth = [dist[k + 1] / dist[k] for k in range(2, 6)]
    ok = all(g >= 1.5 for g in growth) and dist[6] > DIVERGENCE_GUARD and flagged[6]
    record(6, ok, f"back-wall chain distance by teeth {dist}; growth per tooth "
                  f"{[round(g, 3) for g in growth]}; flagged inaccessible {flagged}")


def _roundtrip_error(depth, n=200):
    d = domain("unit_square")
    w = whitney("unit_square", depth)
    ab = boundary("unit_square", depth, 0.5)
    f = extension.linear_datum()
    ef = extension.build_extension(f, w, ab)
    rng = np.random.default_rng(0)
    ids = rng.choice(len(ab.elements), min(n, len(ab.elements)), replace=False)
    err = [abs(extension.trace(ef, ab, ab.elements[i]).value - f(d, ab.elements[i])) for i in ids]
    return max(err), len(ids)


def test_criterion_07_extension_round_trip():
    e7, _ = _roundtrip_error(7)
    e8, n8 = _roundtrip_error(8)
    e9, _ = _roundtrip_error(9)
    w = whitney("unit_square", 8)
    ec = extension.build_extension(extension.constant_datum(5.0), w)
    rng = np.random.default_rng(1)
    P = criteria._random_covered(w, 1000, rng)
    const_err = float(np.max(np.abs(ec.evaluate(P) - 5.0)))
    f, g = extension.linear_datum(), extension.bump_datum()
    a, b = 2.5, -1.75
    h = extension.combine(a, f, b, g)
    lin = a * extension.build_extension(f, w).evaluate(P) + b * extension.build_extension(g, w).evaluate(P)
    lin_err = float(np.max(np.abs(extension.build_extension(h, w).evaluate(P) - lin)))
    ok = n8 == 200 and e8 <= 0.05 and e7 / e9 >= 1.3 and const_err <= 1e-12 and lin_err <= 1e-10
    record(7, ok, f"round-trip max error depth 7/8/9 = {e7:.4g}/{e8:.4g}/{e9:.4g} over {n8} elements "
                  f"(contraction {e7 / e9:.3g}); constant error {const_err:.2e}; linearity error {lin_err:.2e}")


def test_criterion_08_slit_extension():
    f = extension.slit_datum()
    grads = {}
    for k in (7, 8, 9):
        ef = extension.build_extension(f, whitney("slit_square", k))
        grads[k] = extension.seminorm_quadrature(ef, 4.0) ** 0.25
    top, bot = ef.evaluate(np.array([[0.0, 0.05], [0.0, -0.05]]))
    ratios = [grads[k + 1] / grads[k] for k in (7, 8)]
    ok = abs(top) <= 0.05 and abs(bot - 1) <= 0.05 and all(np.isfinite(list(grads.values()))) \
        and all(0.5 <= r <= 2 for r in ratios)
    record(8, ok, f"F(0,0.05)={top:.4g}, F(0,-0.05)={bot:.4g} at depth 9; "
                  f"|grad F|_L4 by depth {({k: round(v, 4) for k, v in grads.items()})}")


COHERENCE_DATA = {"constant": lambda: extension.constant_datum(1.0), "x1": extension.linear_datum,
                  "slit": extension.slit_datum, "bump": extension.bump_datum}


def _quantities(f, w):
    ef = extension.build_extension(f, w)
    grad = extension.seminorm_quadrature(ef, 4.0) ** 0.25
    lam = criteria.variational_lambda(f, w, p=4.0, eta=criteria.ETA_L1P).lambda_root_p
    sharp = criteria.sharp_maximal(f, w, q=3.0, p=4.0).lp_norm
    return np.array([grad, lam, sharp])


def test_criterion_09_criterion_coherence():
    problems, table = [], {}
    for name in ("unit_square", "slit_square"):
        for key, make in COHERENCE_DATA.items():
            f = make()
            vals = {k: _quantities(f, whitney(name, k)) for k in (7, 8, 9)}
            if key == "constant" or (key == "slit" and name == "unit_square"):
                # constant on this domain (no slit faces): ratios are 0/0, so all three
                # quantities must vanish instead (the gradient up to rounding)
                if any(v[1] != 0 or v[2] != 0 or v[0] > 1e-10 for v in vals.values()):
                    problems.append((name, key, "nonzero for constant data"))
                continue
            rat = {k: np.array([v[0] / v[1], v[0] / v[2], v[1] / v[2]]) for k, v in vals.items()}
            table[(name, key)] = {k: np.round(r, 3).tolist() for k, r in rat.items()}
            for k, r in rat.items():
                if not (np.all(np.isfinite(r)) and np.all((r >= 1e-2) & (r <= 1e2))):
                    problems.append((name, key, k, "ratio outside [1e-2, 1e2]"))
            for k in (7, 8):
                ch = rat[k + 1] / rat[k]
                if not np.all((ch >= 0.5) & (ch <= 2.0)):
                    problems.append((name, key, k, "ratio changed by more than 2x"))
    growth = {}
    for name in ("unit_square", "slit_square"):
        f = extension.cusp_datum()
        lam = [criteria.variational_lambda(f, whitney(name, k), p=4.0).lambda_est for k in (7, 8, 9)]
        growth[name] = [lam[1] / lam[0], lam[2] / lam[1]]
        if min(growth[name]) < 4:
            problems.append((name, "cusp", "lambda growth below 4x"))
    record(9, not problems, f"problems {problems}; ratios (grad/lam, grad/sharp, lam/sharp) {table}; "
                            f"cusp lambda growth per level {growth}")


def test_criterion_10_holder():
    out = {}
    cross = [((x, 0.02), (x, -0.02)) for x in np.linspace(-0.4, 0.4, 9)] + \
            [((x, 0.2), (-x, -0.2)) for x in (0.0, 0.2, 0.45)]
    cases = [(n, extension.linear_datum(), None) for n in gallery_names()]
    cases.append(("slit_square", extension.slit_datum(), cross))
    for name, f, extra in cases:
        r = []
        for k in (7, 9):
            ef = extension.build_extension(f, whitney(name, k))
            r.append(criteria.check_holder(ef, whitney(name, k), p=4.0, n_pairs=1000, seed=0,
                                           extra_pairs=extra)["max_ratio"])
        out[(name, "slit data" if extra else "x1")] = r
    ok = all(np.all(np.isfinite(r)) and r[0] > 0 and 0.25 <= r[1] / r[0] <= 4 for r in out.values())
    record(10, ok, {k: [round(v, 4) for v in r] for k, r in out.items()})
