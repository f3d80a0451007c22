"""Trace-norm characterizations and inequality verifiers.

* variational_lambda: packing sums of boundary-value oscillation over
  (alpha, Q)-visible element pairs, restricted to Whitney cubes;
* collar_lp_norm / trace_norm_W1p: the collar size term plus lambda;
* sharp_maximal: fractional sharp maximal function in the quasi-metric
  rho_beta^(1/beta);
* check_holder / check_sobolev_poincare: empirical inequality constants.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.sparse.csgraph import dijkstra as sp_dijkstra
from scipy.spatial import cKDTree

from .geometry import Domain, FaceTag, Q_visible_batch
from .metrics import alpha_from_exponent, chain_graph, d_tilde_many
from .whitney import WhitneyDecomposition

THETA = 4.0
ETA_L1P = 41.0
ETA_W1P = 22.0 * THETA ** 2
MAX_CANDIDATES = 64
N_RADII = 24


# ---------------------------------------------------------------------------
# canonical elements


@dataclass
class ElementTable:
    """Distinct canonical elements (a_Q, face_Q) of a decomposition."""
    anchors: np.ndarray
    faces: List[FaceTag]
    cube_elem: np.ndarray  # element index of each cube
    rep: np.ndarray  # smallest cube carrying each element
    vertex: np.ndarray  # anchor is not in the relative interior of a segment


_TABLES: Dict[int, Tuple[WhitneyDecomposition, ElementTable]] = {}


def element_table(w: WhitneyDecomposition) -> ElementTable:
    hit = _TABLES.get(id(w))
    if hit is not None and hit[0] is w:
        return hit[1]
    d = w.domain
    keys = {}
    cube_elem = np.empty(len(w), dtype=int)
    anchors, faces = [], []
    for q in range(len(w)):
        k = (round(float(w.anchor[q, 0]), 12), round(float(w.anchor[q, 1]), 12), w.face[q])
        e = keys.get(k)
        if e is None:
            e = keys[k] = len(anchors)
            anchors.append(w.anchor[q])
            faces.append(w.face[q])
        cube_elem[q] = e
    anchors = np.array(anchors)
    rep = np.full(len(anchors), -1)
    order = np.argsort(w.radius, kind="stable")[::-1]
    rep[cube_elem[order]] = order  # last write wins: the smallest cube
    vertex = np.array([not d.is_interior_of_segment(a, f.segment) for a, f in zip(anchors, faces)])
    t = ElementTable(anchors, faces, cube_elem, rep, vertex)
    if len(_TABLES) > 16:
        _TABLES.clear()
    _TABLES[id(w)] = (w, t)
    return t


def element_values(f, w: WhitneyDecomposition) -> np.ndarray:
    t = element_table(w)
    if hasattr(f, "values"):
        return f.values(w.domain, t.anchors, t.faces)
    return np.asarray(f(w.domain, t.anchors, t.faces), dtype=float)


# ---------------------------------------------------------------------------
# visibility sets


@dataclass
class VisibilitySets:
    ptr: np.ndarray
    idx: np.ndarray  # element indices, CSR by cube


_VIS: Dict[tuple, Tuple[WhitneyDecomposition, VisibilitySets]] = {}


def visibility_sets(w: WhitneyDecomposition, eta: float, raw: bool = False,
                    max_candidates: int = MAX_CANDIDATES) -> VisibilitySets:
    """For each cube Q, the elements with anchors in eta*Q that are (alpha,Q)-visible.

    Visibility means (i) the anchor sees Q from the element's side and
    (ii) the straight approach from Q reaches the anchor inside the
    element's local sector.  raw=True drops the side and sector
    conditions, treating boundary points as plain points of the boundary.
    """
    key = (id(w), float(eta), bool(raw), int(max_candidates))
    hit = _VIS.get(key)
    if hit is not None and hit[0] is w:
        return hit[1]
    d = w.domain
    t = element_table(w)
    tree = cKDTree(t.anchors)
    k = min(max_candidates, len(t.anchors))
    dist, nb = tree.query(w.center, k=k, p=np.inf)
    dist = dist.reshape(len(w), -1)
    nb = nb.reshape(len(w), -1)
    inside = dist <= eta * w.radius[:, None]
    qq, jj = np.nonzero(inside)
    ee = nb[qq, jj]
    faces = None if raw else [t.faces[e] for e in ee]
    ok = Q_visible_batch(d, w.center[qq], w.radius[qq], t.anchors[ee], faces)
    if not raw:
        # sector condition at vertices
        for m in np.nonzero(ok & t.vertex[ee])[0]:
            e = ee[m]
            a = t.anchors[e]
            if d.face_of_approach(a, w.center[qq[m]] - a) != t.faces[e]:
                ok[m] = False
    qq, ee = qq[ok], ee[ok]
    counts = np.bincount(qq, minlength=len(w))
    ptr = np.concatenate([[0], np.cumsum(counts)])
    vs = VisibilitySets(ptr, ee.astype(int))
    if len(_VIS) > 32:
        _VIS.clear()
    _VIS[key] = (w, vs)
    return vs


# ---------------------------------------------------------------------------
# variational functional


@dataclass
class TraceNormReport:
    lambda_est: float
    per_cube_terms: List[tuple]  # (cube id, (element 1, element 2), term)
    eta: float
    p: float
    restricted_to_whitney: bool = True
    n_cubes: int = 0
    warning: str = ""

    @property
    def lambda_root_p(self) -> float:
        return self.lambda_est ** (1.0 / self.p)

    def top(self, n: int = 10) -> List[tuple]:
        return sorted(self.per_cube_terms, key=lambda r: (-r[2], r[0]))[:n]


def collar_cubes(w: WhitneyDecomposition, epsilon: float) -> np.ndarray:
    """Cubes meeting {x in domain : dist(x, boundary) < epsilon}."""
    return np.nonzero(w.dist < epsilon)[0]


def variational_lambda(f, w: WhitneyDecomposition, ab=None, p: float = 4.0, eta: float = ETA_L1P,
                       collar_epsilon: Optional[float] = None, ignore_agglutination: bool = False,
                       max_candidates: int = MAX_CANDIDATES) -> TraceNormReport:
    """Sum over Whitney cubes of the largest |f(w1) - f(w2)|^p / (diam Q)^(p-2).

    The sum over the pairwise disjoint Whitney cubes is one admissible
    packing, so lambda_est bounds the supremum over packings from below.
    """
    if p <= 2:
        raise ValueError("p must exceed the dimension 2")
    vals = element_values(f, w)
    vs = visibility_sets(w, eta, ignore_agglutination, max_candidates)
    cubes = np.arange(len(w)) if collar_epsilon is None else collar_cubes(w, collar_epsilon)
    terms = []
    total = []
    for q in cubes:
        els = vs.idx[vs.ptr[q]:vs.ptr[q + 1]]
        if len(els) < 2:
            continue
        v = vals[els]
        i, j = int(np.argmax(v)), int(np.argmin(v))
        osc = float(v[i] - v[j])
        if osc <= 0:
            continue
        term = osc ** p / w.diam[q] ** (p - 2.0)
        terms.append((int(q), (int(els[i]), int(els[j])), term))
        total.append(term)
    lam = float(math.fsum(total))
    msg = ""
    if vs.ptr[-1] == 0:
        msg = "no candidate pairs"
        warnings.warn(msg)
    return TraceNormReport(lam, terms, float(eta), float(p), True, len(cubes), msg)


def recheck_report(rep: TraceNormReport, w: WhitneyDecomposition, raw: bool = False) -> bool:
    """Re-verify visibility and the eta*Q anchor condition for every contributing pair."""
    from .geometry import is_Q_visible
    d = w.domain
    t = element_table(w)
    for q, pair, _ in rep.per_cube_terms:
        cube = w.cube(q)
        for e in pair:
            a = t.anchors[e]
            if np.max(np.abs(a - w.center[q])) > rep.eta * w.radius[q] * (1 + 1e-12):
                return False
            if not is_Q_visible(d, cube, a, None if raw else t.faces[e]):
                return False
            if not raw and t.vertex[e] and d.face_of_approach(a, w.center[q] - a) != t.faces[e]:
                return False
    return True


# ---------------------------------------------------------------------------
# collar terms


@dataclass
class CollarConfig:
    epsilon: float = 0.1
    theta: float = THETA
    eta: float = ETA_W1P

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.theta < 1:
            raise ValueError("theta must be >= 1")
        if self.eta < 22 * self.theta ** 2:
            raise ValueError("eta must be >= 22 theta^2")


def collar_area_weights(w: WhitneyDecomposition, epsilon: float, sub: int = 32):
    """(cube ids, |Q intersect collar|) for cubes meeting the collar."""
    d = w.domain
    cubes = collar_cubes(w, epsilon)
    area = w.diam[cubes] ** 2
    partial = cubes[w.dist[cubes] + w.diam[cubes] >= epsilon]
    if len(partial):
        g = (np.arange(sub) + 0.5) / sub * 2 - 1
        X, Y = np.meshgrid(g, g, indexing="ij")
        off = np.column_stack([X.ravel(), Y.ravel()])
        frac = np.empty(len(partial))
        for s in range(0, len(partial), 256):
            blk = partial[s:s + 256]
            P = w.center[blk][:, None, :] + w.radius[blk][:, None, None] * off[None]
            r = d.rho(P.reshape(-1, 2)).reshape(len(blk), -1)
            frac[s:s + 256] = np.mean(r < epsilon, axis=1)
        pos = np.searchsorted(cubes, partial)
        area[pos] *= frac
    return cubes, area


def collar_lp_norm(f, w: WhitneyDecomposition, ab, cfg: CollarConfig, p: float) -> float:
    """Integral over the collar of |f(T(x))|^p, T mapping each cube to its element (p-th power)."""
    cubes, area = collar_area_weights(w, cfg.epsilon)
    t = element_table(w)
    v = element_values(f, w)[t.cube_elem[cubes]]
    return float(math.fsum(np.abs(v) ** p * area))


def trace_norm_W1p(f, w: WhitneyDecomposition, ab, cfg: CollarConfig, p: float) -> dict:
    coll = collar_lp_norm(f, w, ab, cfg, p)
    rep = variational_lambda(f, w, ab, p, cfg.eta, collar_epsilon=cfg.epsilon)
    return {"collar_lp": coll, "lambda": rep.lambda_est,
            "norm": coll ** (1.0 / p) + rep.lambda_est ** (1.0 / p), "report": rep}


# ---------------------------------------------------------------------------
# sharp maximal function


@dataclass
class SharpMaximalField:
    values: np.ndarray  # per Whitney cube (at its center)
    alpha: float
    beta: float
    radii: np.ndarray
    empty: np.ndarray  # no element within the largest radius
    lp_norm: float = 0.0
    collar_lp_norm: Optional[float] = None


def sharp_maximal(f, w: WhitneyDecomposition, ab_alpha=None, ab_beta=None, q: float = 3.0,
                  p: float = 4.0, n_sources: int = 4096, seed: int = 0,
                  collar_epsilon: Optional[float] = None) -> SharpMaximalField:
    """f#(x) = sup_r osc{f(w^[alpha]) : rho_beta(x, w)^(1/beta) <= r} / r at cube centers.

    rho_beta(x, w) is the chain cost from x's cube to the element's
    smallest carrying cube; elements beyond n_sources are subsampled.
    w^[alpha] keeps the element's anchor and local sector.
    """
    if not 2 < q < p:
        raise ValueError("need 2 < q < p")
    alpha = alpha_from_exponent(p)
    beta = alpha_from_exponent(q)
    t = element_table(w)
    vals = element_values(f, w)
    ne = len(t.anchors)
    if ne > n_sources:
        rng = np.random.default_rng(seed)
        src = np.sort(rng.choice(ne, n_sources, replace=False))
    else:
        src = np.arange(ne)
    g = chain_graph(w, beta)
    d = w.domain
    rmax = 2.0 * d.side
    rmin = float(w.diam.min())
    radii = rmax * 2.0 ** -np.arange(N_RADII)
    radii = radii[radii >= rmin / 2] if np.any(radii >= rmin / 2) else radii[:1]
    R = len(radii)
    vmax = np.full((R, len(w)), -np.inf)
    vmin = np.full((R, len(w)), np.inf)
    for s in range(0, len(src), 256):
        reps = t.rep[src[s:s + 256]]
        v = vals[src[s:s + 256]][:, None]
        D = sp_dijkstra(g.matrix, directed=True, indices=reps)  # (S, N)
        D += 0.5 * (g.node_w[reps][:, None] + g.node_w[None, :])
        delta = D ** (1.0 / beta)
        for k, r in enumerate(radii):
            m = delta <= r
            vmax[k] = np.maximum(vmax[k], np.max(np.where(m, v, -np.inf), axis=0))
            vmin[k] = np.minimum(vmin[k], np.min(np.where(m, v, np.inf), axis=0))
    has = np.isfinite(vmax)
    osc = np.where(has, vmax - vmin, 0.0) / radii[:, None]
    out = osc.max(axis=0)
    empty = ~has[0]
    area = w.diam ** 2
    lp = float(math.fsum(out ** p * area)) ** (1.0 / p)
    coll = None
    if collar_epsilon is not None:
        cubes, ca = collar_area_weights(w, collar_epsilon)
        coll = float(math.fsum(out[cubes] ** p * ca)) ** (1.0 / p)
    return SharpMaximalField(out, alpha, beta, radii, empty, lp, coll)


# ---------------------------------------------------------------------------
# inequality verifiers


_PAIRS: Dict[tuple, tuple] = {}


def holder_pairs(w: WhitneyDecomposition, alpha: float, n_pairs: int = 1000, seed: int = 0,
                 extra=None):
    """Random covered interior pairs with their d~_alpha upper estimates (cached)."""
    key = (id(w), float(alpha), int(n_pairs), int(seed),
           None if extra is None else np.asarray(extra, float).tobytes())
    hit = _PAIRS.get(key)
    if hit is not None and hit[0] is w:
        return hit[1:]
    d = w.domain
    rng = np.random.default_rng(seed)
    lo = np.asarray(d.origin, dtype=float)

    def draw(m):
        pts = []
        while sum(len(b) for b in pts) < m:
            P = lo + rng.uniform(0, d.side, (4 * m, 2))
            P = P[d.contains(P)]
            P = P[w.locate(P) >= 0]
            pts.append(P)
        return np.concatenate(pts)[:m]

    n_src = max(1, int(round(math.sqrt(n_pairs))))
    per = int(math.ceil(n_pairs / n_src))
    X = np.repeat(draw(n_src), per, axis=0)[:n_pairs]
    Y = draw(n_pairs)
    if extra is not None:
        ex = np.asarray(extra, dtype=float).reshape(-1, 2, 2)
        X = np.concatenate([X, ex[:, 0]])
        Y = np.concatenate([Y, ex[:, 1]])
    est = d_tilde_many(d, w, X, Y, alpha)
    dt = np.array([e.upper for e in est])
    if len(_PAIRS) > 16:
        _PAIRS.clear()
    _PAIRS[key] = (w, X, Y, dt)
    return X, Y, dt


def check_holder(F, w: WhitneyDecomposition, p: float = 4.0, n_pairs: int = 1000, seed: int = 0,
                 extra_pairs=None) -> dict:
    """max |F(x) - F(y)| / d~_alpha(x, y)^(1 - 1/p) over sampled pairs.

    d~ is an upper estimate, so the ratio is a lower bound for the true constant.
    """
    alpha = alpha_from_exponent(p)
    X, Y, dt = holder_pairs(w, alpha, n_pairs, seed, extra_pairs)
    fx = F(X) if callable(F) else F.evaluate(X)
    fy = F(Y) if callable(F) else F.evaluate(Y)
    ok = np.isfinite(dt) & (dt > 0)
    ratio = np.zeros(len(X))
    ratio[ok] = np.abs(fx[ok] - fy[ok]) / dt[ok] ** (1.0 - 1.0 / p)
    k = int(np.argmax(ratio))
    return {"max_ratio": float(ratio[k]), "argmax_pair": [X[k].tolist(), Y[k].tolist()],
            "n_pairs": int(len(X)), "n_unreachable": int(np.count_nonzero(~np.isfinite(dt))),
            "ratios": ratio}


def check_sobolev_poincare(ef, q: float = 3.0, n_cubes: int = 200, seed: int = 0,
                           pairs_per_cube: int = 16) -> dict:
    """max |F(x) - F(y)| / (diam Q (avg_Q |grad F|^q)^(1/q)) over x, y in sampled cubes Q."""
    from .extension import quadrature_points
    w = ef.w
    rng = np.random.default_rng(seed)
    cubes = rng.choice(len(w), min(n_cubes, len(w)), replace=False)
    noise = 1e-12 * max(float(np.max(np.abs(ef.coeffs))), 1e-300)
    best = 0.0
    ratios = []
    for qid in cubes:
        c, r = w.center[qid], w.radius[qid]
        P, W, _ = quadrature_points(w, idx=[qid])
        G = ef.gradient(P)
        avg = float(np.sum(W * np.hypot(G[:, 0], G[:, 1]) ** q) / (2 * r) ** 2) ** (1.0 / q)
        A = c + r * rng.uniform(-1, 1, (pairs_per_cube, 2))
        B = c + r * rng.uniform(-1, 1, (pairs_per_cube, 2))
        diff = np.abs(ef.evaluate(A) - ef.evaluate(B))
        diff[diff <= noise] = 0.0  # rounding in the partition of unity
        den = 2 * r * avg
        rr = np.where(den > 0, diff / np.where(den > 0, den, 1.0), 0.0)
        ratios.append(float(rr.max()))
        best = max(best, float(rr.max()))
    return {"max_ratio": best, "n_cubes": int(len(cubes)), "ratios": np.array(ratios)}


# ---------------------------------------------------------------------------
# lemma-check harness


def _random_covered(w: WhitneyDecomposition, n: int, rng) -> np.ndarray:
    d = w.domain
    lo = np.asarray(d.origin, dtype=float)
    out = []
    while sum(len(b) for b in out) < n:
        P = lo + rng.uniform(0, d.side, (4 * n, 2))
        P = P[d.contains(P)]
        out.append(P[w.locate(P) >= 0])
    return np.concatenate(out)[:n]


def check_pu(w: WhitneyDecomposition, n_sum: int = 10000, n_grad: int = 1000, seed: int = 0) -> dict:
    """Partition of unity: sums to one, analytic gradients vs central differences."""
    from .extension import _pu
    rng = np.random.default_rng(seed)
    P = _random_covered(w, n_sum, rng)
    C, phi, _ = _pu(w, P)
    sum_err = float(np.max(np.abs(phi.sum(axis=1) - 1.0)))
    # gradient check away from the edges of the dilated cubes
    G = _random_covered(w, 4 * n_grad, rng)
    C, phi, gphi = _pu(w, G)
    Cs = np.where(C >= 0, C, 0)
    T = np.abs(G[:, None, :] - w.center[Cs]) / (1.125 * w.radius[Cs])[..., None]
    near_edge = np.any((C >= 0) & np.any((T > 0.9) & (T < 1.1), axis=2), axis=1)
    G = G[~near_edge][:n_grad]
    C, phi, gphi = _pu(w, G)
    q0 = C[:, 0]
    h = 1e-6 * w.diam[q0]
    worst = 0.0
    for k in range(2):
        e = np.zeros(2)
        e[k] = 1.0
        Cp, php, _ = _pu(w, G + h[:, None] * e)
        Cm, phm, _ = _pu(w, G - h[:, None] * e)
        for i in range(len(G)):
            vp = dict(zip(Cp[i], php[i]))
            vm = dict(zip(Cm[i], phm[i]))
            for j, c in enumerate(C[i]):
                if c < 0:
                    continue
                fd = (vp.get(c, 0.0) - vm.get(c, 0.0)) / (2 * h[i])
                scale = max(float(np.max(np.abs(gphi[i]))), 1e-6 / w.diam[q0[i]])
                worst = max(worst, abs(fd - gphi[i, j, k]) / scale)
    return {"pass": bool(sum_err < 1e-9 and worst <= 1e-5), "max_sum_error": sum_err,
            "max_grad_rel_error": worst, "n_sum": int(len(P)), "n_grad": int(len(G))}


def check_q_om(w: WhitneyDecomposition, alpha: float, n: int = 200, seed: int = 0) -> dict:
    """len_alpha([x, y]) <= ||x - y||^alpha / alpha when ||x - y|| <= max(rho(x), rho(y))."""
    from .metrics import segment_integrals
    d = w.domain
    rng = np.random.default_rng(seed)
    X = _random_covered(w, n, rng)
    r = d.rho(X)
    dirs = rng.uniform(-1, 1, (n, 2))
    dirs /= np.max(np.abs(dirs), axis=1, keepdims=True)
    Y = X + (r * rng.uniform(0.05, 0.999, n))[:, None] * dirs
    L = np.max(np.abs(X - Y), axis=1)
    vals = segment_integrals(d, X, Y, alpha)
    bound = L ** alpha / alpha
    ratio = vals / bound
    return {"pass": bool(np.all(vals <= bound * (1 + 1e-6))), "max_ratio": float(ratio.max()), "n": n}


def check_chain_bounds(w: WhitneyDecomposition, alpha: float, n: int = 200, seed: int = 0) -> dict:
    """Chain bound upper <= (1 + 2/alpha) chain_sum + gap, and the near/far comparison."""
    d = w.domain
    rng = np.random.default_rng(seed)
    X = _random_covered(w, n, rng)
    # half of the pairs close together (near regime), half random
    Y = _random_covered(w, n, rng)
    m = n // 2
    r = d.rho(X[:m])
    step = rng.uniform(-1, 1, (m, 2)) * (0.9 * r)[:, None]
    Yn = X[:m] + step
    okn = d.contains(Yn) & (w.locate(Yn) >= 0)
    Y[:m] = np.where(okn[:, None], Yn, Y[:m])
    est = d_tilde_many(d, w, X, Y, alpha)
    chain_ok, near_ok, far_ok = True, True, True
    worst_chain, worst_near = 0.0, 0.0
    rx, ry = d.rho(X), d.rho(Y)
    for x, y, e, a, b in zip(X, Y, est, rx, ry):
        L = float(np.max(np.abs(x - y)))
        gap = L ** alpha
        if not np.isfinite(e.upper):
            continue
        lim = (1 + 2 / alpha) * e.chain_sum + gap
        worst_chain = max(worst_chain, e.upper / lim if lim > 0 else 0.0)
        chain_ok &= e.upper <= lim * (1 + 1e-9)
        if L < min(a, b):
            near_ok &= e.upper <= (1 + 1 / alpha) * gap * (1 + 1e-6)
            if gap > 0:
                worst_near = max(worst_near, e.upper / ((1 + 1 / alpha) * gap))
        else:
            far_ok &= e.upper >= 2 ** (alpha - 1) * gap
    return {"pass": bool(chain_ok and near_ok and far_ok), "chain_bound_ratio": worst_chain,
            "near_ratio": worst_near, "chain_ok": bool(chain_ok), "near_ok": bool(near_ok),
            "far_ok": bool(far_ok), "n": n}


def check_om_vis(w: WhitneyDecomposition, n: int = 1000, seed: int = 0) -> dict:
    """Touching Q1, Q2 with diam Q2 >= diam Q1: both canonical elements are
    (alpha, Q1)-visible and their anchors lie in 41 Q1."""
    d = w.domain
    rng = np.random.default_rng(seed)
    E = w.edges()
    E = E[rng.choice(len(E), min(n, len(E)), replace=False)]
    swap = w.radius[E[:, 0]] > w.radius[E[:, 1]]
    E[swap] = E[swap][:, ::-1]
    q1 = np.concatenate([E[:, 0], E[:, 0]])
    src = np.concatenate([E[:, 0], E[:, 1]])
    anchors = w.anchor[src]
    faces = [w.face[s] for s in src]
    vis = Q_visible_batch(d, w.center[q1], w.radius[q1], anchors, faces)
    t = element_table(w)
    for m in np.nonzero(vis)[0]:
        if t.vertex[t.cube_elem[src[m]]]:
            a = anchors[m]
            if d.face_of_approach(a, w.center[q1[m]] - a) != faces[m]:
                vis[m] = False
    inside = np.max(np.abs(anchors - w.center[q1]), axis=1) <= 41 * w.radius[q1] * (1 + 1e-12)
    spread = np.max(np.abs(anchors - w.center[q1]), axis=1) / w.radius[q1]
    return {"pass": bool(np.all(vis) and np.all(inside)), "n_pairs": int(len(E)),
            "visible_fraction": float(vis.mean()), "max_anchor_offset_in_radii": float(spread.max())}


def lo_qa_constant(w: WhitneyDecomposition, alpha: float, n: int = 300, seed: int = 0) -> float:
    """max over sampled y in Q of [len_alpha(y -> x_Q -> a_Q) + ||y - a_Q||^alpha] / rho(y)^alpha."""
    from .metrics import segment_integrals
    d = w.domain
    rng = np.random.default_rng(seed)
    Y = _random_covered(w, n, rng)
    q = w.locate(Y)
    c, a = w.center[q], w.anchor[q]
    P0 = np.concatenate([Y, c])
    P1 = np.concatenate([c, a])
    v = segment_integrals(d, P0, P1, alpha)
    up = v[:n] + v[n:] + np.max(np.abs(Y - a), axis=1) ** alpha
    return float(np.max(up / d.rho(Y) ** alpha))


def check_extension_locality(ef, n_cubes: int = 300, seed: int = 0) -> dict:
    """Gradient and locality constants: sup_K |grad F| diam K and sup_K |F - c_K|,
    each divided by the largest coefficient jump to touching cubes."""
    from .extension import quadrature_points
    w = ef.w
    rng = np.random.default_rng(seed)
    cubes = np.sort(rng.choice(len(w), min(n_cubes, len(w)), replace=False))
    c_gr, c_cl = 0.0, 0.0
    zero_ok = True
    for k in cubes:
        nb = w.neighbors(k)
        jump = float(np.max(np.abs(ef.coeffs[nb] - ef.coeffs[k]))) if len(nb) else 0.0
        P = quadrature_points(w, order=4, idx=[k])[0]
        g = ef.gradient(P)
        gmax = float(np.max(np.hypot(g[:, 0], g[:, 1])))
        dev = float(np.max(np.abs(ef.evaluate(P) - ef.coeffs[k])))
        if jump == 0:
            zero_ok &= gmax <= 1e-9 and dev <= 1e-9
            continue
        c_gr = max(c_gr, gmax * w.diam[k] / jump)
        c_cl = max(c_cl, dev / jump)
    return {"gradient_constant": c_gr, "locality_constant": c_cl, "zero_jump_ok": bool(zero_ok)}


def lemma_suite(d: Domain, depth: int = 8, seed: int = 0, alphas=(1 / 3, 0.5, 1.0),
                p: float = 4.0, q: float = 3.0) -> dict:
    """Numerical checks of the geometric and analytic lemmas on one domain."""
    from .extension import build_extension, linear_datum
    from .whitney import build_whitney, verify_whitney
    w = build_whitney(d, depth)
    w0 = build_whitney(d, depth - 1)
    out = {"domain": d.name, "depth": depth}
    vw = verify_whitney(w)
    out["whitney"] = {"pass": bool(vw["pass"]), "coverage_deficit": vw["coverage_deficit"]}
    out["partition_of_unity"] = check_pu(w, seed=seed)
    out["q_om"] = {f"{a:.4g}": check_q_om(w, a, seed=seed) for a in alphas}
    out["q_om"]["pass"] = all(v["pass"] for v in out["q_om"].values())
    out["chain_bounds"] = {f"{a:.4g}": check_chain_bounds(w, a, seed=seed) for a in alphas}
    out["chain_bounds"]["pass"] = all(v["pass"] for k, v in out["chain_bounds"].items() if k != "pass")
    out["om_vis"] = check_om_vis(w, seed=seed)
    lo = {}
    for a in alphas:
        c1, c0 = lo_qa_constant(w, a, seed=seed), lo_qa_constant(w0, a, seed=seed)
        lo[f"{a:.4g}"] = {"constant": c1, "constant_prev_depth": c0,
                          "pass": bool(np.isfinite(c1) and 0.5 <= c1 / c0 <= 2.0)}
    lo["pass"] = all(v["pass"] for v in lo.values())
    out["lo_qa"] = lo
    f = linear_datum()
    ef, ef0 = build_extension(f, w), build_extension(f, w0)
    loc, loc0 = check_extension_locality(ef, seed=seed), check_extension_locality(ef0, seed=seed)
    out["e_gr"] = {"constant": loc["gradient_constant"], "constant_prev_depth": loc0["gradient_constant"],
                   "pass": bool(loc["zero_jump_ok"] and 0.5 <= loc["gradient_constant"]
                                / max(loc0["gradient_constant"], 1e-300) <= 2.0)}
    out["c_l"] = {"constant": loc["locality_constant"], "pass": bool(loc["locality_constant"] <= 10.0)}
    h1 = check_holder(ef, w, p, 1000, seed)
    h0 = check_holder(ef0, w0, p, 1000, seed)
    r = h1["max_ratio"] / max(h0["max_ratio"], 1e-300)
    out["uc_da"] = {"max_ratio": h1["max_ratio"], "max_ratio_prev_depth": h0["max_ratio"],
                    "pass": bool(np.isfinite(h1["max_ratio"]) and 0.25 <= r <= 4.0)}
    s1 = check_sobolev_poincare(ef, q, 200, seed)
    s0 = check_sobolev_poincare(ef0, q, 200, seed)
    out["spe"] = {"max_ratio": s1["max_ratio"], "max_ratio_prev_depth": s0["max_ratio"],
                  "pass": bool(np.isfinite(s1["max_ratio"]) and s1["max_ratio"] <= 2 * max(s0["max_ratio"], 1e-12))}
    out["pass"] = all(v["pass"] for v in out.values() if isinstance(v, dict))
    return out
