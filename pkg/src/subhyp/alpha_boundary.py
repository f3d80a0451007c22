"""The alpha-boundary: boundary elements as multi-scale clusters of Whitney cubes.

At a boundary point x and scale delta, the Whitney cubes of diameter
<= delta meeting the closed delta-ball around x split into connected
groups (local approaches).  Two groups are merged when a chain of cubes
joins them at cost <= merge_tol * delta^alpha.  The groups surviving at the
finest scale are the elements anchored at x; coarser groups containing them
form the approach ladder.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import Cube, Domain, FaceTag, is_Q_visible, segment_in_domain
from .metrics import (DIVERGENCE_GUARD, MetricEstimate, check_alpha, chain_graph,
                      segment_integrals)
from .whitney import ResolutionError, WhitneyDecomposition

MERGE_TOL = 8.0
N_SCALES = 5
SAMPLE_DENSITY = 4


@dataclass
class BoundaryElement:
    id: int
    anchor: np.ndarray
    face: FaceTag
    cluster: np.ndarray  # finest-scale cube ids
    scales: List[float]
    cluster_sizes: List[int]
    ladder: List[float]  # chain cost from the basepoint, per scale
    rep: int = -1  # representative cube seeing the anchor

    def key(self):
        return (round(float(self.anchor[0]), 12), round(float(self.anchor[1]), 12), int(self.cluster.min()))


@dataclass
class AlphaBoundary:
    domain: Domain
    w: WhitneyDecomposition
    alpha: float
    scales: List[float]
    merge_tol: float
    elements: List[BoundaryElement] = field(default_factory=list)
    anchor_index: Dict[int, List[int]] = field(default_factory=dict)
    inaccessible: List[dict] = field(default_factory=list)
    sample_set: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    base_cube: int = -1

    def __post_init__(self):
        self._groups: Dict[Tuple[float, float], list] = {}
        self._extra: Dict[tuple, BoundaryElement] = {}
        self._adj = csr_matrix((np.ones(len(self.w.adj_idx)), self.w.adj_idx, self.w.adj_ptr),
                               shape=(len(self.w), len(self.w)))
        self._graph = chain_graph(self.w, self.alpha)
        self._base_cost = self._graph.node_cost_from(self.base_cube)

    @property
    def sep_tol(self) -> float:
        return self.merge_tol * self.scales[-1] ** self.alpha

    def counts(self) -> List[int]:
        return [len(self.anchor_index.get(i, [])) for i in range(len(self.sample_set))]

    def element(self, eid: int) -> BoundaryElement:
        if eid < len(self.elements):
            return self.elements[eid]
        for e in self._extra.values():
            if e.id == eid:
                return e
        raise KeyError(eid)

    # -- local clustering -------------------------------------------------

    def groups_at(self, x) -> List[List[np.ndarray]]:
        """Merged cube groups near boundary point x, one list per scale (coarse to fine)."""
        x = np.asarray(x, dtype=float)
        key = (round(float(x[0]), 12), round(float(x[1]), 12))
        hit = self._groups.get(key)
        if hit is not None:
            return hit
        w = self.w
        tree = w.tree()
        rmax = float(w.radius.max())
        out = []
        for delta in self.scales:
            cand = np.asarray(tree.query_ball_point(x, delta + rmax, p=np.inf), dtype=int)
            if len(cand):
                gap = np.max(np.abs(w.center[cand] - x), axis=1) - w.radius[cand]
                cand = cand[(gap <= delta * (1 + 1e-12)) & (w.diam[cand] <= delta * (1 + 1e-12))]
            if len(cand) == 0:
                out.append([])
                continue
            cand = np.sort(cand)
            sub = self._adj[cand][:, cand]
            ncomp, lab = connected_components(sub, directed=False)
            groups = [cand[lab == g] for g in range(ncomp)]
            out.append(self._merge(groups, delta))
        self._groups[key] = out
        return out

    def _merge(self, groups, delta):
        if len(groups) < 2:
            return groups
        thr = self.merge_tol * delta ** self.alpha
        parent = list(range(len(groups)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(len(groups) - 1):
            dist = self._graph.group_distance(groups[i], limit=thr)
            for j in range(i + 1, len(groups)):
                if find(i) != find(j) and np.min(dist[groups[j]]) <= thr:
                    parent[find(j)] = find(i)
        merged: Dict[int, list] = {}
        for i, g in enumerate(groups):
            merged.setdefault(find(i), []).append(g)
        out = [np.sort(np.concatenate(v)) for v in merged.values()]
        out.sort(key=lambda g: int(g[0]))
        return out

    def _ladder(self, levels, fine):
        """Containing group per scale for a finest group, and the basepoint costs."""
        probe = int(fine[0])
        chain, costs = [], []
        for groups in levels:
            g = next((g for g in groups if np.any(g == probe)), None)
            chain.append(g)
            costs.append(float(np.min(self._base_cost[g])) if g is not None else np.inf)
        return chain, costs

    def _make_element(self, eid, x, fine, levels, face=None):
        chain, costs = self._ladder(levels, fine)
        rep = self._representative(x, fine)
        if face is None:
            c = self.w.center[rep]
            face = _face_for(self.domain, x, c)
        return BoundaryElement(eid, np.asarray(x, dtype=float).copy(), face, fine,
                               list(self.scales), [len(g) if g is not None else 0 for g in chain],
                               costs, rep)

    def _representative(self, x, fine):
        w, d = self.w, self.domain
        order = fine[np.argsort(np.max(np.abs(w.center[fine] - x), axis=1), kind="stable")]
        for q in order[:32]:
            if segment_in_domain(d, x, w.center[q], exclude_a=True):
                return int(q)
        return int(order[0])

    def group_of_point(self, x, y) -> Optional[np.ndarray]:
        """Finest group at boundary point x containing the cube of interior point y."""
        levels = self.groups_at(x)
        q = int(self.w.locate(y)[0])
        if q < 0:
            return None
        for g in levels[-1]:
            if np.any(g == q):
                return g
        return None

    def export_json(self) -> str:
        d = self.domain
        els = [{"id": e.id, "anchor": [float(e.anchor[0]), float(e.anchor[1])],
                "face": d.face_label(e.face), "scales": [float(s) for s in e.scales],
                "cluster_sizes": [int(c) for c in e.cluster_sizes]} for e in self.elements]
        inacc = [{"sample": [float(v) for v in r["sample"]], "ladder": [_num(v) for v in r["ladder"]]}
                 for r in self.inaccessible]
        counts = [{"sample": [float(p[0]), float(p[1])], "elements": c}
                  for p, c in zip(self.sample_set, self.counts())]
        return json.dumps({"alpha": self.alpha, "merge_tol": self.merge_tol,
                           "scales": [float(s) for s in self.scales], "elements": els,
                           "counts": counts, "inaccessible": inacc}, indent=1)


def _num(v):
    return float(v) if np.isfinite(v) else "inf"


def _face_for(d: Domain, x, c) -> FaceTag:
    _, seg, _ = d.nearest_boundary(np.asarray(x, dtype=float)[None])
    segs = d.segments_through(x)
    s = int(segs[0]) if len(segs) else int(seg[0])
    return d.boundary_faces([np.asarray(x, dtype=float)], [s], [np.asarray(c, dtype=float)])[0]


def boundary_samples(d: Domain, spacing: float) -> np.ndarray:
    """Points along every boundary segment (endpoints included), deduplicated."""
    pts = []
    for a, b in zip(d.A, d.B):
        L = float(np.max(np.abs(b - a)))
        m = max(1, int(np.ceil(L / spacing)))
        t = np.linspace(0.0, 1.0, m + 1)
        pts.append(a + t[:, None] * (b - a))
    P = np.concatenate(pts)
    P = np.round(P, 12)
    _, idx = np.unique(P, axis=0, return_index=True)
    return P[np.sort(idx)]


def build_alpha_boundary(d: Domain, w: WhitneyDecomposition, alpha: float,
                         sample_density: float = SAMPLE_DENSITY, n_scales: Optional[int] = None,
                         merge_tol: float = MERGE_TOL, samples=None) -> AlphaBoundary:
    """Elements, agglutination counts and inaccessible samples of the alpha-boundary."""
    alpha = check_alpha(alpha)
    if n_scales is None:
        # default ladder, shortened on shallow decompositions
        n_scales = max(1, min(N_SCALES, w.depth_limit - 3))
    need = n_scales + 3
    if w.depth_limit < need:
        raise ResolutionError(f"insufficient depth: requires depth >= {need}")
    finest = float(w.diam.min())
    d_fine = 8.0 * finest
    scales = [d_fine * 2.0 ** (n_scales - 1 - k) for k in range(n_scales)]
    base = int(w.locate(np.asarray(d.basepoint, dtype=float))[0])
    if base < 0:
        raise ResolutionError("basepoint not covered: refine decomposition")
    ab = AlphaBoundary(d, w, alpha, scales, merge_tol, base_cube=base)
    if samples is None:
        samples = boundary_samples(d, d_fine / sample_density)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    ab.sample_set = samples
    for i, x in enumerate(samples):
        levels = ab.groups_at(x)
        ids = []
        ladders = []
        for fine in levels[-1]:
            e = ab._make_element(len(ab.elements), x, fine, levels)
            ladders.append(e.ladder)
            if e.ladder[-1] <= DIVERGENCE_GUARD:
                ab.elements.append(e)
                ids.append(e.id)
        ab.anchor_index[i] = ids
        if not ids:
            lad = [min(v) for v in zip(*ladders)] if ladders else [np.inf] * len(scales)
            ab.inaccessible.append({"sample": x.copy(), "ladder": lad})
    return ab


# ---------------------------------------------------------------------------
# queries


def _approach_group(ab: AlphaBoundary, a, xq) -> Optional[np.ndarray]:
    """Finest group at a holding the segment approach from xq.

    The probe point sits on the segment inside the finest ball; when it is
    in the uncovered boundary layer the nearest group cube it sees decides.
    """
    a = np.asarray(a, dtype=float)
    xq = np.asarray(xq, dtype=float)
    L = float(np.max(np.abs(xq - a)))
    p = a + 0.5 * min(1.0, ab.scales[-1] / L) * (xq - a)
    if ab.w.locate(p)[0] >= 0:
        return ab.group_of_point(a, p)
    groups = ab.groups_at(a)[-1]
    if not groups:
        return None
    cubes = np.concatenate(groups)
    owner = np.concatenate([np.full(len(g), k) for k, g in enumerate(groups)])
    order = np.argsort(np.max(np.abs(ab.w.center[cubes] - p), axis=1), kind="stable")
    for k in order[:64]:
        if segment_in_domain(ab.domain, p, ab.w.center[cubes[k]]):
            return groups[owner[k]]
    return None


def omega_for_cube(ab: AlphaBoundary, w: WhitneyDecomposition, q: int) -> BoundaryElement:
    """The element reached along the segment from the cube center to its anchor."""
    if q < 0 or q >= len(w):
        raise IndexError(f"invalid cube id {q}")
    a = w.anchor[q]
    g = _approach_group(ab, a, w.center[q])
    if g is None:
        raise RuntimeError(f"internal error: approach to cube {q} left every cluster")
    key = (round(float(a[0]), 12), round(float(a[1]), 12), int(g.min()))
    e = ab._extra.get(key)
    if e is None:
        levels = ab.groups_at(a)
        e = ab._make_element(len(ab.elements) + len(ab._extra), a, g, levels, face=w.face[q])
        ab._extra[key] = e
    return e


def is_alpha_Q_visible(ab: AlphaBoundary, d: Domain, omega: BoundaryElement, q: Cube) -> bool:
    """(i) the anchor sees Q from omega's side; (ii) the segment approach from Q lands in omega."""
    if not is_Q_visible(d, q, omega.anchor, omega.face):
        return False
    g = _approach_group(ab, omega.anchor, q.center)
    return g is not None and bool(np.any(np.isin(omega.cluster, g)))


def project_beta_to_alpha(ab_alpha: AlphaBoundary, ab_beta: AlphaBoundary,
                          omega_beta: BoundaryElement) -> BoundaryElement:
    """The alpha-element whose finest cluster contains omega_beta's cubes."""
    if not ab_beta.alpha < ab_alpha.alpha:
        raise ValueError("projection needs beta < alpha")
    if ab_alpha.w is not ab_beta.w:
        raise ValueError("both boundaries must share one decomposition")
    x = omega_beta.anchor
    levels = ab_alpha.groups_at(x)
    best, best_n = None, 0
    for g in levels[-1]:
        n = int(np.count_nonzero(np.isin(omega_beta.cluster, g)))
        if n > best_n:
            best, best_n = g, n
    if best is None:
        raise RuntimeError("internal error: no alpha-element contains the beta-element")
    key = (round(float(x[0]), 12), round(float(x[1]), 12), int(best.min()))
    for e in ab_alpha.elements:
        if e.key() == key:
            return e
    e = ab_alpha._extra.get(key)
    if e is None:
        e = ab_alpha._make_element(len(ab_alpha.elements) + len(ab_alpha._extra), x, best, levels)
        ab_alpha._extra[key] = e
    return e


def _endpoint(ab: AlphaBoundary, a):
    """(anchor point, finest cube set, representative cube) for an element or interior point."""
    if isinstance(a, BoundaryElement):
        return a.anchor, a.cluster, a.rep, True
    x = np.asarray(a, dtype=float)
    if not ab.domain.contains(x)[0]:
        raise ValueError("interior point expected")
    q = int(ab.w.locate(x)[0])
    if q < 0:
        raise ResolutionError("refine decomposition")
    return x, np.array([q]), q, False


def element_metric(ab: AlphaBoundary, a, b) -> Tuple[MetricEstimate, MetricEstimate]:
    """(d~^c, rho^c) between elements and/or interior points.

    rho^c is bounded above by the sub-hyperbolic length of the broken line
    anchor -> representative cube -> cheapest chain -> representative cube
    -> anchor; d~^c adds the exact anchor gap term.
    """
    w, d, g = ab.w, ab.domain, ab._graph
    xa, ca, ra, ea = _endpoint(ab, a)
    xb, cb, rb, eb = _endpoint(ab, b)
    gap = float(np.max(np.abs(xa - xb))) ** ab.alpha
    if (ea and eb and a is b) or (not ea and not eb and np.array_equal(xa, xb)):
        z = MetricEstimate(0.0, 0.0, [ra], 0.0, [0.0] * len(ab.scales))
        return z, z
    # per-scale ladder between the nested groups
    ladder = []
    if ea or eb:
        la = ab._ladder(ab.groups_at(xa), ca)[0] if ea else [ca] * len(ab.scales)
        lb = ab._ladder(ab.groups_at(xb), cb)[0] if eb else [cb] * len(ab.scales)
        for ga, gb in zip(la, lb):
            if ga is None or gb is None:
                ladder.append(np.inf)
                continue
            dist = g.group_distance(ga)
            ladder.append(float(np.min(dist[gb])))
    dist, pred = g.dijkstra([ra], targets=[rb])
    if not np.isfinite(dist[rb]):
        inf = MetricEstimate(np.inf, np.inf, [], gap, ladder)
        return inf, MetricEstimate(np.inf, np.inf, [], 0.0, ladder)
    chain = [rb]
    while chain[-1] != ra:
        chain.append(int(pred[chain[-1]]))
    chain.reverse()
    cost = float(dist[rb] + 0.5 * (g.node_w[ra] + g.node_w[rb]))
    from .metrics import chain_polylines
    cands = []
    for pl in chain_polylines(w, chain, xa, xb):
        cands.append(float(np.sum(segment_integrals(d, pl[:-1], pl[1:], ab.alpha))))
    rho = min(cands)
    if not ladder:
        ladder = [rho] * len(ab.scales)
    rho_c = MetricEstimate(rho, cost, chain, 0.0, ladder)
    dt_c = MetricEstimate(rho + gap, cost, chain, gap, ladder)
    return dt_c, rho_c
