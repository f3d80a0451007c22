"""Subhyperbolic lengths and the metrics d_alpha, d~_alpha on a Whitney graph.

len_alpha(gamma) = integral of rho(z)^(alpha-1) ds, with rho the sup-norm
distance to the boundary and ds the sup-norm arclength.  d_alpha is
estimated from above by the cheapest Whitney chain (node weight
(diam Q)^alpha) followed by quadrature along polylines threaded through it.
"""
from __future__ import annotations

import csv
import heapq
import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as sp_dijkstra

from .geometry import Domain, DomainError, _segment_hits, segment_in_domain
from .whitney import ResolutionError, WhitneyDecomposition

QUAD_TOL = 1e-6
DIVERGENCE_GUARD = 1e12

_GX, _GW = np.polynomial.legendre.leggauss(5)


class DivergentLength(ArithmeticError):
    """The subhyperbolic integral exceeded the divergence guard."""


@dataclass
class MetricEstimate:
    upper: float
    chain_sum: float
    chain: List[int] = field(default_factory=list)
    certified_lower: float = 0.0
    ladder: List[float] = field(default_factory=list)


def alpha_from_exponent(p: float, n: int = 2) -> float:
    """alpha = (p - n) / (p - 1); requires p > n."""
    if p <= n:
        raise ValueError(f"exponent must exceed the dimension: p={p}, n={n}")
    return (p - n) / (p - 1.0)


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return alpha


# ---------------------------------------------------------------------------
# quadrature


def _gauss(vals_fn, seg, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    t = mid[:, None] + half[:, None] * _GX[None, :]
    v = vals_fn(seg, t)
    return half * (v @ _GW)


def segment_integrals(d: Domain, P0, P1, alpha: float, tol: float = QUAD_TOL,
                      guard: float = DIVERGENCE_GUARD, max_level: int = 60) -> np.ndarray:
    """Integral of rho^(alpha-1) over each segment [P0[k], P1[k]] (sup-norm arclength).

    Regular pieces use 5-point Gauss-Legendre with bisection until the
    relative change is below tol.  A piece ending on the boundary is
    integrated in closed form once rho is verified to be linear on it
    (rho vanishes linearly along a straight approach).
    """
    P0 = np.atleast_2d(np.asarray(P0, dtype=float))
    P1 = np.atleast_2d(np.asarray(P1, dtype=float))
    L = np.max(np.abs(P1 - P0), axis=1)
    if alpha == 1.0:
        return L.copy()
    E = P1 - P0
    eps = 64 * d.tolerance_eps
    sing0 = d.rho(P0) <= eps
    sing1 = d.rho(P1) <= eps

    def vals(seg, t):
        pts = P0[seg][:, None, :] + t[..., None] * E[seg][:, None, :]
        r = d.rho(pts.reshape(-1, 2)).reshape(t.shape)
        with np.errstate(divide="ignore"):
            return L[seg][:, None] * r ** (alpha - 1.0)

    out = np.zeros(len(P0))
    keep = L > 0
    seg = np.nonzero(keep)[0]
    a = np.zeros(len(seg))
    b = np.ones(len(seg))
    lev = np.zeros(len(seg), dtype=int)
    while len(seg):
        at0 = (a == 0.0) & sing0[seg]
        at1 = (b == 1.0) & sing1[seg]
        sing = at0 | at1
        nxt_seg, nxt_a, nxt_b, nxt_lev = [], [], [], []
        if np.any(sing):
            s_idx = np.nonzero(sing)[0]
            sg, sa, sb = seg[s_idx], a[s_idx], b[s_idx]
            h = sb - sa
            # distance parameter from the singular end
            from_end = at0[s_idx]
            t_far = np.where(from_end, sb, sa)
            t_mid = 0.5 * (sa + sb)
            pts_far = P0[sg] + t_far[:, None] * E[sg]
            pts_mid = P0[sg] + t_mid[:, None] * E[sg]
            r_far = d.rho(pts_far)
            r_mid = d.rho(pts_mid)
            linear = np.abs(r_mid - 0.5 * r_far) <= tol * r_far
            linear |= lev[s_idx] >= max_level
            s_len = h * L[sg]
            with np.errstate(divide="ignore", invalid="ignore"):
                k = r_far / s_len
                closed = k ** (alpha - 1.0) * s_len ** alpha / alpha
            closed = np.where(r_far > 0, closed, np.inf)
            np.add.at(out, sg[linear], closed[linear])
            split = ~linear
            if np.any(split):
                ss = s_idx[split]
                sg2, sa2, sb2 = seg[ss], a[ss], b[ss]
                m = 0.5 * (sa2 + sb2)
                lv = lev[ss] + 1
                nxt_seg += [sg2, sg2]
                nxt_a += [sa2, m]
                nxt_b += [m, sb2]
                nxt_lev += [lv, lv]
        reg = np.nonzero(~sing)[0]
        if len(reg):
            sg, sa, sb = seg[reg], a[reg], b[reg]
            m = 0.5 * (sa + sb)
            coarse = _gauss(vals, sg, sa, sb)
            fine = _gauss(vals, sg, sa, m) + _gauss(vals, sg, m, sb)
            ok = np.abs(coarse - fine) <= tol * np.abs(fine)
            ok |= lev[reg] >= max_level
            ok &= np.isfinite(fine) | (lev[reg] >= max_level)
            np.add.at(out, sg[ok], fine[ok])
            bad = ~ok
            if np.any(bad):
                lv = lev[reg][bad] + 1
                nxt_seg += [sg[bad], sg[bad]]
                nxt_a += [sa[bad], m[bad]]
                nxt_b += [m[bad], sb[bad]]
                nxt_lev += [lv, lv]
        if np.any(~np.isfinite(out)) or np.any(out > guard):
            raise DivergentLength("divergent length")
        if not nxt_seg:
            break
        seg = np.concatenate(nxt_seg)
        a = np.concatenate(nxt_a)
        b = np.concatenate(nxt_b)
        lev = np.concatenate(nxt_lev)
    return out


def _open_segment_ok(d: Domain, a, b) -> bool:
    """The open segment (a, b) lies in the domain; endpoints may sit on the boundary."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = 0.5 * (a + b)
    if np.allclose(a, b):
        return bool(d.contains(a)[0] or d.rho(a)[0] <= 64 * d.tolerance_eps)
    if not d.contains(m)[0]:
        return False
    return not (_segment_hits(d, m, a, True) or _segment_hits(d, m, b, True)) or \
        _only_endpoint_hits(d, a, b, m)


def _only_endpoint_hits(d, a, b, m):
    # hits allowed only at an endpoint lying on the boundary
    eps = 64 * d.tolerance_eps
    for end in (a, b):
        if _segment_hits(d, m, end, True):
            if d.rho(end)[0] > eps:
                return False
            # shrink toward the endpoint; any hit strictly inside is fatal
            e2 = end + (m - end) * 1e-9
            if _segment_hits(d, m, e2, True):
                return False
    return True


def subhyperbolic_length(d: Domain, polyline, alpha: float, quad_tol: float = QUAD_TOL,
                         check: bool = True) -> float:
    """len_alpha of a polyline lying in the domain (endpoints may be boundary points)."""
    alpha = check_alpha(alpha)
    P = np.asarray(polyline, dtype=float).reshape(-1, 2)
    if len(P) < 2:
        return 0.0
    if check:
        for a, b in zip(P[:-1], P[1:]):
            if not _open_segment_ok(d, a, b):
                raise DomainError("segment exits the domain")
    return float(np.sum(segment_integrals(d, P[:-1], P[1:], alpha, quad_tol)))


# ---------------------------------------------------------------------------
# Whitney graph


class ChainGraph:
    """Node-weighted Whitney graph: chain cost = sum of (diam Q)^alpha."""

    def __init__(self, w: WhitneyDecomposition, alpha: float):
        self.w = w
        self.alpha = check_alpha(alpha)
        self.node_w = w.diam ** self.alpha
        self.ptr = w.adj_ptr
        self.idx = w.adj_idx
        src = np.repeat(np.arange(len(w)), np.diff(w.adj_ptr))
        self.edge_w = 0.5 * (self.node_w[src] + self.node_w[self.idx])
        self.matrix = csr_matrix((self.edge_w, self.idx, self.ptr), shape=(len(w), len(w)))
        self._ptr_l = self.ptr.tolist()
        self._idx_l = self.idx.tolist()
        self._ew_l = self.edge_w.tolist()

    def dijkstra(self, sources, targets=None, cutoff: float = np.inf):
        """Edge-weighted shortest paths from a set of sources.

        Returns (dist, pred) where dist[v] + (node_w[s] + node_w[v]) / 2 is the
        node-sum cost of the best chain from source s to v.
        """
        n = len(self.w)
        dist = [np.inf] * n
        pred = [-1] * n
        heap = []
        for s in np.atleast_1d(sources):
            s = int(s)
            dist[s] = 0.0
            heap.append((0.0, s))
        heapq.heapify(heap)
        tset = None if targets is None else set(int(t) for t in np.atleast_1d(targets))
        ptr, idx, ew = self._ptr_l, self._idx_l, self._ew_l
        done = [False] * n
        while heap:
            du, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            if du > cutoff:
                break
            if tset is not None:
                tset.discard(u)
                if not tset:
                    break
            for e in range(ptr[u], ptr[u + 1]):
                v = idx[e]
                nd = du + ew[e]
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = u
                    heapq.heappush(heap, (nd, v))
        return np.array(dist), np.array(pred)

    def node_cost_from(self, source: int, cutoff: float = np.inf) -> np.ndarray:
        """Node-sum chain cost from `source` to every cube (inf if unreachable)."""
        dist = sp_dijkstra(self.matrix, directed=True, indices=int(source), limit=cutoff)
        return dist + 0.5 * (self.node_w[source] + self.node_w)

    def group_distance(self, sources, limit: float = np.inf) -> np.ndarray:
        """Edge-path distance from the nearest of several source cubes."""
        return sp_dijkstra(self.matrix, directed=True, indices=np.asarray(sources, dtype=int),
                           limit=limit, min_only=True)

    def chain(self, qx: int, qy: int) -> Tuple[List[int], float]:
        if qx == qy:
            return [qx], float(self.node_w[qx])
        dist, pred = self.dijkstra([qx], targets=[qy])
        if not np.isfinite(dist[qy]):
            return [], np.inf
        path = [qy]
        while path[-1] != qx:
            path.append(int(pred[path[-1]]))
        path.reverse()
        return path, float(dist[qy] + 0.5 * (self.node_w[qx] + self.node_w[qy]))


_GRAPHS: Dict[Tuple[int, float], ChainGraph] = {}


def chain_graph(w: WhitneyDecomposition, alpha: float) -> ChainGraph:
    key = (id(w), float(alpha))
    g = _GRAPHS.get(key)
    if g is None or g.w is not w:
        if len(_GRAPHS) > 32:
            _GRAPHS.clear()
        g = ChainGraph(w, alpha)
        _GRAPHS[key] = g
    return g


def touch_point(w: WhitneyDecomposition, a: int, b: int) -> np.ndarray:
    """Midpoint of the common part of two touching closed cubes."""
    lo = np.maximum(w.center[a] - w.radius[a], w.center[b] - w.radius[b])
    hi = np.minimum(w.center[a] + w.radius[a], w.center[b] + w.radius[b])
    return 0.5 * (lo + hi)


def chain_polylines(w: WhitneyDecomposition, chain: Sequence[int], x, y) -> List[np.ndarray]:
    """Broken lines threaded through a chain: via centers and touch points, and via touch points only."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    touches = [touch_point(w, a, b) for a, b in zip(chain[:-1], chain[1:])]
    full = [x, w.center[chain[0]]]
    for z, q in zip(touches, chain[1:]):
        full += [z, w.center[q]]
    full.append(y)
    short = [x] + touches + [y]
    return [np.array(full), np.array(short)]


def _snap(w: WhitneyDecomposition, x) -> int:
    d = w.domain
    x = np.asarray(x, dtype=float)
    if not d.contains(x)[0]:
        raise DomainError("outside domain")
    q = int(w.locate(x)[0])
    if q < 0:
        raise ResolutionError("refine decomposition")
    return q


def lower_bound(d: Domain, x, y, alpha: float) -> float:
    """Certified lower bound for d_alpha(x, y).

    rho is 1-Lipschitz for the sup norm, so along any curve from x of
    length s we have rho <= rho(x) + s, and the curve is at least ||x - y|| long.
    """
    L = float(np.max(np.abs(np.asarray(x, float) - np.asarray(y, float))))
    if L == 0:
        return 0.0
    best = 0.0
    for r in d.rho(np.array([x, y], dtype=float)):
        best = max(best, ((r + L) ** alpha - r ** alpha) / alpha)
    return best


def d_alpha(d: Domain, w: WhitneyDecomposition, x, y, alpha: float,
            quad_tol: float = QUAD_TOL) -> MetricEstimate:
    """Upper estimate of d_alpha(x, y) from the cheapest Whitney chain."""
    alpha = check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    qx, qy = _snap(w, x), _snap(w, y)
    if np.array_equal(x, y):
        return MetricEstimate(0.0, 0.0, [qx], 0.0)
    g = chain_graph(w, alpha)
    chain, cost = g.chain(qx, qy)
    lower = lower_bound(d, x, y, alpha)
    if not chain:
        return MetricEstimate(np.inf, np.inf, [], lower)
    return MetricEstimate(_refine(d, w, chain, x, y, alpha, quad_tol), cost, chain, lower)


def _refine(d, w, chain, x, y, alpha, quad_tol):
    cands = []
    lines = chain_polylines(w, chain, x, y)
    segs0, segs1, owner = [], [], []
    for k, pl in enumerate(lines):
        segs0.append(pl[:-1]); segs1.append(pl[1:]); owner.append(np.full(len(pl) - 1, k))
    straight = segment_in_domain(d, x, y)
    if straight:
        segs0.append(x[None]); segs1.append(y[None]); owner.append(np.array([len(lines)]))
    vals = segment_integrals(d, np.concatenate(segs0), np.concatenate(segs1), alpha, quad_tol)
    owner = np.concatenate(owner)
    for k in range(len(lines) + (1 if straight else 0)):
        cands.append(float(vals[owner == k].sum()))
    return min(cands)


def d_tilde(d: Domain, w: WhitneyDecomposition, x, y, alpha: float,
            quad_tol: float = QUAD_TOL) -> MetricEstimate:
    """Upper estimate of d~_alpha = d_alpha + ||x - y||^alpha."""
    est = d_alpha(d, w, x, y, alpha, quad_tol)
    gap = float(np.max(np.abs(np.asarray(x, float) - np.asarray(y, float)))) ** alpha
    return MetricEstimate(est.upper + gap, est.chain_sum, est.chain, gap)


def best_chain(w: WhitneyDecomposition, x, y, alpha: float) -> List[int]:
    qx, qy = _snap(w, x), _snap(w, y)
    chain, _ = chain_graph(w, alpha).chain(qx, qy)
    return chain


def d_tilde_many(d: Domain, w: WhitneyDecomposition, X, Y, alpha: float,
                 quad_tol: float = QUAD_TOL) -> List[MetricEstimate]:
    """Batch d~_alpha; one shortest-path tree per distinct source cube."""
    alpha = check_alpha(alpha)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    g = chain_graph(w, alpha)
    qx = np.array([_snap(w, x) for x in X])
    qy = np.array([_snap(w, y) for y in Y])
    out: List[Optional[MetricEstimate]] = [None] * len(X)
    for s in np.unique(qx):
        rows = np.nonzero(qx == s)[0]
        dist, pred = g.dijkstra([s], targets=qy[rows])
        for k in rows:
            x, y = X[k], Y[k]
            gap = float(np.max(np.abs(x - y))) ** alpha
            lower = gap
            t = int(qy[k])
            if np.array_equal(x, y):
                out[k] = MetricEstimate(0.0, 0.0, [int(s)], 0.0)
                continue
            if not np.isfinite(dist[t]):
                out[k] = MetricEstimate(np.inf, np.inf, [], lower)
                continue
            path = [t]
            while path[-1] != s:
                path.append(int(pred[path[-1]]))
            path.reverse()
            cost = float(dist[t] + 0.5 * (g.node_w[s] + g.node_w[t]))
            up = _refine(d, w, path, x, y, alpha, quad_tol) + gap
            out[k] = MetricEstimate(up, cost, path, lower)
    return out


def batch_csv(d: Domain, w: WhitneyDecomposition, text: str) -> str:
    """Rows x1,y1,x2,y2,alpha -> upper,chain_sum,certified_lower,chain_len[,error]."""
    rows = list(csv.reader(io.StringIO(text)))
    if rows and rows[0] and rows[0][0].strip().lower() in ("x1", "x"):
        rows = rows[1:]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["upper", "chain_sum", "certified_lower", "chain_len", "error"])
    for r in rows:
        if not r or not any(c.strip() for c in r):
            continue
        try:
            x1, y1, x2, y2, a = (float(c) for c in r[:5])
            est = d_tilde(d, w, (x1, y1), (x2, y2), a)
            wr.writerow([repr(est.upper), repr(est.chain_sum), repr(est.certified_lower), len(est.chain), ""])
        except DomainError:
            wr.writerow(["", "", "", "", "outside_domain"])
        except ResolutionError:
            wr.writerow(["", "", "", "", "refine_decomposition"])
        except DivergentLength:
            wr.writerow(["inf", "", "", "", "divergent"])
        except ValueError:
            wr.writerow(["", "", "", "", "bad_row"])
    return buf.getvalue()
