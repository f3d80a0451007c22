"""Dyadic Whitney decomposition of a planar domain.

Cubes are dyadic cells of the domain's reference box, stored as integer
triples (level, i, j).  A cell is kept when it lies in the domain and
diam Q <= dist(Q, boundary); the upper bound dist(Q, boundary) <= 4 diam Q
then holds automatically for children of rejected cells and is re-checked
by `verify_whitney`.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Cube, Domain, FaceTag

DILATION = 9.0 / 8.0


class ResolutionError(RuntimeError):
    """The decomposition is too coarse for the request."""


@dataclass
class WhitneyDecomposition:
    domain: Domain
    depth_limit: int
    level: np.ndarray
    ij: np.ndarray
    center: np.ndarray
    radius: np.ndarray
    dist: np.ndarray  # dist(Q, boundary)
    anchor: np.ndarray
    anchor_seg: np.ndarray
    face: List[FaceTag]
    adj_ptr: np.ndarray = field(default=None)
    adj_idx: np.ndarray = field(default=None)
    deficit_area: float = 0.0
    deficit_cells: int = 0

    def __post_init__(self):
        self._codes = {}
        for lv in np.unique(self.level):
            sel = np.nonzero(self.level == lv)[0]
            codes = self.ij[sel, 0].astype(np.int64) * (1 << 31) + self.ij[sel, 1]
            order = np.argsort(codes)
            self._codes[int(lv)] = (codes[order], sel[order])
        self._tree = None

    def __len__(self):
        return len(self.level)

    @property
    def diam(self) -> np.ndarray:
        return 2.0 * self.radius

    def cube(self, q: int) -> Cube:
        return Cube((float(self.center[q, 0]), float(self.center[q, 1])), float(self.radius[q]))

    def neighbors(self, q: int) -> np.ndarray:
        if q < 0 or q >= len(self):
            raise IndexError(f"invalid cube id {q}")
        return self.adj_idx[self.adj_ptr[q]:self.adj_ptr[q + 1]]

    def edges(self) -> np.ndarray:
        """Unordered touching pairs (a < b), shape (E, 2)."""
        counts = np.diff(self.adj_ptr)
        a = np.repeat(np.arange(len(self)), counts)
        b = self.adj_idx
        keep = a < b
        return np.column_stack([a[keep], b[keep]])

    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.center)
        return self._tree

    def _lookup(self, lv: int, ii, jj):
        if lv not in self._codes:
            return np.full(len(ii), -1)
        codes, ids = self._codes[lv]
        key = ii.astype(np.int64) * (1 << 31) + jj
        pos = np.searchsorted(codes, key)
        pos = np.clip(pos, 0, len(codes) - 1)
        hit = codes[pos] == key
        hit &= (ii >= 0) & (jj >= 0)
        return np.where(hit, ids[pos], -1)

    def locate(self, P) -> np.ndarray:
        """Id of a cube containing each point, -1 when uncovered."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        out = np.full(len(P), -1)
        ox, oy = self.domain.origin
        side = self.domain.side
        nudges = [(0.0, 0.0), (-1.0, 0.0), (0.0, -1.0), (-1.0, -1.0)]
        for nx, ny in nudges:
            todo = np.nonzero(out < 0)[0]
            if len(todo) == 0:
                break
            for lv in sorted(self._codes):
                if len(todo) == 0:
                    break
                h = side / (1 << lv)
                u = (P[todo, 0] - ox) / h
                v = (P[todo, 1] - oy) / h
                ii = np.floor(u).astype(np.int64)
                jj = np.floor(v).astype(np.int64)
                if nx:
                    ii = np.where(u == np.floor(u), ii - 1, ii)
                if ny:
                    jj = np.where(v == np.floor(v), jj - 1, jj)
                found = self._lookup(lv, ii, jj)
                got = found >= 0
                out[todo[got]] = found[got]
                todo = todo[~got]
        return out

    def star_members(self, P) -> List[np.ndarray]:
        """For each point, the cubes K with the point in K* (dilated cube)."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        rmax = float(self.radius.max())
        cand = self.tree().query_ball_point(P, DILATION * rmax, p=np.inf)
        out = []
        for x, c in zip(P, cand):
            c = np.asarray(c, dtype=int)
            if len(c):
                dd = np.max(np.abs(self.center[c] - x), axis=1)
                c = c[dd < DILATION * self.radius[c]]
            out.append(np.sort(c))
        return out


def build_whitney(d: Domain, depth_limit: int = 9) -> WhitneyDecomposition:
    """Dyadic Whitney decomposition of d down to level depth_limit."""
    if depth_limit < 1:
        raise ResolutionError("depth_limit must be >= 1")
    ox, oy = d.origin
    side = d.side
    cells = np.zeros((1, 2), dtype=np.int64)
    kept_level, kept_ij = [], []
    deficit_cells = []
    tol = 1e-12 * side
    for lv in range(depth_limit + 1):
        if len(cells) == 0:
            break
        h = side / (1 << lv)
        r = 0.5 * h
        cen = np.column_stack([ox + (cells[:, 0] + 0.5) * h, oy + (cells[:, 1] + 0.5) * h])
        rho = d.rho(cen)
        inside = d._inside_raw(cen)
        keep = inside & (rho - r >= 2 * r - tol) & (rho > r + tol)
        outside = (~inside) & (rho > r + tol)
        order = np.lexsort((cells[:, 1], cells[:, 0]))
        ksel = order[keep[order]]
        kept_level.append(np.full(len(ksel), lv))
        kept_ij.append(cells[ksel])
        split = ~(keep | outside)
        if lv == depth_limit:
            deficit_cells.append((lv, cells[split]))
            break
        par = cells[split]
        kids = np.concatenate([par * 2 + np.array([di, dj]) for di in (0, 1) for dj in (0, 1)])
        cells = kids[np.lexsort((kids[:, 1], kids[:, 0]))]
    level = np.concatenate(kept_level) if kept_level else np.zeros(0, dtype=int)
    ij = np.concatenate(kept_ij) if kept_ij else np.zeros((0, 2), dtype=np.int64)
    if len(level) == 0:
        raise ResolutionError("empty decomposition")
    h = side / (2.0 ** level)
    center = np.column_stack([ox + (ij[:, 0] + 0.5) * h, oy + (ij[:, 1] + 0.5) * h])
    radius = 0.5 * h
    anchor, seg, rho = d.nearest_boundary(center)
    faces = d.boundary_faces(anchor, seg, center)
    covered = float(np.sum(h * h))
    w = WhitneyDecomposition(d, depth_limit, level, ij, center, radius, rho - radius, anchor, seg, faces,
                             deficit_area=max(d.area() - covered, 0.0),
                             deficit_cells=int(sum(len(c) for _, c in deficit_cells)))
    _build_adjacency(w)
    return w


def _build_adjacency(w: WhitneyDecomposition):
    """Touching pairs via integer ancestor lookups of each cube's 8 neighbor cells."""
    pairs = []
    levels = sorted(w._codes)
    for l2 in levels:
        _, ids2 = w._codes[l2]
        ii, jj = w.ij[ids2, 0], w.ij[ids2, 1]
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                ni, nj = ii + di, jj + dj
                for l1 in levels:
                    if l1 > l2:
                        break
                    sh = l2 - l1
                    ok = (ni >= 0) & (nj >= 0)
                    found = w._lookup(l1, np.where(ok, ni >> sh, -1), np.where(ok, nj >> sh, -1))
                    m = found >= 0
                    if np.any(m):
                        pairs.append(np.column_stack([ids2[m], found[m]]))
    if pairs:
        P = np.concatenate(pairs)
        P = np.concatenate([P, P[:, ::-1]])
        P = P[P[:, 0] != P[:, 1]]
        P = np.unique(P, axis=0)
    else:
        P = np.zeros((0, 2), dtype=int)
    counts = np.bincount(P[:, 0], minlength=len(w)) if len(P) else np.zeros(len(w), dtype=int)
    w.adj_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    w.adj_idx = P[:, 1].astype(np.int64) if len(P) else np.zeros(0, dtype=np.int64)


def neighbors(w: WhitneyDecomposition, q: int) -> List[int]:
    return [int(k) for k in w.neighbors(q)]


def anchor_point(w: WhitneyDecomposition, q: int):
    """(anchor point, face tag) of cube q."""
    return w.anchor[q].copy(), w.face[q]


def _touching(c1, r1, c2, r2):
    return np.max(np.abs(c1 - c2), axis=-1) <= (r1 + r2) * (1 + 1e-13)


def verify_whitney(w: WhitneyDecomposition) -> Dict:
    """Check the Whitney covering properties; returns a JSON-ready report."""
    d = w.domain
    diam = w.diam
    rho = d.rho(w.center)
    dist = rho - w.radius
    ratio = dist / diam
    tol = 1e-9
    inside = d._inside_raw(w.center) & (rho > w.radius)
    wcov_fail = int(np.count_nonzero(~inside | (ratio < 1 - tol) | (ratio > 4 + tol)))
    E = w.edges()
    if len(E):
        dr = diam[E[:, 1]] / diam[E[:, 0]]
        wadd1_fail = int(np.count_nonzero((dr < 0.25 - tol) | (dr > 4 + tol)))
        touch_ok = _touching(w.center[E[:, 0]], w.radius[E[:, 0]], w.center[E[:, 1]], w.radius[E[:, 1]])
        dr_min, dr_max = float(min(dr.min(), (1 / dr).min())), float(max(dr.max(), (1 / dr).max()))
    else:
        wadd1_fail, touch_ok, dr_min, dr_max = 0, np.ones(0, dtype=bool), 1.0, 1.0
    # symmetric adjacency
    S = set(map(tuple, E.tolist()))
    sym = all(int(a) in set(w.neighbors(int(b)).tolist()) for a, b in list(S)[:2000])
    # dilated-star intersections vs touching, all pairs found by a sup-norm ball search
    tree = w.tree()
    cand = tree.query_ball_point(w.center, 2 * DILATION * w.radius * (1 + 1e-12), p=np.inf)
    star_count = np.zeros(len(w), dtype=int)
    wadd3_fail = 0
    overlap_fail = 0
    nb_sets = [set(w.neighbors(q).tolist()) for q in range(len(w))]
    for q, c in enumerate(cand):
        c = np.asarray(c, dtype=int)
        c = c[(w.radius[c] < w.radius[q]) | ((w.radius[c] == w.radius[q]) & (c > q))]
        if len(c) == 0:
            continue
        gap = np.max(np.abs(w.center[c] - w.center[q]), axis=1)
        star = gap < DILATION * (w.radius[c] + w.radius[q])
        touch = gap <= (w.radius[c] + w.radius[q]) * (1 + 1e-13)
        overlap_fail += int(np.count_nonzero(gap < (w.radius[c] + w.radius[q]) * (1 - 1e-12)))
        wadd3_fail += int(np.count_nonzero(star != touch))
        for k in c[star]:
            star_count[q] += 1
            star_count[k] += 1
        listed = np.array([k in nb_sets[q] for k in c])
        wadd3_fail += int(np.count_nonzero(listed != touch))
    nb_counts = np.diff(w.adj_ptr)
    report = {
        "cubes": int(len(w)),
        "depth_limit": int(w.depth_limit),
        "wcov_ii": {"pass": wcov_fail == 0, "failures": wcov_fail,
                    "min_dist_over_diam": float(ratio.min()), "max_dist_over_diam": float(ratio.max())},
        "wadd_1": {"pass": wadd1_fail == 0 and bool(np.all(touch_ok)), "failures": wadd1_fail,
                   "min_diam_ratio": dr_min, "max_diam_ratio": dr_max},
        "wadd_3": {"pass": wadd3_fail == 0 and sym, "failures": wadd3_fail},
        "non_overlap": {"pass": overlap_fail == 0, "failures": overlap_fail},
        "max_star_neighbors": int(star_count.max()) if len(star_count) else 0,
        "max_touching_neighbors": int(nb_counts.max()) if len(nb_counts) else 0,
        "coverage_deficit": float(w.deficit_area),
        "covered_area": float(np.sum(diam ** 2)),
        "domain_area": float(d.area()),
    }
    report["pass"] = all(report[k]["pass"] for k in ("wcov_ii", "wadd_1", "wadd_3", "non_overlap"))
    return report


def cubes_json(w: WhitneyDecomposition) -> str:
    out = []
    for q in range(len(w)):
        out.append({
            "level": int(w.level[q]), "i": int(w.ij[q, 0]), "j": int(w.ij[q, 1]),
            "cx": float(w.center[q, 0]), "cy": float(w.center[q, 1]), "r": float(w.radius[q]),
            "anchor": [float(w.anchor[q, 0]), float(w.anchor[q, 1])],
            "face": w.domain.face_label(w.face[q]),
        })
    return json.dumps(out, indent=1)


def adjacency_csv(w: WhitneyDecomposition) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["a", "b"])
    for a, b in w.edges():
        wr.writerow([int(a), int(b)])
    return buf.getvalue()


def broken_copy(w: WhitneyDecomposition, q: int, factor: float) -> WhitneyDecomposition:
    """Copy with cube q's radius scaled; used as a negative control for the verifier."""
    radius = w.radius.copy()
    radius[q] *= factor
    w2 = WhitneyDecomposition(w.domain, w.depth_limit, w.level, w.ij, w.center, radius, w.dist,
                              w.anchor, w.anchor_seg, w.face, deficit_area=w.deficit_area)
    w2.adj_ptr, w2.adj_idx = w.adj_ptr, w.adj_idx
    return w2
