"""Planar domains bounded by segments, sup-norm distance and visibility queries.

All distances are measured in the uniform norm ||x|| = max(|x_1|, |x_2|).
A domain is an open polygon (possibly with holes) minus a finite set of
closed slits, or a union of axis-aligned cells.  Its boundary is stored as
a flat array of segments; every geometric query reduces to point/segment
computations against that array.
"""
from __future__ import annotations

import json
from collections import namedtuple
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

Point = np.ndarray

# side = +1 means the left side of the segment direction b - a, -1 the right
FaceTag = namedtuple("FaceTag", "segment side")


class DomainError(ValueError):
    """Invalid domain input or a query outside the domain."""


@dataclass(frozen=True)
class Cube:
    """Sup-norm ball Q(center, radius); its diameter is 2 * radius."""

    center: Tuple[float, float]
    radius: float

    @property
    def diam(self) -> float:
        return 2.0 * self.radius

    def dilate(self, lam: float) -> "Cube":
        return Cube(self.center, lam * self.radius)

    def corners(self) -> np.ndarray:
        cx, cy = self.center
        r = self.radius
        return np.array([[cx - r, cy - r], [cx + r, cy - r], [cx + r, cy + r], [cx - r, cy + r]])


def sup_norm(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.max(np.abs(v), axis=-1)


# ---------------------------------------------------------------------------
# point / segment kernels (vectorized)


def _sup_dist_params(P, A, B):
    """Sup distance from points P (N,2) to segments [A,B] (M,2).

    Returns (dist (N,M), t (N,M)) where t is a minimizing parameter.
    The map t -> ||P - A - t(B-A)|| is convex piecewise linear, so its minimum
    is attained at an endpoint or at a kink (a component vanishes or the two
    components have equal modulus).
    """
    D = P[:, None, :] - A[None, :, :]
    E = (B - A)[None, :, :]
    dx, dy = D[..., 0], D[..., 1]
    ex, ey = np.broadcast_to(E[..., 0], dx.shape), np.broadcast_to(E[..., 1], dx.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        cands = [
            np.zeros_like(dx),
            np.ones_like(dx),
            dx / ex,
            dy / ey,
            (dx - dy) / (ex - ey),
            (dx + dy) / (ex + ey),
        ]
    best = np.full(dx.shape, np.inf)
    best_t = np.zeros_like(dx)
    for t in cands:
        t = np.where(np.isfinite(t), np.clip(t, 0.0, 1.0), 0.0)
        g = np.maximum(np.abs(dx - t * ex), np.abs(dy - t * ey))
        better = g < best
        best = np.where(better, g, best)
        best_t = np.where(better, t, best_t)
    return best, best_t


def _euclid_dist_points_segments(P, A, B):
    E = B - A
    L2 = np.einsum("ij,ij->i", E, E)
    D = P[:, None, :] - A[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.einsum("nmk,mk->nm", D, E) / L2[None, :]
    t = np.where(np.isfinite(t), np.clip(t, 0.0, 1.0), 0.0)
    R = D - t[..., None] * E[None, :, :]
    return np.sqrt(np.einsum("nmk,nmk->nm", R, R)), t


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _points_in_polygon(P, poly):
    """Even-odd crossing test; points exactly on edges may go either way."""
    P = np.asarray(P, dtype=float)
    V = np.asarray(poly, dtype=float)
    W = np.roll(V, -1, axis=0)
    x, y = P[:, 0:1], P[:, 1:2]
    y1, y2 = V[None, :, 1], W[None, :, 1]
    x1, x2 = V[None, :, 0], W[None, :, 0]
    straddle = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    hits = straddle & (x < xint)
    return (np.count_nonzero(hits, axis=1) % 2) == 1


def polygon_area(poly) -> float:
    V = np.asarray(poly, dtype=float)
    W = np.roll(V, -1, axis=0)
    return 0.5 * abs(float(np.sum(V[:, 0] * W[:, 1] - W[:, 0] * V[:, 1])))


# ---------------------------------------------------------------------------
# Domain


@dataclass
class Domain:
    """Open planar domain with a segment boundary.

    kind is one of "polygon_with_holes_and_slits", "box_union",
    "occupancy_grid".  The dyadic reference box is the square
    [origin, origin + side]^2 containing the closure.
    """

    kind: str
    segments: np.ndarray  # (M, 2, 2)
    seg_kind: List[str]  # "outer" | "hole" | "slit" | "edge"
    seg_label: List[str]
    name: str = "domain"
    outer: Optional[np.ndarray] = None
    holes: List[np.ndarray] = field(default_factory=list)
    slits: List[np.ndarray] = field(default_factory=list)
    cells: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None  # xs, ys, filled[iy, ix]
    origin: Tuple[float, float] = (0.0, 0.0)
    side: float = 1.0
    tolerance_eps: float = 0.0
    basepoint: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        self.segments = np.asarray(self.segments, dtype=float).reshape(-1, 2, 2)
        self.A = self.segments[:, 0, :].copy()
        self.B = self.segments[:, 1, :].copy()
        lo = np.min(self.segments.reshape(-1, 2), axis=0)
        hi = np.max(self.segments.reshape(-1, 2), axis=0)
        if self.side <= 0 or not np.all(np.isfinite(lo)):
            raise DomainError("degenerate domain")
        if self.tolerance_eps <= 0:
            self.tolerance_eps = 1e-12 * float(np.max(hi - lo)) * np.sqrt(2.0)
        self.lo, self.hi = lo, hi
        self._vertex_cache: Dict = {}

    # -- membership -------------------------------------------------------

    def _inside_raw(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if self.cells is not None:
            xs, ys, filled = self.cells
            ix = np.searchsorted(xs, P[:, 0], side="right") - 1
            iy = np.searchsorted(ys, P[:, 1], side="right") - 1
            ok = (ix >= 0) & (iy >= 0) & (ix < len(xs) - 1) & (iy < len(ys) - 1)
            out = np.zeros(len(P), dtype=bool)
            out[ok] = filled[iy[ok], ix[ok]]
            return out
        inside = _points_in_polygon(P, self.outer)
        for h in self.holes:
            inside &= ~_points_in_polygon(P, h)
        return inside

    def rho(self, P) -> np.ndarray:
        """Sup-norm distance to the boundary segments (no membership check)."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        out = np.empty(len(P))
        chunk = max(1, 400000 // max(1, len(self.A)))
        for s in range(0, len(P), chunk):
            d, _ = _sup_dist_params(P[s:s + chunk], self.A, self.B)
            out[s:s + chunk] = d.min(axis=1)
        return out

    def contains(self, P) -> np.ndarray:
        """Membership in the open domain."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        return self._inside_raw(P) & (self.rho(P) > self.tolerance_eps)

    def in_closure(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        return self._inside_raw(P) | (self.rho(P) <= self.tolerance_eps)

    def area(self) -> float:
        if self.cells is not None:
            xs, ys, filled = self.cells
            return float(np.sum(np.outer(np.diff(ys), np.diff(xs))[filled]))
        return polygon_area(self.outer) - sum(polygon_area(h) for h in self.holes)

    def perimeter(self) -> float:
        """Length of the boundary, slits counted once per side."""
        lengths = np.linalg.norm(self.B - self.A, axis=1)
        w = np.array([2.0 if k == "slit" else 1.0 for k in self.seg_kind])
        return float(np.sum(lengths * w))

    def face_label(self, face: FaceTag) -> str:
        return f"{self.seg_label[face.segment]}{'+' if face.side > 0 else '-'}"

    def parse_face(self, label: str) -> FaceTag:
        side = 1 if label.endswith("+") else -1
        return FaceTag(self.seg_label.index(label[:-1]), side)

    # -- boundary structure ----------------------------------------------

    def segments_through(self, x, tol=None) -> np.ndarray:
        tol = self.tolerance_eps * 8 if tol is None else tol
        d, _ = _euclid_dist_points_segments(np.atleast_2d(x), self.A, self.B)
        return np.nonzero(d[0] <= tol)[0]

    def rays_at(self, x) -> List[Tuple[float, int, int]]:
        """Boundary rays emanating from boundary point x: (angle, segment, sign).

        sign = +1 if the ray points along b - a, -1 otherwise.
        """
        key = (round(float(x[0]), 12), round(float(x[1]), 12))
        if key in self._vertex_cache:
            return self._vertex_cache[key]
        x = np.asarray(x, dtype=float)
        rays = []
        for s in self.segments_through(x):
            u = self.B[s] - self.A[s]
            L = np.hypot(*u)
            ta = np.hypot(*(x - self.A[s]))
            tb = np.hypot(*(x - self.B[s]))
            if tb > 8 * self.tolerance_eps:
                rays.append((float(np.arctan2(u[1], u[0])), int(s), 1))
            if ta > 8 * self.tolerance_eps:
                rays.append((float(np.arctan2(-u[1], -u[0])), int(s), -1))
            del L
        rays.sort()
        self._vertex_cache[key] = rays
        return rays

    def face_of_approach(self, x, direction) -> FaceTag:
        """Canonical face tag of the approach to boundary point x from x + t*direction.

        Approaches lying in the same local sector at x get the same tag:
        the smallest (segment, side) among the two rays bounding the sector.
        """
        x = np.asarray(x, dtype=float)
        d = np.asarray(direction, dtype=float)
        rays = self.rays_at(x)
        if not rays:
            raise DomainError("point is not on the boundary")
        segs = {r[1] for r in rays}
        if len(rays) == 2 and len(segs) == 1:
            s = rays[0][1]
            c = _cross(self.B[s] - self.A[s], d)
            return FaceTag(s, 1 if c >= 0 else -1)
        ang = float(np.arctan2(d[1], d[0]))
        angles = [r[0] for r in rays]
        k = int(np.searchsorted(angles, ang, side="right")) - 1  # ray at or before ang
        r0 = rays[k % len(rays)]
        r1 = rays[(k + 1) % len(rays)]
        # sector lies to the left of r0 and to the right of r1
        f0 = FaceTag(r0[1], 1 if r0[2] > 0 else -1)
        f1 = FaceTag(r1[1], -1 if r1[2] > 0 else 1)
        return min(f0, f1)

    def is_interior_of_segment(self, x, s: int) -> bool:
        x = np.asarray(x, dtype=float)
        tol = 8 * self.tolerance_eps
        return (np.hypot(*(x - self.A[s])) > tol) and (np.hypot(*(x - self.B[s])) > tol) and len(self.segments_through(x)) == 1

    def nearest_boundary(self, P):
        """Sup-nearest boundary point per row of P with a deterministic tie-break.

        Among sup-minimizing segments the point is the Euclidean-closest
        point of the minimizing set; remaining ties go to the lowest segment
        index.  Returns (points (N,2), segment index (N,), sup distance (N,)).
        """
        P = np.atleast_2d(np.asarray(P, dtype=float))
        N = len(P)
        out_pt = np.empty((N, 2))
        out_seg = np.empty(N, dtype=int)
        out_d = np.empty(N)
        chunk = max(1, 200000 // max(1, len(self.A)))
        for s0 in range(0, N, chunk):
            Pc = P[s0:s0 + chunk]
            m, _ = _sup_dist_params(Pc, self.A, self.B)
            D = Pc[:, None, :] - self.A[None, :, :]
            E = np.broadcast_to((self.B - self.A)[None], D.shape)
            mm = m.min(axis=1)
            tol = 1e-9 * np.maximum(mm, self.tolerance_eps)[:, None] + self.tolerance_eps
            lo = np.zeros_like(m)
            hi = np.ones_like(m)
            for k in range(2):
                dk, ek = D[..., k], E[..., k]
                bound = m + tol
                with np.errstate(divide="ignore", invalid="ignore"):
                    t1 = (dk - bound) / ek
                    t2 = (dk + bound) / ek
                a = np.where(ek != 0, np.minimum(t1, t2), -np.inf)
                b = np.where(ek != 0, np.maximum(t1, t2), np.inf)
                lo = np.maximum(lo, a)
                hi = np.minimum(hi, b)
            hi = np.maximum(hi, lo)
            L2 = np.einsum("nmk,nmk->nm", E, E)
            te = np.clip(np.einsum("nmk,nmk->nm", D, E) / np.where(L2 > 0, L2, 1.0), lo, hi)
            pts = self.A[None] + te[..., None] * E
            eu = np.hypot(*(Pc[:, None, :] - pts).transpose(2, 0, 1))
            cand = m <= (mm[:, None] + tol)
            eu = np.where(cand, eu, np.inf)
            eu_min = eu.min(axis=1, keepdims=True)
            cand2 = cand & (eu <= eu_min + 1e-12 * np.maximum(eu_min, 1.0))
            idx = np.argmax(cand2, axis=1)
            out_seg[s0:s0 + chunk] = idx
            out_pt[s0:s0 + chunk] = pts[np.arange(len(Pc)), idx]
            out_d[s0:s0 + chunk] = mm
        return out_pt, out_seg, out_d

    def boundary_faces(self, anchors, segs, centers) -> List[FaceTag]:
        """Face tags for anchors seen from the given interior points."""
        faces = []
        tol = 8 * self.tolerance_eps
        for a, s, c in zip(anchors, segs, centers):
            d = c - a
            at_end = min(np.hypot(*(a - self.A[s])), np.hypot(*(a - self.B[s]))) <= tol
            if not at_end and len(self.segments_through(a)) == 1:
                cr = _cross(self.B[s] - self.A[s], d)
                faces.append(FaceTag(int(s), 1 if cr >= 0 else -1))
            else:
                faces.append(self.face_of_approach(a, d))
        return faces


# ---------------------------------------------------------------------------
# module-level query functions


def dist_to_boundary(d: Domain, x):
    """Sup-norm distance from x (a point or an (N,2) array) to the boundary."""
    P = np.atleast_2d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(P)):
        raise DomainError("outside domain")
    if not np.all(d.in_closure(P)):
        raise DomainError("outside domain")
    r = d.rho(P)
    return float(r[0]) if np.ndim(x) == 1 else r


def _segment_hits(d: Domain, a, b, exclude_a: bool) -> bool:
    """True if [a,b] (or (a,b]) meets a closed boundary segment."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    eps = 8 * d.tolerance_eps
    r = b - a
    L = float(np.hypot(*r))
    C, E = d.A, d.B - d.A
    denom = _cross(np.broadcast_to(r, E.shape), E)
    ca = C - a
    scale = np.hypot(E[:, 0], E[:, 1]) * max(L, 1e-300)
    par = np.abs(denom) <= 1e-13 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(ca, E) / denom
        s = _cross(ca, np.broadcast_to(r, E.shape)) / denom
    tau_t = eps / max(L, 1e-300)
    tau_s = eps / np.maximum(np.hypot(E[:, 0], E[:, 1]), 1e-300)
    hit = (~par) & (t >= -tau_t) & (t <= 1 + tau_t) & (s >= -tau_s) & (s <= 1 + tau_s)
    if exclude_a:
        hit &= ~(t * L <= eps)
    if np.any(hit):
        return True
    # parallel: collinear overlap
    if L == 0:
        return bool(np.min(_sup_dist_params(a[None], d.A, d.B)[0]) <= eps) and not exclude_a
    coll = par & (np.abs(_cross(ca, np.broadcast_to(r, E.shape))) <= eps * L)
    for k in np.nonzero(coll)[0]:
        tc = float(np.dot(d.A[k] - a, r) / (L * L))
        te = float(np.dot(d.B[k] - a, r) / (L * L))
        lo, hi = max(0.0, min(tc, te)), min(1.0, max(tc, te))
        if lo <= hi + tau_t:
            if exclude_a and hi * L <= eps:
                continue
            return True
    return False


def segment_in_domain(d: Domain, a, b, exclude_a: bool = False) -> bool:
    """True iff (a,b] (exclude_a) or [a,b] lies in the open domain."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not d.contains(b)[0]:
        return False
    if not exclude_a and not d.contains(a)[0]:
        return False
    return not _segment_hits(d, a, b, exclude_a)


def _clip_segments_triangles(P0, P1, T):
    """Cyrus-Beck clipping of segments P0->P1 (M,2) against triangles T (K,3,2).

    Returns (t0, t1) arrays of shape (K, M); empty where t0 > t1.
    """
    K = len(T)
    t0 = np.zeros((K, len(P0)))
    t1 = np.ones((K, len(P0)))
    area = _cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0])
    orient = np.sign(area)[:, None]
    D = (P1 - P0)[None]
    for i in range(3):
        v = T[:, i]
        w = T[:, (i + 1) % 3]
        e = w - v
        n = np.stack([-e[:, 1], e[:, 0]], axis=1) * orient  # inward normal
        num = np.einsum("kmj,kj->km", P0[None] - v[:, None, :], n)
        den = np.einsum("kmj,kj->km", np.broadcast_to(D, (K,) + D.shape[1:]), n)
        nlen = np.hypot(n[:, 0], n[:, 1])[:, None]
        tol = 1e-12 * nlen
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = -num / den
        pos = den > tol
        neg = den < -tol
        t0 = np.where(pos, np.maximum(t0, tt), t0)
        t1 = np.where(neg, np.minimum(t1, tt), t1)
        outside = (~pos) & (~neg) & (num < -tol * 1e-3)
        t1 = np.where(outside, -1.0, t1)
    return t0, t1


def hull_blocked(d: Domain, corners: np.ndarray, x: np.ndarray) -> bool:
    """True if a boundary segment meets Conv(corners + {x}) away from x."""
    tris = []
    for i in range(4):
        tri = np.array([x, corners[i], corners[(i + 1) % 4]])
        if abs(_cross(tri[1] - tri[0], tri[2] - tri[0])) > 1e-14 * (1 + np.max(np.abs(tri))) ** 2:
            tris.append(tri)
    if not tris:
        return False
    T = np.array(tris)
    t0, t1 = _clip_segments_triangles(d.A, d.B, T)
    ok = t0 <= t1 + 1e-12
    if not np.any(ok):
        return False
    eps = 8 * d.tolerance_eps + 1e-12 * float(np.max(np.abs(corners - x)))
    E = d.B - d.A
    for k, m in zip(*np.nonzero(ok)):
        p0 = d.A[m] + t0[k, m] * E[m]
        p1 = d.A[m] + t1[k, m] * E[m]
        if max(np.hypot(*(p0 - x)), np.hypot(*(p1 - x))) > eps:
            return True
    return False


def is_Q_visible(d: Domain, q: Cube, x, face: Optional[FaceTag] = None) -> bool:
    """x sees Q: every semi-open segment (x, y], y in Q, lies in the domain.

    For a boundary point on the relative interior of a segment, `face`
    selects the side it is approached from (a point on a slit is two
    distinct limit points).
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(q.center, dtype=float)
    if not (d.contains(c)[0] and d.rho(c)[0] > q.radius):
        return False
    corners = q.corners()
    if face is not None and d.is_interior_of_segment(x, face.segment):
        u = d.B[face.segment] - d.A[face.segment]
        n = face.side * np.array([-u[1], u[0]])
        if np.any((corners - x) @ n <= 0):
            return False
    return not hull_blocked(d, corners, x)


def Q_visible_batch(d: Domain, centers, radii, X, faces=None, chunk: int = 4096) -> np.ndarray:
    """Vectorized is_Q_visible over rows (center, radius, x, face).

    Cubes are assumed to lie inside the domain (as Whitney cubes do).
    faces: optional list of FaceTag or None per row.
    """
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    R = np.asarray(radii, dtype=float).reshape(-1)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = len(C)
    ok = np.ones(n, dtype=bool)
    sgn = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
    corners = C[:, None, :] + R[:, None, None] * sgn[None]
    if faces is not None:
        for k, f in enumerate(faces):
            if f is None:
                continue
            if d.is_interior_of_segment(X[k], f.segment):
                u = d.B[f.segment] - d.A[f.segment]
                nrm = f.side * np.array([-u[1], u[0]])
                if np.any((corners[k] - X[k]) @ nrm <= 0):
                    ok[k] = False
    E = d.B - d.A
    for s in range(0, n, chunk):
        rows = np.arange(s, min(n, s + chunk))
        rows = rows[ok[rows]]
        if len(rows) == 0:
            continue
        x = X[rows]
        T = np.stack([np.repeat(x, 4, axis=0),
                      corners[rows].reshape(-1, 2),
                      np.roll(corners[rows], -1, axis=1).reshape(-1, 2)], axis=1)
        owner = np.repeat(np.arange(len(rows)), 4)
        area = np.abs(_cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0]))
        scale = (1 + np.max(np.abs(T.reshape(len(T), -1)), axis=1)) ** 2
        keep = area > 1e-14 * scale
        T, owner = T[keep], owner[keep]
        if len(T) == 0:
            continue
        t0, t1 = _clip_segments_triangles(d.A, d.B, T)
        hit = t0 <= t1 + 1e-12
        kk, mm = np.nonzero(hit)
        if len(kk) == 0:
            continue
        xo = x[owner[kk]]
        p0 = d.A[mm] + t0[kk, mm][:, None] * E[mm]
        p1 = d.A[mm] + t1[kk, mm][:, None] * E[mm]
        span = np.max(np.abs(corners[rows][owner[kk]] - xo[:, None, :]), axis=(1, 2))
        eps = 8 * d.tolerance_eps + 1e-12 * span
        far = np.maximum(np.hypot(*(p0 - xo).T), np.hypot(*(p1 - xo).T)) > eps
        blocked = np.zeros(len(rows), dtype=bool)
        blocked[owner[kk][far]] = True
        ok[rows[blocked]] = False
    return ok


# ---------------------------------------------------------------------------
# construction helpers


def _dyadic_box(lo, hi):
    side = float(np.max(hi - lo))
    return (float(lo[0]), float(lo[1])), side


def _ring_segments(ring):
    ring = np.asarray(ring, dtype=float)
    return [np.array([ring[i], ring[(i + 1) % len(ring)]]) for i in range(len(ring))]


def polygon_domain(outer, holes=(), slits=(), name="polygon", basepoint=None, box=None) -> Domain:
    """Polygon with holes and slits.  `box` = (origin, side) overrides the dyadic box."""
    outer = np.asarray(outer, dtype=float)
    if len(outer) < 3:
        raise DomainError("outer ring needs at least 3 vertices")
    holes = [np.asarray(h, dtype=float) for h in holes]
    slits = [np.asarray(s, dtype=float).reshape(2, 2) for s in slits]
    segs, kinds, labels = [], [], []
    for i, s in enumerate(_ring_segments(outer)):
        segs.append(s); kinds.append("outer"); labels.append(f"outer{i}")
    for j, h in enumerate(holes):
        for i, s in enumerate(_ring_segments(h)):
            segs.append(s); kinds.append("hole"); labels.append(f"hole{j}.{i}")
    for i, s in enumerate(slits):
        if np.allclose(s[0], s[1]):
            raise DomainError("degenerate slit")
        segs.append(s); kinds.append("slit"); labels.append(f"slit{i}")
    segs = np.array(segs)
    if not np.all(np.isfinite(segs)):
        raise DomainError("non-finite coordinates")
    lo, hi = outer.min(axis=0), outer.max(axis=0)
    origin, side = box if box is not None else _dyadic_box(lo, hi)
    d = Domain("polygon_with_holes_and_slits", segs, kinds, labels, name=name, outer=outer,
               holes=holes, slits=slits, origin=origin, side=side, basepoint=basepoint)
    if polygon_area(outer) <= 0:
        raise DomainError("outer ring has zero area")
    return d


def cell_domain(xs, ys, filled, name="cells", kind="box_union", basepoint=None) -> Domain:
    """Union of the cells [xs[i], xs[i+1]] x [ys[j], ys[j+1]] with filled[j, i]."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    F = np.asarray(filled, dtype=bool)
    if F.shape != (len(ys) - 1, len(xs) - 1) or not F.any():
        raise DomainError("bad cell grid")
    pad = np.zeros((F.shape[0] + 2, F.shape[1] + 2), dtype=bool)
    pad[1:-1, 1:-1] = F
    segs = []
    # vertical edges at xs[i]: between column i-1 and i
    for i in range(len(xs)):
        diff = pad[1:-1, i] != pad[1:-1, i + 1]
        for j0, j1 in _runs(diff):
            segs.append([[xs[i], ys[j0]], [xs[i], ys[j1]]])
    for j in range(len(ys)):
        diff = pad[j, 1:-1] != pad[j + 1, 1:-1]
        for i0, i1 in _runs(diff):
            segs.append([[xs[i0], ys[j]], [xs[i1], ys[j]]])
    segs = np.array(segs, dtype=float)
    labels = [f"edge{i}" for i in range(len(segs))]
    origin, side = _dyadic_box(np.array([xs[0], ys[0]]), np.array([xs[-1], ys[-1]]))
    return Domain(kind, segs, ["edge"] * len(segs), labels, name=name, cells=(xs, ys, F),
                  origin=origin, side=side, basepoint=basepoint)


def _runs(mask):
    out = []
    i = 0
    n = len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j < n and mask[j]:
                j += 1
            out.append((i, j))
            i = j
        else:
            i += 1
    return out


def box_union_domain(boxes, name="box_union") -> Domain:
    boxes = np.asarray(boxes, dtype=float).reshape(-1, 4)  # x0, y0, x1, y1
    xs = np.unique(np.concatenate([boxes[:, 0], boxes[:, 2]]))
    ys = np.unique(np.concatenate([boxes[:, 1], boxes[:, 3]]))
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    F = np.zeros((len(cy), len(cx)), dtype=bool)
    for x0, y0, x1, y1 in boxes:
        F |= (cy[:, None] > y0) & (cy[:, None] < y1) & (cx[None, :] > x0) & (cx[None, :] < x1)
    return cell_domain(xs, ys, F, name=name, kind="box_union")


def grid_domain(cell: float, rows: Sequence[str], name="grid") -> Domain:
    """Occupancy grid; rows[0] is the top row, origin at the lower-left corner."""
    if cell <= 0:
        raise DomainError("cell size must be positive")
    if not rows or len({len(r) for r in rows}) != 1 or any(set(r) - {"0", "1"} for r in rows):
        raise DomainError("rows must be equal-length bitstrings")
    F = np.array([[ch == "1" for ch in r] for r in rows[::-1]], dtype=bool)
    xs = cell * np.arange(F.shape[1] + 1)
    ys = cell * np.arange(F.shape[0] + 1)
    return cell_domain(xs, ys, F, name=name, kind="occupancy_grid")


def check_connected(d: Domain, resolution: int = 256) -> bool:
    """Flood fill over a raster of cell centers; moves may not cross the boundary."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    n = resolution
    h = d.side / n
    g = (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(d.origin[0] + g, d.origin[1] + g)
    P = np.column_stack([X.ravel(), Y.ravel()])
    inside = d.contains(P).reshape(n, n)
    ids = -np.ones((n, n), dtype=int)
    ids[inside] = np.arange(np.count_nonzero(inside))
    rows, cols = [], []
    for di, dj in ((0, 1), (1, 0)):
        a = ids[: n - di, : n - dj]
        b = ids[di:, dj:]
        ok = (a >= 0) & (b >= 0)
        ia, ib = a[ok], b[ok]
        pa, pb = P[inside.ravel()][ia], P[inside.ravel()][ib]
        keep = ~_crosses_any(d, pa, pb)
        rows.append(ia[keep]); cols.append(ib[keep])
    m = np.count_nonzero(inside)
    if m == 0:
        return False
    r = np.concatenate(rows); c = np.concatenate(cols)
    G = coo_matrix((np.ones(len(r)), (r, c)), shape=(m, m))
    ncomp, _ = connected_components(G, directed=False)
    return ncomp == 1


def _crosses_any(d: Domain, P0, P1) -> np.ndarray:
    """Vectorized closed segment-segment intersection test against the boundary."""
    out = np.zeros(len(P0), dtype=bool)
    r = P1 - P0
    for A, B in zip(d.A, d.B):
        e = B - A
        o1 = _cross(np.broadcast_to(e, P0.shape), P0 - A)
        o2 = _cross(np.broadcast_to(e, P1.shape), P1 - A)
        o3 = _cross(r, A - P0)
        o4 = _cross(r, B - P0)
        out |= (o1 * o2 <= 0) & (o3 * o4 <= 0) & ~((o1 == 0) & (o2 == 0) & ((np.minimum(P0[:, 0], P1[:, 0]) > max(A[0], B[0])) | (np.maximum(P0[:, 0], P1[:, 0]) < min(A[0], B[0])) | (np.minimum(P0[:, 1], P1[:, 1]) > max(A[1], B[1])) | (np.maximum(P0[:, 1], P1[:, 1]) < min(A[1], B[1]))))
    return out


def load_domain(path_or_obj) -> Domain:
    """Domain from a JSON file path, JSON text, dict, or gallery name."""
    obj = path_or_obj
    if isinstance(obj, str):
        if obj in GALLERY or obj.split(":")[0] in GALLERY:
            return gallery(obj)
        try:
            with open(obj) as fh:
                obj = json.load(fh)
        except FileNotFoundError:
            raise DomainError(f"no such domain file or gallery name: {obj}")
        except json.JSONDecodeError as e:
            raise DomainError(f"bad domain JSON: {e}")
    if not isinstance(obj, dict) or "type" not in obj:
        raise DomainError("domain JSON must be an object with a 'type'")
    try:
        if obj["type"] == "polygon":
            d = polygon_domain(obj["outer"], obj.get("holes", []), obj.get("slits", []),
                               name=obj.get("name", "polygon"))
        elif obj["type"] == "grid":
            d = grid_domain(float(obj["cell"]), obj["rows"], name=obj.get("name", "grid"))
        elif obj["type"] == "boxes":
            d = box_union_domain(obj["boxes"], name=obj.get("name", "box_union"))
        else:
            raise DomainError(f"unknown domain type {obj['type']!r}")
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, DomainError):
            raise
        raise DomainError(f"malformed domain: {e}")
    if not check_connected(d):
        raise DomainError("domain is not connected")
    return d


# ---------------------------------------------------------------------------
# gallery


def unit_square() -> Domain:
    return polygon_domain([(0, 0), (1, 0), (1, 1), (0, 1)], name="unit_square", basepoint=(0.5, 0.5))


def slit_square() -> Domain:
    return polygon_domain([(-1, -1), (1, -1), (1, 1), (-1, 1)], slits=[[(-0.5, 0), (0.5, 0)]],
                          name="slit_square", basepoint=(0.0, 0.5))


def comb_domain(k_teeth: int = 6) -> Domain:
    """Unit square crossed by k walls that accumulate toward the back wall x = 1.

    Wall j sits at x = 1 - (3/4)^(j-1) / 2 and leaves an opening of height
    2^-(j+2), alternately at the bottom and at the top, so a path to the back
    wall zigzags once per wall through ever narrower openings.
    """
    if k_teeth < 0:
        raise DomainError("k_teeth must be >= 0")
    slits = []
    for j in range(1, k_teeth + 1):
        x = 1.0 - 0.5 * 0.75 ** (j - 1)
        g = 2.0 ** -(j + 2)
        if j % 2 == 1:
            slits.append([(x, 1.0), (x, g)])
        else:
            slits.append([(x, 0.0), (x, 1.0 - g)])
    return polygon_domain([(0, 0), (1, 0), (1, 1), (0, 1)], slits=slits, name=f"comb_domain:{k_teeth}",
                          basepoint=(0.25, 0.5))


def _rays(center, angles_deg, length):
    c = np.asarray(center, dtype=float)
    out = []
    for a in angles_deg:
        t = np.deg2rad(a)
        v = np.array([np.cos(t), np.sin(t)])
        v[np.abs(v) < 1e-15] = 0.0
        out.append([c, c + length * v])
    return out


MULTI_SLIT_JUNCTIONS = {
    (-0.5, 0.5): 6,
    (0.5, 0.5): 4,
    (0.5, -0.5): 3,
    (-0.5, -0.5): 2,
}


def multi_slit() -> Domain:
    """Square with slit stars: 6, 4 and 3 rays meeting at junctions, plus one plain slit."""
    slits = []
    slits += _rays((-0.5, 0.5), [0, 45, 90, 180, 225, 270], 0.25)
    slits += _rays((0.5, 0.5), [0, 90, 180, 270], 0.25)
    slits += _rays((0.5, -0.5), [0, 90, 225], 0.25)
    slits.append([(-0.75, -0.5), (-0.25, -0.5)])
    return polygon_domain([(-1, -1), (1, -1), (1, 1), (-1, 1)], slits=slits, name="multi_slit",
                          basepoint=(0.0, 0.0))


def annulus() -> Domain:
    return polygon_domain([(-1, -1), (1, -1), (1, 1), (-1, 1)],
                          holes=[[(-0.25, -0.25), (-0.25, 0.25), (0.25, 0.25), (0.25, -0.25)]],
                          name="annulus", basepoint=(0.5, 0.5))


def outward_cusp(exponent: float = 2.0, n: int = 48) -> Domain:
    """Half-box (-1,0) x (-1/2,1/2) continued by the horn |y| < (1 - x)^exponent / 2, 0 <= x < 1."""
    if exponent < 1:
        raise DomainError("exponent must be >= 1")
    s = np.linspace(0.0, 1.0, n + 1)[:-1]
    xs = 1.0 - (1.0 - s) ** 1.5
    lower = [(x, -0.5 * (1 - x) ** exponent) for x in xs]
    upper = [(x, 0.5 * (1 - x) ** exponent) for x in xs[::-1]]
    outer = [(-1.0, -0.5)] + lower + [(1.0, 0.0)] + upper + [(-1.0, 0.5)]
    return polygon_domain(outer, name=f"outward_cusp:{exponent:g}", basepoint=(-0.5, 0.0),
                          box=((-1.0, -1.0), 2.0))


GALLERY = {
    "unit_square": unit_square,
    "slit_square": slit_square,
    "comb_domain": comb_domain,
    "multi_slit": multi_slit,
    "annulus": annulus,
    "outward_cusp": outward_cusp,
}


@lru_cache(maxsize=None)
def gallery(name: str) -> Domain:
    """Gallery domain by name; parameters after a colon, e.g. "comb_domain:4"."""
    base, _, arg = name.partition(":")
    if base not in GALLERY:
        raise DomainError(f"unknown gallery domain {name!r}")
    if arg:
        try:
            val = float(arg)
        except ValueError:
            raise DomainError(f"bad gallery parameter {arg!r}")
        if base == "comb_domain":
            return comb_domain(int(val))
        if base == "outward_cusp":
            return outward_cusp(val)
        raise DomainError(f"{base} takes no parameter")
    return GALLERY[base]()


def gallery_names() -> List[str]:
    return list(GALLERY)
