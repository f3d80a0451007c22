"""Whitney extension operator F = sum_Q c_Q phi_Q with a smooth partition of unity.

c_Q is the boundary datum at the cube's canonical element (anchor a_Q seen
from the cube's side) when diam Q <= sigma, and b_c otherwise.  phi_Q is a
normalized tensor bump supported on Q* = (9/8)Q.
"""
from __future__ import annotations

import ast
import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .geometry import Domain, FaceTag, segment_in_domain
from .whitney import DILATION, ResolutionError, WhitneyDecomposition

TRACE_LADDER = 12
TRACE_TOL = 1e-3


class RuleGapError(ValueError):
    """A boundary element matched no rule of a BoundaryFunction."""


# ---------------------------------------------------------------------------
# boundary functions


def _smooth_step(s):
    # C-infinity step: 0 for s <= 0, 1 for s >= 1
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def cutoff(t, a, b):
    """C-infinity cutoff: 1 for |t| <= a, 0 for |t| >= b."""
    return _smooth_step((b - np.abs(t)) / (b - a))


_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "arctan": np.arctan,
    "minimum": np.minimum, "maximum": np.maximum, "where": np.where,
    "cutoff": cutoff, "hypot": np.hypot, "pos": lambda v: np.maximum(v, 0.0),
}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide,
           ast.Pow: np.power, ast.Mod: np.mod}
_CMPOPS = {ast.Lt: np.less, ast.LtE: np.less_equal, ast.Gt: np.greater, ast.GtE: np.greater_equal,
           ast.Eq: np.equal, ast.NotEq: np.not_equal}


def compile_expr(text: str) -> Callable:
    """Whitelisted arithmetic in the anchor coordinates ax, ay."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"bad expression {text!r}: {exc.msg}") from None

    def ev(node, env):
        if isinstance(node, ast.Expression):
            return ev(node.body, env)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in env:
                return env[node.id]
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise ValueError(f"unknown name {node.id!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left, env), ev(node.right, env))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Compare) and len(node.ops) == 1 and type(node.ops[0]) in _CMPOPS:
            return _CMPOPS[type(node.ops[0])](ev(node.left, env), ev(node.comparators[0], env)).astype(float)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
                and not node.keywords:
            return _FUNCS[node.func.id](*[ev(a, env) for a in node.args])
        raise ValueError(f"unsupported syntax in {text!r}")

    # validate once
    probe = {"ax": np.zeros(1), "ay": np.zeros(1)}
    with np.errstate(all="ignore"):
        ev(tree, probe)

    def fn(ax, ay):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = ev(tree, {"ax": ax, "ay": ay})
        return np.broadcast_to(np.asarray(v, dtype=float), np.shape(ax)).copy()

    return fn


@dataclass
class Rule:
    face: str = "any"  # face label such as "slit0+", or "any"
    box: Optional[Sequence[float]] = None  # [xmin, ymin, xmax, ymax], closed
    expr: str = "0"

    def __post_init__(self):
        self.fn = compile_expr(self.expr)


@dataclass
class BoundaryFunction:
    """Ordered rules: the first rule whose face and box match an element gives its value."""
    rules: List[Rule]
    closed_form: bool = True

    @classmethod
    def from_json(cls, obj) -> "BoundaryFunction":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if isinstance(obj, dict):
            obj = obj.get("rules", obj)
        if not isinstance(obj, list) or not obj:
            raise ValueError("boundary function: expected a non-empty list of rules")
        rules = []
        for r in obj:
            if not isinstance(r, dict) or "expr" not in r:
                raise ValueError("boundary function: each rule needs an 'expr'")
            where = r.get("where", {}) or {}
            rules.append(Rule(str(where.get("face", "any")), where.get("box"), str(r["expr"])))
        return cls(rules)

    def to_json(self) -> list:
        out = []
        for r in self.rules:
            where = {"face": r.face}
            if r.box is not None:
                where["box"] = [float(v) for v in r.box]
            out.append({"where": where, "expr": r.expr})
        return out

    def values(self, d: Domain, anchors, faces: Sequence[FaceTag]) -> np.ndarray:
        anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
        labels = np.array([d.face_label(f) for f in faces])
        out = np.full(len(anchors), np.nan)
        todo = np.ones(len(anchors), dtype=bool)
        for r in self.rules:
            m = todo.copy()
            if r.face != "any":
                m &= labels == r.face
            if r.box is not None:
                x0, y0, x1, y1 = r.box
                m &= (anchors[:, 0] >= x0) & (anchors[:, 0] <= x1) & (anchors[:, 1] >= y0) & (anchors[:, 1] <= y1)
            if np.any(m):
                out[m] = r.fn(anchors[m, 0], anchors[m, 1])
                todo &= ~m
        if np.any(todo):
            k = int(np.argmax(todo))
            raise RuleGapError(f"no rule matches element at ({anchors[k, 0]:.6g}, {anchors[k, 1]:.6g}) "
                               f"face {labels[k]}")
        return out

    def __call__(self, d: Domain, omega) -> float:
        return float(self.values(d, omega.anchor[None], [omega.face])[0])

    def scaled(self, a: float, b: float = 0.0) -> "BoundaryFunction":
        return BoundaryFunction([Rule(r.face, r.box, f"({a!r})*({r.expr})+({b!r})") for r in self.rules])


def combine(a: float, f: BoundaryFunction, b: float, g: BoundaryFunction) -> Callable:
    """Evaluator of a*f + b*g on (domain, anchors, faces)."""
    def values(d, anchors, faces):
        return a * f.values(d, anchors, faces) + b * g.values(d, anchors, faces)
    return values


def constant_datum(c: float) -> BoundaryFunction:
    return BoundaryFunction([Rule(expr=repr(float(c)))])


def linear_datum() -> BoundaryFunction:
    return BoundaryFunction([Rule(expr="ax")])


def slit_datum(label: str = "slit0") -> BoundaryFunction:
    """0 on the upper face and 1 on the lower face of the slit's middle half, 1/2 elsewhere."""
    w = "cutoff(ax, 0.25, 0.5)"
    return BoundaryFunction([Rule(face=f"{label}+", expr=f"0.5 - 0.5*{w}"),
                             Rule(face=f"{label}-", expr=f"0.5 + 0.5*{w}"),
                             Rule(expr="0.5")])


def bump_datum(x0=(0.5, 0.0), r: float = 0.25, power: float = 0.8) -> BoundaryFunction:
    e = f"pos(1 - ((ax - {x0[0]!r})**2 + (ay - {x0[1]!r})**2) / {r * r!r})**{power!r}"
    return BoundaryFunction([Rule(expr=e)])


def cusp_datum(x0=(1.0 / 3.0, 0.0)) -> BoundaryFunction:
    return BoundaryFunction([Rule(expr=f"1 / hypot(ax - {x0[0]!r}, ay - {x0[1]!r})")])


# ---------------------------------------------------------------------------
# partition of unity


def _candidates(w: WhitneyDecomposition, P):
    """Containing cube plus its touching neighbours, padded with -1."""
    q = w.locate(P)
    if np.any(q < 0):
        raise ResolutionError("point in the coverage deficit: refine decomposition")
    deg = np.diff(w.adj_ptr)
    K = int(deg[q].max()) + 1
    C = np.full((len(P), K), -1, dtype=int)
    C[:, 0] = q
    start = w.adj_ptr[q]
    for k in range(K - 1):
        ok = k < deg[q]
        C[ok, k + 1] = w.adj_idx[start[ok] + k]
    return C


def _bumps(w: WhitneyDecomposition, P, C):
    """psi_K(x) and grad psi_K(x) for candidate cubes C (padded -1)."""
    valid = C >= 0
    Cs = np.where(valid, C, 0)
    R = DILATION * w.radius[Cs]
    T = (P[:, None, :] - w.center[Cs]) / R[..., None]
    inside = valid & np.all(np.abs(T) < 1.0, axis=2)
    T2 = np.where(inside[..., None], T * T, 0.0)
    one = 1.0 - T2
    comp = np.exp(1.0 - 1.0 / one)  # per-axis profile, 1 at the center
    psi = np.where(inside, comp[..., 0] * comp[..., 1], 0.0)
    dlog = -2.0 * np.where(inside[..., None], T, 0.0) / (one * one) / R[..., None]
    gpsi = psi[..., None] * dlog
    return psi, gpsi


def _pu(w: WhitneyDecomposition, P):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    C = _candidates(w, P)
    psi, gpsi = _bumps(w, P, C)
    S = psi.sum(axis=1)
    if np.any(S <= 0):
        raise ResolutionError("point in the coverage deficit: refine decomposition")
    gS = gpsi.sum(axis=1)
    phi = psi / S[:, None]
    gphi = (gpsi * S[:, None, None] - psi[..., None] * gS[:, None, :]) / (S * S)[:, None, None]
    return C, phi, gphi


def partition_of_unity(w: WhitneyDecomposition, x) -> dict:
    """{cube id: (phi_Q(x), grad phi_Q(x))} over the cubes with x in Q*."""
    C, phi, gphi = _pu(w, np.asarray(x, dtype=float)[None])
    out = {}
    for k in np.nonzero(phi[0] > 0)[0]:
        out[int(C[0, k])] = (float(phi[0, k]), gphi[0, k].copy())
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# extension field


@dataclass
class ExtensionField:
    w: WhitneyDecomposition
    coeffs: np.ndarray
    sigma: float = math.inf
    b_c: float = 0.0

    def evaluate(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        out = np.empty(len(P))
        for s in range(0, len(P), 50000):
            C, phi, _ = _pu(self.w, P[s:s + 50000])
            out[s:s + 50000] = np.sum(phi * self.coeffs[np.where(C >= 0, C, 0)], axis=1)
        return out

    def gradient(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        out = np.empty((len(P), 2))
        for s in range(0, len(P), 50000):
            C, _, gphi = _pu(self.w, P[s:s + 50000])
            c = self.coeffs[np.where(C >= 0, C, 0)]
            out[s:s + 50000] = np.sum(gphi * c[..., None], axis=1)
        return out

    def __call__(self, P):
        return self.evaluate(P)


def cube_values(f, d: Domain, w: WhitneyDecomposition, idx=None) -> np.ndarray:
    """Boundary datum at the canonical element (a_Q, face_Q) of each cube."""
    idx = np.arange(len(w)) if idx is None else np.asarray(idx, dtype=int)
    faces = [w.face[i] for i in idx]
    vals = f.values(d, w.anchor[idx], faces) if hasattr(f, "values") else f(d, w.anchor[idx], faces)
    if not np.all(np.isfinite(vals)):
        k = int(np.argmax(~np.isfinite(vals)))
        raise RuleGapError(f"datum is not finite at element ({w.anchor[idx[k], 0]:.6g}, "
                           f"{w.anchor[idx[k], 1]:.6g})")
    return vals


def build_extension(f, w: WhitneyDecomposition, ab=None, sigma: float = math.inf,
                    b_c: float = 0.0, use_clusters: bool = False) -> ExtensionField:
    """Coefficients c_Q = f(omega_Q) for diam Q <= sigma, else b_c.

    omega_Q is the canonical element (a_Q, face_Q).  With use_clusters the
    element is located through the alpha-boundary's cube clusters instead
    (slow; used for cross-checks).
    """
    d = w.domain
    small = w.diam <= sigma
    c = np.full(len(w), float(b_c))
    idx = np.nonzero(small)[0]
    if use_clusters:
        if ab is None:
            raise ValueError("use_clusters needs an alpha-boundary")
        from .alpha_boundary import omega_for_cube
        els = [omega_for_cube(ab, w, int(q)) for q in idx]
        anchors = np.array([e.anchor for e in els]).reshape(-1, 2)
        vals = f.values(d, anchors, [e.face for e in els]) if hasattr(f, "values") else \
            f(d, anchors, [e.face for e in els])
        c[idx] = vals
    elif len(idx):
        c[idx] = cube_values(f, d, w, idx)
    return ExtensionField(w, c, sigma, b_c)


def evaluate(ef: ExtensionField, x):
    v = ef.evaluate(x)
    return float(v[0]) if np.ndim(x) == 1 else v


def gradient(ef: ExtensionField, x):
    g = ef.gradient(x)
    return g[0] if np.ndim(x) == 1 else g


@dataclass
class TraceResult:
    value: float
    residual: float
    ladder: List[float] = field(default_factory=list)


def trace(F, ab, omega, K: int = TRACE_LADDER, trace_tol: float = TRACE_TOL,
          strict: bool = False) -> TraceResult:
    """Limit of F along the straight approach to omega's anchor.

    Points p_k = l + 2^-k (x0 - l), k = 0..K, with x0 on the element's
    approach ray at the coarsest cluster scale; the ladder stops at the
    last covered point and is extrapolated with first-order Richardson.
    """
    d, w = ab.domain, ab.w
    a = np.asarray(omega.anchor, dtype=float)
    c = w.center[omega.rep]
    u = c - a
    L = float(np.max(np.abs(u)))
    x0 = c
    for j in range(1, 12):
        lam = 2.0 ** j
        if lam * L > ab.scales[0]:
            break
        cand = a + lam * u
        if not segment_in_domain(d, a, cand, exclude_a=True):
            break
        x0 = cand
    t = 2.0 ** -np.arange(K + 1)
    P = a + t[:, None] * (x0 - a)
    cov = w.locate(P) >= 0
    n = len(P) if np.all(cov) else int(np.argmin(cov))
    P = P[:n]
    if n == 0:
        raise ResolutionError("trace ladder has no covered point")
    if isinstance(F, ExtensionField):
        vals = F.evaluate(P)
    else:
        vals = np.asarray(F(P), dtype=float)
    ladder = [float(v) for v in vals]
    if n == 1:
        return TraceResult(ladder[0], math.inf, ladder)
    value = float(2.0 * vals[-1] - vals[-2])
    # size of the extrapolation correction
    residual = abs(float(vals[-1] - vals[-2])) / max(1.0, abs(value))
    if strict and residual > trace_tol:
        raise ArithmeticError(f"trace ladder did not converge (residual {residual:.3g}): {ladder}")
    return TraceResult(value, residual, ladder)


# ---------------------------------------------------------------------------
# seminorms

# F is constant on the part of Q outside every neighbour's dilated cube, so
# all of grad F lives in bands of width r_K / 8 along the faces of Q.  The
# cube rule below places breakpoints at every possible band edge.
_REACH = (1 / 16, 1 / 8, 1 / 4, 1 / 2)  # neighbour radius r_K in {r/2, r, 2r, 4r}, over 8 r
_TEMPLATES: dict = {}


def _template(n_reach: int, order: int, n_mid: int):
    key = (n_reach, order, n_mid)
    if key in _TEMPLATES:
        return _TEMPLATES[key]
    gx, gw = np.polynomial.legendre.leggauss(order)
    a = 1.0 - _REACH[n_reach - 1]
    edges = sorted({1.0 - r for r in _REACH[:n_reach]} | {1.0})
    band = list(zip(edges[:-1], edges[1:]))
    mid = np.linspace(-a, a, n_mid + 1)
    ivals = [(-hi, -lo) for lo, hi in band[::-1]] + list(zip(mid[:-1], mid[1:])) + band
    central = [k for k, (lo, hi) in enumerate(ivals) if lo >= -a - 1e-15 and hi <= a + 1e-15]
    pts1, wts1, tag = [], [], []
    for k, (lo, hi) in enumerate(ivals):
        h = 0.5 * (hi - lo)
        pts1.append(0.5 * (hi + lo) + h * gx)
        wts1.append(h * gw)
        tag.append(np.full(order, k in central))
    x, wx, cx = np.concatenate(pts1), np.concatenate(wts1), np.concatenate(tag)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(wx, wx)
    keep = ~np.outer(cx, cx)  # grad F vanishes on the central block
    out = (np.column_stack([X[keep], Y[keep]]), W[keep])
    _TEMPLATES[key] = out
    return out


def quadrature_points(w: WhitneyDecomposition, order: int = 8, n_mid: int = 4, idx=None):
    """Composite Gauss rule for grad F on each cube, skipping the central
    block where F is constant: (points, weights, owner)."""
    idx = np.arange(len(w)) if idx is None else np.asarray(idx, dtype=int)
    deg = np.diff(w.adj_ptr)
    src = np.repeat(np.arange(len(w)), deg)
    rmax = np.zeros(len(w))
    np.maximum.at(rmax, src, w.radius[w.adj_idx])
    ratio = np.where(deg > 0, rmax / w.radius, 0.5)[idx]
    n_reach = np.clip(np.round(np.log2(ratio)).astype(int) + 2, 1, len(_REACH))
    P, wt, owner = [], [], []
    for m in np.unique(n_reach):
        sel = idx[n_reach == m]
        off, W = _template(int(m), order, n_mid)
        P.append((w.center[sel][:, None, :] + w.radius[sel][:, None, None] * off[None]).reshape(-1, 2))
        wt.append(((w.radius[sel] ** 2)[:, None] * W[None]).ravel())
        owner.append(np.repeat(sel, len(W)))
    if not P:
        return np.zeros((0, 2)), np.zeros(0), np.zeros(0, dtype=int)
    P, wt, owner = np.concatenate(P), np.concatenate(wt), np.concatenate(owner)
    order_ = np.argsort(owner, kind="stable")
    return P[order_], wt[order_], owner[order_]


def seminorm_quadrature(ef: ExtensionField, p: float, order: int = 8) -> float:
    """Integral of |grad F|^p over the covered domain (Euclidean gradient norm)."""
    if p <= 2:
        raise ValueError("p must exceed the dimension 2")
    w = ef.w
    # F is exactly c_Q on Q when every touching cube carries the same coefficient
    E = w.edges()
    live = np.zeros(len(w), dtype=bool)
    live[E[ef.coeffs[E[:, 0]] != ef.coeffs[E[:, 1]]].ravel()] = True
    if not live.any():
        return 0.0
    P, wt, _ = quadrature_points(w, order, idx=np.nonzero(live)[0])
    g = ef.gradient(P)
    return float(math.fsum(wt * np.hypot(g[:, 0], g[:, 1]) ** p))


def seminorm_vbound(ef: ExtensionField, p: float) -> float:
    """Sum over touching pairs of |c_Q - c_K|^p (diam Q + diam K)^(2-p)."""
    if p <= 2:
        raise ValueError("p must exceed the dimension 2")
    E = ef.w.edges()
    dc = np.abs(ef.coeffs[E[:, 0]] - ef.coeffs[E[:, 1]])
    dd = ef.w.diam[E[:, 0]] + ef.w.diam[E[:, 1]]
    return float(np.sum(dc ** p * dd ** (2.0 - p)))


def field_csv(ef: ExtensionField, n: int = 64) -> str:
    """Samples (x, y, F, dF/dx, dF/dy) on an n x n grid, covered points only."""
    d = ef.w.domain
    g0 = np.asarray(d.origin, dtype=float)
    t = (np.arange(n) + 0.5) / n * d.side
    X, Y = np.meshgrid(g0[0] + t, g0[1] + t, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel()])
    P = P[ef.w.locate(P) >= 0]
    v = ef.evaluate(P) if len(P) else np.zeros(0)
    g = ef.gradient(P) if len(P) else np.zeros((0, 2))
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["x", "y", "F", "dFdx", "dFdy"])
    for row in zip(P[:, 0], P[:, 1], v, g[:, 0], g[:, 1]):
        wr.writerow([f"{x:.12g}" for x in row])
    return buf.getvalue()
