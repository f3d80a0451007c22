"""Command-line driver: subhyp <command> [options].

Exit codes: 0 ok, 1 a verification check failed, 2 input error,
3 resolution error, 4 boundary-data rule error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import alpha_boundary as ab_mod
from . import criteria, extension, metrics
from .geometry import DomainError, gallery_names, load_domain
from .whitney import ResolutionError, adjacency_csv, build_whitney, cubes_json, verify_whitney

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_RESOLUTION, EXIT_RULE = 0, 1, 2, 3, 4

DATA_NAMES = {"linear": extension.linear_datum, "slit": extension.slit_datum,
              "bump": extension.bump_datum, "cusp": extension.cusp_datum}


@dataclass
class RunConfig:
    command: str
    domain: Optional[str] = None
    gallery: Optional[str] = None
    depth: int = 8
    alpha: Optional[float] = None
    p: Optional[float] = None
    q: Optional[float] = None
    n: int = 2
    eta: Optional[float] = None
    epsilon: Optional[float] = None
    theta: float = criteria.THETA
    sigma: float = math.inf
    b_c: float = 0.0
    pairs: Optional[str] = None
    f: Optional[str] = None
    out: str = "out"
    seed: int = 0
    format: str = "json"
    extra: dict = field(default_factory=dict)

    def alpha_value(self, default: float = 0.5) -> float:
        if self.alpha is not None:
            return metrics.check_alpha(self.alpha)
        if self.p is not None:
            return metrics.alpha_from_exponent(self.p, self.n)
        return default


class InputError(ValueError):
    pass


def _dump(obj) -> str:
    return json.dumps(_clean(obj), indent=1, sort_keys=True) + "\n"


def _clean(o):
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        v = float(o)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return o


def _write(cfg: RunConfig, name: str, text: str) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, name)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _domain(cfg: RunConfig):
    src = cfg.domain or cfg.gallery
    if not src:
        raise InputError("give --domain FILE or --gallery NAME")
    if cfg.gallery and cfg.gallery.split(":")[0] not in gallery_names():
        raise InputError(f"unknown gallery domain {cfg.gallery!r}")
    return load_domain(src)


def _datum(cfg: RunConfig):
    spec = cfg.f or "linear"
    if spec in DATA_NAMES:
        return DATA_NAMES[spec]()
    if spec.startswith("const:"):
        return extension.constant_datum(float(spec.split(":", 1)[1]))
    try:
        with open(spec) as fh:
            text = fh.read()
    except OSError:
        raise InputError(f"cannot read boundary function {spec!r}")
    try:
        return extension.BoundaryFunction.from_json(text)
    except (ValueError, json.JSONDecodeError) as e:
        raise InputError(f"bad boundary function: {e}")


# ---------------------------------------------------------------------------
# commands


def cmd_whitney(cfg: RunConfig) -> int:
    d = _domain(cfg)
    w = build_whitney(d, cfg.depth)
    rep = verify_whitney(w)
    _write(cfg, "cubes.json", cubes_json(w))
    _write(cfg, "adjacency.csv", adjacency_csv(w))
    _write(cfg, "verify.json", _dump(rep))
    print(f"{d.name}: {len(w)} cubes, depth {cfg.depth}, verify {'passed' if rep['pass'] else 'FAILED'}")
    return EXIT_OK if rep["pass"] else EXIT_CHECK


def cmd_metric(cfg: RunConfig) -> int:
    d = _domain(cfg)
    if not cfg.pairs:
        raise InputError("metric needs --pairs FILE (rows x1,y1,x2,y2,alpha)")
    try:
        with open(cfg.pairs) as fh:
            text = fh.read()
    except OSError:
        raise InputError(f"cannot read pairs file {cfg.pairs!r}")
    w = build_whitney(d, cfg.depth)
    if cfg.alpha is not None or cfg.p is not None:
        a = cfg.alpha_value()
        rows = []
        for r in csv.reader(io.StringIO(text)):
            if r and r[0].strip().lower() not in ("x1", "x"):
                rows.append(r[:4] + [repr(a)])
        text = "\n".join(",".join(r) for r in rows)
    out = metrics.batch_csv(d, w, text)
    _write(cfg, "metric.csv", out)
    if cfg.format == "csv":
        sys.stdout.write(out)
    else:
        print(f"{d.name}: {out.count(chr(10)) - 1} pairs written to metric.csv")
    return EXIT_OK


def cmd_boundary(cfg: RunConfig) -> int:
    d = _domain(cfg)
    w = build_whitney(d, cfg.depth)
    a = cfg.alpha_value()
    samples = cfg.extra.get("samples")
    ab = ab_mod.build_alpha_boundary(d, w, a, samples=samples)
    text = ab.export_json()
    _write(cfg, "boundary.json", text)
    counts = ab.counts()
    agg = sum(1 for c in counts if c > 1)
    print(f"{d.name}: alpha={a:.6g}, {len(ab.sample_set)} samples, {len(ab.elements)} elements, "
          f"{agg} agglutinated samples, {len(ab.inaccessible)} inaccessible samples")
    return EXIT_OK


def cmd_extend(cfg: RunConfig) -> int:
    d = _domain(cfg)
    f = _datum(cfg)
    w = build_whitney(d, cfg.depth)
    ef = extension.build_extension(f, w, None, cfg.sigma, cfg.b_c)
    p = cfg.p if cfg.p is not None else 4.0
    rep = {"domain": d.name, "depth": cfg.depth, "sigma": cfg.sigma, "b_c": cfg.b_c, "p": p,
           "n_cubes": len(w), "coeff_min": float(ef.coeffs.min()), "coeff_max": float(ef.coeffs.max()),
           "seminorm_quadrature": extension.seminorm_quadrature(ef, p),
           "seminorm_vbound": extension.seminorm_vbound(ef, p), "datum": f.to_json()}
    _write(cfg, "extension.json", _dump(rep))
    _write(cfg, "field.csv", extension.field_csv(ef))
    print(f"{d.name}: extension over {len(w)} cubes, |grad F|_p^p = {rep['seminorm_quadrature']:.6g}")
    return EXIT_OK


def cmd_tracenorm(cfg: RunConfig) -> int:
    d = _domain(cfg)
    f = _datum(cfg)
    w = build_whitney(d, cfg.depth)
    p = cfg.p if cfg.p is not None else 4.0
    q = cfg.q if cfg.q is not None else (2.0 + p) / 2.0
    collar = cfg.epsilon is not None
    eta = cfg.eta if cfg.eta is not None else (22 * cfg.theta ** 2 if collar else criteria.ETA_L1P)
    rep = criteria.variational_lambda(f, w, None, p, eta, cfg.epsilon)
    sm = criteria.sharp_maximal(f, w, q=q, p=p, seed=cfg.seed, collar_epsilon=cfg.epsilon)
    out = {"lambda": rep.lambda_est, "lambda_root_p": rep.lambda_root_p, "eta": eta, "p": p,
           "depth": cfg.depth, "sharp_lp": sm.lp_norm,
           "per_cube_top": [{"cube": c, "pair": list(pr), "term": t} for c, pr, t in rep.top(10)]}
    if collar:
        cc = criteria.CollarConfig(cfg.epsilon, cfg.theta, eta)
        out["collar_lp"] = criteria.collar_lp_norm(f, w, None, cc, p)
        out["trace_norm"] = out["collar_lp"] ** (1 / p) + out["lambda_root_p"]
        out["sharp_lp_collar"] = sm.collar_lp_norm
    else:
        out["collar_lp"] = None
    if rep.warning:
        out["warning"] = rep.warning
    _write(cfg, "tracenorm.json", _dump(out))
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["cube", "x", "y", "diam", "term"])
    for c, _, t in sorted(rep.per_cube_terms):
        wr.writerow([c, repr(float(w.center[c, 0])), repr(float(w.center[c, 1])), repr(float(w.diam[c])), repr(t)])
    _write(cfg, "lambda_terms.csv", buf.getvalue())
    print(f"{d.name}: lambda = {rep.lambda_est:.6g} (lambda^(1/p) = {rep.lambda_root_p:.6g}), eta = {eta:g}")
    return EXIT_OK


def cmd_sharpmax(cfg: RunConfig) -> int:
    d = _domain(cfg)
    f = _datum(cfg)
    w = build_whitney(d, cfg.depth)
    p = cfg.p if cfg.p is not None else 4.0
    q = cfg.q if cfg.q is not None else (2.0 + p) / 2.0
    sm = criteria.sharp_maximal(f, w, q=q, p=p, seed=cfg.seed, collar_epsilon=cfg.epsilon)
    rep = {"p": p, "q": q, "alpha": sm.alpha, "beta": sm.beta, "depth": cfg.depth,
           "sharp_lp": sm.lp_norm, "sharp_lp_collar": sm.collar_lp_norm,
           "max": float(sm.values.max()), "empty_cubes": int(sm.empty.sum()),
           "radii": sm.radii}
    _write(cfg, "sharpmax.json", _dump(rep))
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["x", "y", "diam", "f_sharp"])
    for c, dm, v in zip(w.center, w.diam, sm.values):
        wr.writerow([repr(float(c[0])), repr(float(c[1])), repr(float(dm)), repr(float(v))])
    _write(cfg, "sharp_field.csv", buf.getvalue())
    print(f"{d.name}: |f#|_Lp = {sm.lp_norm:.6g}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    names = [cfg.gallery] if cfg.gallery else ([] if cfg.domain else gallery_names())
    doms = [load_domain(n) for n in names] if names else [_domain(cfg)]
    reports = []
    ok = True
    for d in doms:
        rep = criteria.lemma_suite(d, cfg.depth, cfg.seed)
        reports.append(rep)
        ok &= rep["pass"]
        failed = [k for k, v in rep.items() if isinstance(v, dict) and not v.get("pass", True)]
        print(f"{d.name}: {'all checks passed' if rep['pass'] else 'FAILED: ' + ', '.join(failed)}")
    _write(cfg, "verify.json", _dump(reports))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_gallery_list(cfg: RunConfig) -> int:
    for n in gallery_names():
        print(n)
    return EXIT_OK


COMMANDS = {"whitney": cmd_whitney, "metric": cmd_metric, "boundary": cmd_boundary,
            "extend": cmd_extend, "trace-norm": cmd_tracenorm, "sharpmax": cmd_sharpmax,
            "verify": cmd_verify, "gallery-list": cmd_gallery_list}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subhyp", description="Subhyperbolic geometry and trace norms of planar domains")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON file with option defaults (flags override)")
    ap.add_argument("--domain", help="domain JSON file")
    ap.add_argument("--gallery", help="built-in domain name, e.g. slit_square or comb_domain:4")
    ap.add_argument("--depth", type=int)
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--p", type=float)
    ap.add_argument("--q", type=float)
    ap.add_argument("--eta", type=float)
    ap.add_argument("--epsilon", type=float)
    ap.add_argument("--theta", type=float)
    ap.add_argument("--sigma", type=float)
    ap.add_argument("--pairs", help="CSV of x1,y1,x2,y2,alpha")
    ap.add_argument("--f", help="boundary function JSON, or one of linear, slit, bump, cusp, const:<c>")
    ap.add_argument("--out", help="output directory (default: out)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--format", choices=["json", "csv"])
    return ap


def make_config(args) -> RunConfig:
    base = {}
    if args.config:
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"bad config file: {e}")
        if not isinstance(base, dict):
            raise InputError("config file must hold a JSON object")
    cfg = RunConfig(args.command)
    known = set(RunConfig.__dataclass_fields__) - {"command", "extra"}
    for k, v in base.items():
        if k in known:
            setattr(cfg, k, v)
        else:
            cfg.extra[k] = v
    for k in known:
        v = getattr(args, k, None)
        if v is not None:
            setattr(cfg, k, v)
    if cfg.p is not None and cfg.p <= cfg.n:
        raise InputError(f"p must exceed n={cfg.n}")
    if cfg.q is not None and cfg.q <= cfg.n:
        raise InputError(f"q must exceed n={cfg.n}")
    if cfg.alpha is not None:
        metrics.check_alpha(cfg.alpha)
    if cfg.sigma is not None and not cfg.sigma > 0:
        raise InputError("sigma must be positive")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        return COMMANDS[cfg.command](cfg)
    except (InputError, DomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ResolutionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RESOLUTION
    except extension.RuleGapError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RULE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
