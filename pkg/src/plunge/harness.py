"""Domain catalog, parameter sweeps, and the resolution-convergence study."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import re
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, fields
from datetime import datetime, timezone

import numpy as np

from . import geometry as geo
from .bounds import BoundInputs, theorem_rhs, hypotheses, fit_scaling
from .operator import assemble, DEFAULT_CAP
from .spectrum import (eigenvalues, plunge_count, distribution_count, transition_check,
                       deviation_check, theorem_checks, padded)

log = logging.getLogger(__name__)

__all__ = ["catalog", "parse_domain", "SweepConfig", "SweepRecord", "run_sweep", "write_records",
           "read_records", "convergence_study", "interleaving_check", "CSV_VERSION", "COLUMNS",
           "regularity", "SweepError", "CATALOG_SWEEP", "catalog_sweep",
           "lattice_ratios", "frame_ratios", "fit_constants"]

CSV_VERSION = 1


class SweepError(ValueError):
    pass


# ----------------------------------------------------------------------------
# catalog and mini-language

def _two_disks(r=1.0, sep=3.0):
    if sep <= 2 * r:
        raise ValueError("two disks need sep > 2r")
    return geo.union(geo.shift(geo.ball(r, 2), (-sep / 2, 0.0)), geo.shift(geo.ball(r, 2), (sep / 2, 0.0)))


def _two_squares(w=1.0, sep=2.0):
    if sep <= w:
        raise ValueError("two squares need sep > w")
    return geo.union(geo.shift(geo.box(w, w), (-sep / 2, 0.0)), geo.shift(geo.box(w, w), (sep / 2, 0.0)))


def _box(*w):
    if not w or any(x <= 0 for x in w):
        raise ValueError("box widths must be positive")
    return geo.box(*w)


def _interval(a, b=None):
    """interval(a) = [-a, a];  interval(a, b) = [a, b]."""
    lo, hi = (-a, a) if b is None else (a, b)
    if hi <= lo:
        raise ValueError("interval needs lo < hi")
    return geo.Box([lo], [hi])


_CATALOG = {
    "box": _box,
    "square": lambda w=1.0: _box(w, w),
    "interval": _interval,
    "ball": lambda r=1.0, dim=2: geo.ball(r, int(dim)),
    "disk": lambda r=1.0: geo.ball(r, 2),
    "annulus": lambda r0=0.5, r1=1.0: geo.annulus(r0, r1, 2),
    "squareminusdisk": lambda w=4.0, r=1.0: geo.box_minus_ball(w, r, 2),
    "boxminusball": lambda w=4.0, r=1.0, dim=2: geo.box_minus_ball(w, r, int(dim)),
    "lshape": lambda w=2.0, notch=1.0: geo.lshape(w, notch),
    "twodisks": _two_disks,
    "twosquares": _two_squares,
}


def catalog(name: str, *params, **kw) -> geo.ContinuousDomain:
    key = name.lower().replace("_", "").replace("-", "")
    if key not in _CATALOG:
        raise KeyError(f"unknown domain {name!r}; known: {', '.join(sorted(_CATALOG))}")
    return _CATALOG[key](*params, **kw)


def _split_top(text, sep):
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return [s.strip() for s in out]


_CALL = re.compile(r"^\s*([A-Za-z_][\w-]*)\s*(?:\((.*)\))?\s*$", re.S)


def _numbers(text):
    return [float(t) for t in _split_top(text, ",") if t]


def parse_domain(text: str) -> geo.ContinuousDomain:
    """Parse a domain expression.

    Catalog entries take numbers: ``disk(2)``, ``box(1,3)``, ``lshape(4,1)``.
    Combinators take sub-expressions separated by ``;``:
    ``union(disk(1); shift(disk(1); 3, 0))``, ``dilate(square(1); 2)``.
    """
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse domain {text!r}")
    name, args = m.group(1).lower(), (m.group(2) or "")
    if name == "union":
        parts = [parse_domain(p) for p in _split_top(args, ";")]
        if len(parts) < 2:
            raise ValueError("union needs at least two parts")
        return geo.union(*parts)
    if name in ("dilate", "shift"):
        pieces = _split_top(args, ";")
        if len(pieces) != 2:
            raise ValueError(f"{name} takes 'domain; numbers'")
        base, nums = parse_domain(pieces[0]), _numbers(pieces[1])
        if name == "dilate":
            if len(nums) != 1 or nums[0] <= 0:
                raise ValueError("dilate needs one positive factor")
            return geo.dilate(base, nums[0])
        if len(nums) != base.dim:
            raise ValueError("shift vector has the wrong dimension")
        return geo.shift(base, nums)
    return catalog(name, *_numbers(args))


# ----------------------------------------------------------------------------
# sweeps

@dataclass
class SweepConfig:
    E: list
    F: list
    L: list
    r: list = field(default_factory=lambda: [1.0])
    eps: list = field(default_factory=lambda: [0.01, 0.1, 0.25])
    alpha: float = 0.25
    cap_omega: int = 20000
    cap_matrix: int = DEFAULT_CAP
    mode: str = "auto"
    seed: int = 0
    workers: int = 1
    output: str | None = None

    def validate(self):
        for name in ("E", "F", "L", "r", "eps"):
            if not getattr(self, name):
                raise SweepError(f"config list {name!r} is empty")
        if self.cap_omega <= 0 or self.cap_matrix <= 0:
            raise SweepError("caps must be positive")
        if not 0 < self.alpha < 0.5:
            raise SweepError("alpha must lie in (0, 1/2)")
        for e in self.eps:
            if not 0 < e < 0.5:
                raise SweepError(f"eps {e} outside (0, 1/2)")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise SweepError(f"unknown config keys: {sorted(extra)}")
        d = dict(data)
        for k in ("E", "F", "L", "r", "eps"):
            if k in d and not isinstance(d[k], list):
                d[k] = [d[k]]
        return cls(**d)

    def combinations(self):
        seen, out = set(), []
        for combo in itertools.product(self.E, self.F, self.L, self.r):
            key = (combo[0], combo[1], float(combo[2]), float(combo[3]))
            if key in seen:
                warnings.warn(f"duplicate sweep combination {key} dropped")
                continue
            seen.add(key)
            out.append(key)
        return out


@dataclass
class SweepRecord:
    E: str
    F: str
    L: float
    r: float
    eps: float
    n_omega: int = 0
    n_boundary: int = 0
    kappa_omega: float = float("nan")
    boundary_F: float = float("nan")
    kappa_F: float = float("nan")
    boundary_E: float = float("nan")
    kappa_E: float = float("nan")
    trace: float = float("nan")
    trace_residual: float = float("nan")
    plunge_count: int = -1
    n_eps: int = -1
    deviation: float = float("nan")
    transition_upper: bool = False
    transition_lower: bool = False
    schatten_ok: bool = False
    deviation_ok: bool = False
    rhs_th3: float = float("nan")
    rhs_th1: float = float("nan")
    seconds: float = 0.0
    error: str = ""


COLUMNS = [f.name for f in fields(SweepRecord)]


def regularity(domain: geo.ContinuousDomain):
    """(boundary measure, regularity constant) of a continuous domain."""
    if domain.dim == 1:
        # finitely many endpoints: counting measure, and every ball around an endpoint contains it
        return float(domain.boundary), 1.0
    res = min(0.05, float(np.min(domain.hi - domain.lo)) / 16)
    rep = geo.continuous_ahlfors_estimate(domain, res)
    return float(geo.boundary_measure(domain, res)), float(rep.kappa)


def _evaluate(cfg: SweepConfig, key):
    e_spec, f_spec, L, r = key
    rows = []
    t0 = time.perf_counter()
    base = [SweepRecord(e_spec, f_spec, L, r, eps) for eps in cfg.eps]
    try:
        E = geo.dilate(parse_domain(e_spec), r) if r != 1 else parse_domain(e_spec)
        F = parse_domain(f_spec)
        if E.dim != F.dim:
            raise SweepError("E and F dimensions differ")
        omega = geo.discretize(E, L)
        if len(omega) == 0:
            raise SweepError("empty lattice set")
        if len(omega) > cfg.cap_omega:
            raise SweepError(f"#Omega={len(omega)} exceeds cap {cfg.cap_omega}")
        M = assemble(omega, F, mode=cfg.mode, cap=cfg.cap_matrix)
        spec = eigenvalues(M, {"E": e_spec, "F": f_spec, "r": r})
        ok, details = theorem_checks(spec, eps_list=tuple(cfg.eps))
        if not ok:
            raise AssertionError(f"exact inequality violated for {key}: {details}")
        bnd = geo.discrete_boundary(omega)
        kap = geo.discrete_ahlfors(bnd).kappa if len(bnd) else float("nan")
        bF, kF = regularity(F)
        bE, kE = regularity(E)
        tc = details["transition"]
        d = E.dim
        for rec in base:
            rec.n_omega, rec.n_boundary, rec.kappa_omega = len(omega), len(bnd), float(kap)
            rec.boundary_F, rec.kappa_F = bF, kF
            rec.boundary_E, rec.kappa_E = bE, kE
            rec.trace, rec.trace_residual = spec.trace, spec.trace_residual
            rec.plunge_count = plunge_count(spec, rec.eps)
            rec.n_eps = distribution_count(spec, rec.eps)
            dv = deviation_check(spec, rec.eps)
            rec.deviation, rec.deviation_ok = float(dv["deviation"]), dv["holds"]
            rec.transition_upper, rec.transition_lower = tc["upper_ok"], tc["lower_ok"]
            rec.schatten_ok = all(v["holds"] for e, p, v in details["schatten"] if e == rec.eps)
            # the discrete bound lives at unit resolution: rescale F by 1/L
            b3 = BoundInputs("th3", d, len(bnd), kap, rec.eps, bF / L ** (d - 1), kF, cfg.alpha)
            if all(hypotheses(b3).values()):
                rec.rhs_th3 = theorem_rhs(b3)
            b1 = BoundInputs("th1", d, bE, kE, rec.eps, bF, kF, cfg.alpha)
            if all(hypotheses(b1).values()):
                rec.rhs_th1 = theorem_rhs(b1)
    except AssertionError:
        raise
    except Exception as exc:   # failures are data
        for rec in base:
            rec.error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    dt = time.perf_counter() - t0
    for rec in base:
        rec.seconds = dt
        rows.append(rec)
    return rows


def _canonical(rec: SweepRecord):
    return (rec.E, rec.F, rec.L, rec.r, rec.eps)


def run_sweep(cfg: SweepConfig):
    cfg.validate()
    combos = cfg.combinations()
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(_evaluate, [cfg] * len(combos), combos))
    else:
        chunks = [_evaluate(cfg, c) for c in combos]
    records = sorted((r for ch in chunks for r in ch), key=_canonical)
    if cfg.output:
        write_records(records, cfg.output)
    return records


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records(records, path, timestamp: bool = True):
    with open(path, "w", newline="") as fh:
        fh.write(f"# plunge-sweep v{CSV_VERSION}\n")
        if timestamp:
            fh.write(f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
    return path


def read_records(path):
    types = {f.name: f.type for f in fields(SweepRecord)}
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for row in csv.DictReader(io.StringIO("".join(lines))):
        kw = {}
        for k, v in row.items():
            t = types[k]
            if t in ("int", int):
                kw[k] = int(v)
            elif t in ("float", float):
                kw[k] = float(v)
            elif t in ("bool", bool):
                kw[k] = v == "1"
            else:
                kw[k] = v
        out.append(SweepRecord(**kw))
    return out


def records_json(records):
    return [asdict(r) for r in records]


# ----------------------------------------------------------------------------
# convergence and interleaving

def convergence_study(E, F, L_list, k: int = 10, cap: int = DEFAULT_CAP):
    """Top-k eigenvalues of assemble(discretize(E, L), F) along increasing L."""
    L_list = [float(x) for x in L_list]
    if any(b <= a for a, b in zip(L_list, L_list[1:])):
        raise ValueError("L_list must be increasing")
    E = parse_domain(E) if isinstance(E, str) else E
    F = parse_domain(F) if isinstance(F, str) else F
    table = []
    for L in L_list:
        spec = eigenvalues(assemble(geo.discretize(E, L), F, cap=cap))
        table.append(padded(spec, k))
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(table, table[1:])]
    out = {"L": L_list, "top": [t.tolist() for t in table], "diffs": diffs,
           "monotone": all(b < a for a, b in zip(diffs, diffs[1:]))}
    if len(diffs) >= 2 and all(x > 0 for x in diffs):
        x = np.log(np.asarray(L_list[1:]))
        slope, icpt = np.polyfit(x, np.log(diffs), 1)
        out["rate"] = {"exponent": float(slope), "C": float(math.exp(icpt))}
    return out


def interleaving_check(omega: geo.GridSet, F: geo.ContinuousDomain, tol: float = 1e-8, h: float = 1 / 16):
    """lambda_n(T_{F-}) <= lambda_n(T_F) <= lambda_n(T_{F+}) for the dyadic sandwich of F."""
    cover = geo.dyadic_approximations(F, omega.L, h)
    lam = eigenvalues(assemble(omega, F)).eigenvalues
    inner = (eigenvalues(assemble(omega, cover.inner)).eigenvalues
             if cover.inner is not None else np.zeros_like(lam))
    outer = eigenvalues(assemble(omega, cover.outer)).eigenvalues
    lo_ok = bool(np.all(inner <= lam + tol))
    hi_ok = bool(np.all(lam <= outer + tol))
    return {"inner_ok": lo_ok, "outer_ok": hi_ok, "holds": lo_ok and hi_ok,
            "gap_inner": float(np.max(inner - lam)), "gap_outer": float(np.max(lam - outer))}


def load_config(path):
    with open(path) as fh:
        return SweepConfig.from_dict(json.load(fh))


# the catalog sweep behind the single-constant domination check
CATALOG_SWEEP = {
    "E": ["disk(1)", "square(2)", "annulus(0.5,1)", "lshape(2,1)", "squareminusdisk(2,0.5)",
          "twodisks(0.5,1.5)", "twosquares(1,2)"],
    "F": ["square(1)", "squareminusdisk(1.5,0.4)", "twosquares(0.6,1.4)", "disk(0.6)"],
    "L": [4.0],
    "r": [1.0, 2.0],
    "eps": [0.01, 0.1, 0.25],
}


def catalog_sweep(**overrides):
    data = dict(CATALOG_SWEEP)
    data.update(overrides)
    return run_sweep(SweepConfig.from_dict(data))


# ----------------------------------------------------------------------------
# fitted constants

LATTICE_DOMAINS = ["square(1)", "disk(1)", "disk(3)", "lshape(2,1)", "squareminusdisk(2,0.5)",
                   "annulus(0.5,1)", "twodisks(0.5,1.5)", "interval(1)", "box(1,3)"]
FRAME_CASES = [
    # (E, W, L, delta, s values)
    ("interval(8)", (4.0,), 32.0, 0.05, (2.0, 4.0, 6.0)),
    ("interval(6)", (2.0,), 16.0, 0.05, (2.0, 4.0)),
    ("union(interval(-6,-2); interval(1,5))", (4.0,), 16.0, 0.05, (2.0, 4.0)),
    ("disk(2)", (1.0, 1.0), 4.0, 0.1, (1.5, 3.0)),
    ("square(3)", (2.0, 1.0), 4.0, 0.1, (1.5, 3.0)),
]


def lattice_ratios(domains=LATTICE_DOMAINS, L_list=(2.0, 4.0, 8.0, 16.0)):
    """|L^-d #E_L - |E|| L / |dE| for each catalog domain and resolution."""
    out = []
    for spec in domains:
        dom = parse_domain(spec)
        for L in L_list:
            n = len(geo.discretize(dom, L))
            out.append((spec, L, abs(n / L ** dom.dim - dom.volume) * L / dom.boundary))
    return out


def frame_ratios(cases=FRAME_CASES):
    """Medium-index counts against their shapes, per j and in total."""
    from . import frames
    out = []
    for spec, W, L, delta, s_list in cases:
        dom = parse_domain(spec)
        omega = geo.discretize(dom, L)
        b, k = regularity(dom)
        d = dom.dim
        p = frames.partition(W, delta, L)
        for s in s_list:
            cls = frames.classify(p, omega, s)
            per_j = max(len(v) for v in cls.med.values())
            lead = max(max(W), 1.0) ** (d - 1) * b / k
            out.append({"E": spec, "s": s, "per_j": per_j / (lead * s ** d),
                        "gamma": cls.counts["med"] / frames.gamma_med_shape(max(W), b, k, delta, s, d),
                        "lj_inclusion": cls.lj_inclusion})
    return out


def fit_constants(records=None):
    """All fitted constants; ``records`` is the catalog sweep (run when omitted)."""
    records = catalog_sweep() if records is None else records
    ratios = [r.plunge_count / r.rhs_th3 for r in records if not r.error and np.isfinite(r.rhs_th3)]
    fr = frame_ratios()
    return {
        "A_fit": max(ratios),
        "A_fit_column": "rhs_th3",
        "A_fit_records": len(ratios),
        "lattice_C": max(x[2] for x in lattice_ratios()),
        "med_per_j_C": max(x["per_j"] for x in fr),
        "gamma_med_C": max(x["gamma"] for x in fr),
    }
