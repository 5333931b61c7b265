"""Command line entry point: ``plunge <subcommand> [--config FILE] [flags]``.

Every subcommand accepts ``--config`` pointing at a JSON document; its keys
use the long flag names (dashes or underscores) and explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bounds, frames, geometry as geo, harness, report, spectrum
from .operator import assemble, write_matrix_csv

log = logging.getLogger("plunge")


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _merge(args, parser):
    """Fill flags still at their defaults from the JSON config."""
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    scoped = isinstance(cfg.get(args.command), dict)
    section = cfg[args.command] if scoped else cfg
    for key, value in section.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest) or dest in ("command", "func"):
            if scoped:
                raise SystemExit(f"unknown config key {key!r} for {args.command}")
            continue
        if getattr(args, dest) == parser.get_default(dest):
            setattr(args, dest, value)
    return args


def _out(args):
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ----------------------------------------------------------------------------

def cmd_geometry(args):
    dom = harness.parse_domain(args.domain)
    omega = geo.discretize(dom, args.L)
    bnd = geo.discrete_boundary(omega)
    out = {"domain": args.domain, "L": args.L, "n_omega": len(omega), "n_boundary": len(bnd),
           "volume": dom.volume, "boundary": dom.boundary}
    if len(bnd) and not args.skip_regularity:
        rep = geo.discrete_ahlfors(bnd)
        out.update(kappa_omega=rep.kappa, eta_omega=rep.eta, argmin=rep.argmin)
    if dom.dim >= 2 and not args.skip_regularity:
        b, k = harness.regularity(dom)
        out.update(boundary_estimate=b, kappa_continuous=k)
    out.update(lattice_count=geo.lattice_count_check(dom, args.L, kappa=out.get("kappa_continuous")))
    return out


def cmd_spectrum(args):
    E, F = harness.parse_domain(args.E), harness.parse_domain(args.F)
    omega = geo.discretize(E, args.L)
    M = assemble(omega, F, mode=args.mode, cap=args.cap)
    s = spectrum.eigenvalues(M, {"E": args.E, "F": args.F})
    eps = _floats(args.eps)
    summary = spectrum.summary_dict(s, eps)
    ok, _ = spectrum.theorem_checks(s, tuple(eps))
    summary["exact_checks"] = ok
    if args.out:
        d = _out(args)
        spectrum.write_spectrum_csv(s, d / "spectrum.csv")
        report.write_json(summary, d / "summary.json")
        report.plot_spectrum(s, d / "spectrum.png", eps=eps[-1])
        if args.matrix:
            write_matrix_csv(M, d / "matrix.csv")
    return summary


def cmd_sweep(args):
    data = {"E": args.E, "F": args.F, "L": _floats(args.L), "r": _floats(args.r),
            "eps": _floats(args.eps), "alpha": args.alpha, "workers": args.workers,
            "cap_omega": args.cap_omega, "seed": args.seed}
    if not data["E"] or not data["F"]:
        raise SystemExit("sweep needs at least one --E and one --F")
    cfg = harness.SweepConfig.from_dict(data)
    d = _out(args)
    cfg.output = str(d / "sweep.csv")
    records = harness.run_sweep(cfg)
    report.write_json(harness.records_json(records), d / "sweep.json")
    good = [r for r in records if not r.error and r.plunge_count > 0]
    fit = None
    xs = sorted({r.r for r in good})
    if len(xs) >= 4:
        sel = [r for r in good if r.eps == min(cfg.eps)]
        try:
            fit = bounds.fit_scaling([r.r for r in sel], [r.plunge_count for r in sel], "power-law")
        except ValueError as exc:
            log.warning("no scaling fit: %s", exc)
    report.plot_scaling(records, d / "sweep.png", fit=fit)
    return {"records": len(records), "errors": sum(bool(r.error) for r in records),
            "csv": cfg.output, "fit": fit}


def cmd_frame(args):
    win = frames.Window(args.alpha, args.knob)
    W = _floats(args.W)
    p = frames.partition(W, args.delta, args.L)
    tests = frames.random_trig_polynomials(args.n_tests, W, seed=args.seed)
    resid = frames.tight_frame_residual(p, win, tests)
    E = harness.parse_domain(args.E)
    omega = geo.discretize(E, args.L)
    s = args.s
    if s is None:
        s = frames.ps_shape(args.ps_constant, args.eps, args.alpha, E.boundary, d=E.dim)
    cls = frames.classify(p, omega, s)
    out = {"window_fit": win.fit, "frame_residual": resid, "s": s, "gamma_counts": cls.counts,
           "lj_inclusion": cls.lj_inclusion, "energy": frames.energy_sums(cls, win)}
    if E.dim == 1 or args.certificate:
        out["certificate"] = frames.israel_certificate(omega, W, args.L, s, args.delta, args.eps, window=win)
    if args.out:
        report.write_json(out, _out(args) / "frame.json")
    return out


def cmd_bound(args):
    b = bounds.BoundInputs(args.variant, args.d, args.bE, args.kE, args.eps, args.bF, args.kF,
                           args.alpha, args.A, args.W_max, args.eta)
    flags = bounds.hypotheses(b)
    value = bounds.theorem_rhs(b, enforce=False) if all(flags.values()) or args.force else None
    return {"inputs": bounds.inputs_dict(b), "hypotheses": flags, "value": value}


def cmd_fit(args):
    records = [r for r in harness.read_records(args.csv) if not r.error]
    if args.model == "plunge-vs-bound-ratio":
        sel = [r for r in records if np.isfinite(getattr(r, args.bound_column))]
        res = bounds.fit_scaling([0] * len(sel), [r.plunge_count for r in sel], args.model,
                                 bound=[getattr(r, args.bound_column) for r in sel])
        if args.save:
            bounds.save_constants({"A_fit": res["A"], "A_fit_column": args.bound_column})
    else:
        eps = args.eps if args.eps is not None else min(r.eps for r in records)
        sel = [r for r in records if r.eps == eps]
        res = bounds.fit_scaling([getattr(r, args.x) for r in sel], [r.plunge_count for r in sel], args.model)
        res["eps"] = eps
    return res


def cmd_converge(args):
    study = harness.convergence_study(args.E, args.F, _floats(args.L), k=args.k)
    if args.out:
        d = _out(args)
        report.write_json(study, d / "convergence.json")
        report.plot_convergence(study, d / "convergence.png")
    return study


# ----------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="plunge", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, helptext):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON config file")
        p.set_defaults(func=fn)
        return p

    p = add("geometry", cmd_geometry, "lattice set, boundary and regularity of a domain")
    p.add_argument("--domain", default="disk(2)")
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--skip-regularity", action="store_true")

    p = add("spectrum", cmd_spectrum, "eigenvalues of one concentration matrix")
    p.add_argument("--E", default="disk(2)", help="frequency set")
    p.add_argument("--F", default="square(1)", help="spatial set")
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--eps", default="0.01,0.1,0.25")
    p.add_argument("--mode", default="auto", choices=["auto", "exact", "rasterized"])
    p.add_argument("--cap", type=int, default=6000)
    p.add_argument("--matrix", action="store_true", help="also write the matrix as CSV")
    p.add_argument("--out")

    p = add("sweep", cmd_sweep, "parameter sweep with CSV/JSON output and a figure")
    p.add_argument("--E", action="append")
    p.add_argument("--F", action="append")
    p.add_argument("--L", default="4")
    p.add_argument("--r", default="1")
    p.add_argument("--eps", default="0.01,0.1,0.25")
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--cap-omega", type=int, default=20000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sweep_out")

    p = add("frame", cmd_frame, "frame residual, index classes and the counting certificate")
    p.add_argument("--E", default="interval(8)")
    p.add_argument("--W", default="4")
    p.add_argument("--L", type=float, default=32.0)
    p.add_argument("--s", type=float)
    p.add_argument("--ps-constant", type=float, default=2.1)
    p.add_argument("--delta", type=float, default=0.001)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--knob", type=float, default=0.1)
    p.add_argument("--n-tests", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--certificate", action="store_true", help="also run the certificate in d >= 2")
    p.add_argument("--out")

    p = add("bound", cmd_bound, "evaluate a bound right-hand side")
    p.add_argument("--variant", default="th3", choices=list(bounds.VARIANTS))
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--bE", type=float, default=8.0)
    p.add_argument("--kE", type=float, default=0.5)
    p.add_argument("--bF", type=float, default=4.0)
    p.add_argument("--kF", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--A", type=float, default=1.0)
    p.add_argument("--W-max", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--force", action="store_true", help="evaluate even when hypotheses fail")

    p = add("fit", cmd_fit, "fit scaling laws or the domination constant from a sweep CSV")
    p.add_argument("--csv", required=False, default="sweep_out/sweep.csv")
    p.add_argument("--model", default="power-law", choices=["power-law", "log-linear", "plunge-vs-bound-ratio"])
    p.add_argument("--x", default="r")
    p.add_argument("--eps", type=float)
    p.add_argument("--bound-column", default="rhs_th3")
    p.add_argument("--save", action="store_true", help="persist the fitted constant")

    p = add("converge", cmd_converge, "top eigenvalues along increasing resolution")
    p.add_argument("--E", default="interval(4)")
    p.add_argument("--F", default="interval(0.5)")
    p.add_argument("--L", default="8,16,32,64")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out")
    return ap


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    _merge(args, sub)
    try:
        result = args.func(args)
    except (ValueError, KeyError, bounds.HypothesisError) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 2
    print(json.dumps(report._plain(result), indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
