"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line (also collected in the terminal summary).
Tolerances are fixed by the acceptance list and never loosened here.
"""

import math
import time

import numpy as np
import pytest

from conftest import record, assert_exact
from plunge import frames, geometry as geo, harness
from plunge.bounds import fit_scaling, load_constants
from plunge.operator import assemble, nystrom_oracle
from plunge.spectrum import eigenvalues, theorem_checks


def test_c01_analytic_two_by_two():
    t0 = time.perf_counter()
    omega = geo.GridSet(1, 1.0, [[0], [1]])
    lam = eigenvalues(assemble(omega, geo.Box([-0.25], [0.25]))).eigenvalues
    dt = time.perf_counter() - t0
    err = float(np.max(np.abs(lam - [0.5 + 1 / math.pi, 0.5 - 1 / math.pi])))
    ok = err <= 1e-12 and dt < 1.0
    record(1, ok, f"max error {err:.2e}, {dt:.3f}s")
    assert ok


ORACLE_CASES = [
    # (Omega points or domain, L, F)
    ("pts1", [[0], [1]], 1.0, geo.Box([-0.25], [0.25])),
    ("pts1", [[0], [1], [2], [3], [4]], 2.0, geo.Box([-0.7], [0.7])),
    ("pts1", [[-3], [0], [1], [5], [8], [9]], 4.0, geo.Box([-1.5], [0.5])),
    ("dom", geo.box(6.0), 2.0, geo.Box([-0.5], [0.9])),
    ("dom", geo.box(3.0, 3.0), 1.0, geo.box(1.0, 1.0)),
    ("dom", geo.ball(1.0, 2), 2.0, geo.box(0.8, 0.6)),
    ("dom", geo.box(2.0, 2.0), 2.0, geo.Box([-0.3, -0.7], [0.6, 0.2])),
    ("dom", geo.lshape(2.0, 1.0), 2.0, geo.box(0.5, 0.5)),
    ("dom", geo.ball(1.2, 2), 2.0, geo.ball(0.7, 2)),
    ("dom", geo.box(2.0, 2.0), 2.0, geo.box_minus_ball(1.0, 0.3, 2)),
]


def _oracle_omega(kind, data, L, dim):
    if kind == "pts1":
        return geo.GridSet(1, L, data)
    return geo.discretize(data, L)


def test_c02_oracle_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for kind, data, L, F in ORACLE_CASES:
        omega = _oracle_omega(kind, data, L, F.dim)
        assert 0 < len(omega) <= 25 and F.dim <= 2
        spec = eigenvalues(assemble(omega, F))
        assert_exact(spec)
        n = 512 if F.dim == 1 else 64
        ref = nystrom_oracle(omega, F, n)[: len(omega)]
        ref = np.concatenate([ref, np.zeros(len(omega) - len(ref))])
        worst = max(worst, float(np.max(np.abs(spec.eigenvalues - ref))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-3 and dt < 120
    record(2, ok, f"10 configurations, worst eigenvalue gap {worst:.2e}, {dt:.1f}s")
    assert ok


def test_c03_exact_theorem_suite():
    # (a)-(c) over a spread of spectra; the catalog sweep enforces them on every record as well
    failures = 0
    count = 0
    cases = [(geo.ball(r, 2), 4.0, geo.box(1.0, 1.0)) for r in (1.0, 2.0, 3.0)]
    cases += [(geo.box(2 * a), 4.0, geo.box(1.0)) for a in (1.0, 4.0, 16.0)]
    cases += [(geo.box_minus_ball(3.0, 1.0, 2), 4.0, geo.ball(0.8, 2)),
              (geo.annulus(0.5, 1.5, 2), 4.0, geo.lshape(1.5, 0.5))]
    for E, L, F in cases:
        spec = eigenvalues(assemble(geo.discretize(E, L), F))
        ok, _ = theorem_checks(spec, eps_list=(0.01, 0.1, 0.25), p_list=(0.1, 0.25, 0.5, 1.0))
        failures += not ok
        count += 1
    records = harness.catalog_sweep(E=["disk(1)", "squareminusdisk(2,0.5)"], F=["square(1)"])
    count += len(records)
    failures += sum(not (r.schatten_ok and r.transition_upper and r.transition_lower and r.deviation_ok)
                    for r in records)
    # (d) dyadic sandwich interleaving
    inter = [(geo.ball(0.8, 2), 8.0, geo.ball(1.7, 2)),
             (geo.ball(0.8, 2), 8.0, geo.box_minus_ball(3.0, 0.8, 2)),
             (geo.box(1.0, 1.0), 8.0, geo.lshape(3.0, 1.0)),
             (geo.box(3.0), 8.0, geo.Box([-1.3], [2.2]))]
    for E, L, F in inter:
        res = harness.interleaving_check(geo.discretize(E, L), F, tol=1e-8)
        failures += not res["holds"]
        count += 1
    ok = failures == 0
    record(3, ok, f"{count} spectra/sandwiches checked, {failures} failures")
    assert ok


def test_c04_trace_and_dilation():
    worst = 0.0
    for E, L, F in [(geo.ball(2.0, 2), 4.0, geo.box(1.0, 1.0)), (geo.box(6.0), 2.0, geo.box(0.7)),
                    (geo.lshape(2.0, 1.0), 4.0, geo.ball(0.9, 2)),
                    (geo.box(2.0, 2.0), 4.0, geo.box_minus_ball(2.0, 0.5, 2))]:
        omega = geo.discretize(E, L)
        M = assemble(omega, F, mode="exact")
        spec = eigenvalues(M)
        expect = len(omega) * L ** (-omega.dim) * F.volume
        worst = max(worst, abs(spec.trace - expect) / expect)
    identical = True
    for t in (2.0, 0.5):
        for pts, L, F in [(geo.discretize(geo.ball(1.5, 2), 2.0).points, 2.0, geo.box(0.6, 0.8)),
                          (np.arange(-5, 6)[:, None], 4.0, geo.Box([-0.5], [1.25]))]:
            d = pts.shape[1]
            G1 = assemble(geo.GridSet(d, L, pts), F).entries
            G2 = assemble(geo.GridSet(d, t * L, pts), geo.dilate(F, t)).entries
            identical &= bool(np.array_equal(G1, G2))
    ok = worst <= 1e-10 and identical
    record(4, ok, f"trace relative error {worst:.1e}, dilation entrywise identical: {identical}")
    assert ok


def test_c05_tight_frame(window):
    t0 = time.perf_counter()
    p1 = frames.partition([2.0], 0.01)
    r1 = frames.tight_frame_residual(p1, window, frames.random_trig_polynomials(100, [2.0], seed=7))
    p2 = frames.partition([2.0, 2.0], 0.01)
    r2 = frames.tight_frame_residual(p2, window, frames.random_trig_polynomials(20, [2.0, 2.0], degree=3, seed=8),
                                     deep=1e-8)
    dt = time.perf_counter() - t0
    ok = r1["residual"] <= 1e-6 and r2["residual"] <= 1e-5 and dt < 300
    record(5, ok, f"d=1 residual {r1['residual']:.1e}, d=2 residual {r2['residual']:.1e}, {dt:.0f}s")
    assert ok


CERT_CASES = [
    # (E = [-a, a], W, eps)
    (8.0, 4.0, 0.25),
    (8.0, 2.0, 0.25),
    (6.0, 4.0, 0.25),
    (8.0, 4.0, 0.3),
]


def test_c06_israel_certificate(window):
    met = 0
    failures = 0
    for a, W, eps in CERT_CASES:
        omega = geo.discretize(geo.box(2 * a), 32.0)
        s = round(frames.ps_shape(2.1, eps, window.alpha, 2.0), 1)
        cert = frames.israel_certificate(omega, [W], 32.0, s, 0.001, eps, window=window)
        met += cert["hypothesis_met"]
        failures += not cert["holds"]
    ok = met >= 3 and failures == 0
    record(6, ok, f"hypothesis met in {met}/{len(CERT_CASES)} configurations, {failures} implication failures")
    assert ok


def test_c07_disk_scaling():
    t0 = time.perf_counter()
    cfg = harness.SweepConfig(E=["disk(1)"], F=["square(1)"], L=[4.0], r=[4, 6, 8, 12, 16], eps=[0.01])
    recs = harness.run_sweep(cfg)
    assert not any(r.error for r in recs), [r.error for r in recs]
    fit = fit_scaling([r.r for r in recs], [r.plunge_count for r in recs], "power-law")
    dt = time.perf_counter() - t0
    ok = 0.8 <= fit["exponent"] <= 1.3 and fit["r2"] >= 0.9 and dt < 1800
    record(7, ok, f"exponent {fit['exponent']:.3f}, R2 {fit['r2']:.4f}, counts "
                  f"{[r.plunge_count for r in recs]}, {dt:.0f}s")
    assert ok


def test_c08_landau_widom_shape():
    ab = [16, 32, 64, 128, 256]
    b, L = 0.5, 4.0
    counts = {0.1: [], 0.01: []}
    for x in ab:
        a = x / b
        spec = eigenvalues(assemble(geo.discretize(geo.Box([-a], [a]), L), geo.Box([-b], [b])))
        assert_exact(spec)
        for e in counts:
            counts[e].append(int(np.count_nonzero((spec.eigenvalues > e) & (spec.eigenvalues < 1 - e))))
    fits = {e: fit_scaling(ab, counts[e], "log-linear") for e in counts}
    ratio = fits[0.01]["slope"] / fits[0.1]["slope"] if fits[0.1]["slope"] else float("inf")
    target = math.log(99) / math.log(9)
    r2_ok = all(f["r2"] >= 0.95 for f in fits.values())
    ratio_ok = abs(ratio / target - 1) <= 0.25
    ok = r2_ok and ratio_ok
    record(8, ok, f"counts {counts}, R2 {[round(f['r2'], 3) for f in fits.values()]}, "
                  f"slope ratio {ratio:.3f} vs {target:.3f}")
    assert ok


def test_c09_single_constant_domination():
    consts = load_constants()
    A = consts["A_fit"]
    recs = harness.catalog_sweep()
    good = [r for r in recs if not r.error and np.isfinite(r.rhs_th3)]
    kinds = {r.E for r in good} | {r.F for r in good}
    assert any("squareminusdisk" in k for k in kinds) and any(k.startswith("two") for k in kinds)
    worst = max(r.plunge_count / (A * r.rhs_th3) for r in good)
    ok = worst <= 1.0 and len(good) == consts["A_fit_records"]
    record(9, ok, f"A_fit {A:.3e} over {len(good)} records, worst count/(A rhs) {worst:.4f}")
    assert ok


def test_c10_convergence():
    study = harness.convergence_study(geo.box(8.0), geo.box(1.0), [8, 16, 32, 64], k=10)
    ok = study["monotone"] and study["diffs"][-1] <= 5e-3
    record(10, ok, f"successive differences {[f'{d:.4f}' for d in study['diffs']]}, "
                   f"rate exponent {study['rate']['exponent']:.2f}")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
