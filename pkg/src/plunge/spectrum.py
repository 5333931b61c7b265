"""Spectra of concentration matrices and the counting statistics built on them."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .operator import ConcentrationMatrix, trace_stats

__all__ = ["SpectrumSummary", "eigenvalues", "from_values", "plunge_count", "distribution_count",
           "schatten_residual", "schatten_plunge_bound", "schatten_transfer", "transition_check",
           "deviation_check", "padded", "write_spectrum_csv", "summary_dict", "theorem_checks"]

EIG_TOL = 1e-9


@dataclass(eq=False)
class SpectrumSummary:
    eigenvalues: np.ndarray
    trace: float
    trace_residual: float
    source: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)


def from_values(values, source=None) -> SpectrumSummary:
    """Summary of an explicit eigenvalue list (trace statistics taken from the values)."""
    lam = np.sort(np.asarray(values, dtype=float))[::-1]
    return SpectrumSummary(lam, float(lam.sum()), float(np.sum(lam - lam ** 2)), dict(source or {}))


def eigenvalues(M: ConcentrationMatrix, source=None) -> SpectrumSummary:
    """Dense Hermitian eigendecomposition, sector by sector."""
    parts = []
    for _, block in M.sector_matrices():
        if block.shape[0] > M.cap:
            raise ValueError(f"block of size {block.shape[0]} exceeds cap {M.cap}")
        herm = np.max(np.abs(block - block.conj().T))
        if herm > 1e-12 * max(1.0, np.max(np.abs(block))):
            raise ValueError(f"matrix is not Hermitian (defect {herm:.3g})")
        try:
            parts.append(sla.eigvalsh(block, check_finite=False))
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("eigensolver did not converge") from exc
    lam = np.sort(np.concatenate(parts))[::-1]
    if lam[0] > 1 + EIG_TOL or lam[-1] < -EIG_TOL:
        raise ValueError(f"eigenvalues outside [0, 1]: range [{lam[-1]:.3e}, {lam[0]:.12f}]")
    lam = np.clip(lam, 0.0, 1.0)
    ts = trace_stats(M)
    src = {"n_omega": M.size, "L": M.L, "mode": M.mode, "domain": M.domain.kind}
    src.update(source or {})
    return SpectrumSummary(lam, ts["trace"], ts["trace"] - ts["trace_sq"], src)


def _check_eps(eps, hi):
    if not 0 < eps < hi:
        raise ValueError(f"eps must lie in (0, {hi:g}), got {eps}")


def plunge_count(s: SpectrumSummary, eps: float) -> int:
    """#{n : eps < lambda_n < 1 - eps}."""
    _check_eps(eps, 0.5)
    lam = s.eigenvalues
    return int(np.count_nonzero((lam > eps) & (lam < 1 - eps)))


def distribution_count(s: SpectrumSummary, eps: float) -> int:
    """#{n : lambda_n > eps}."""
    _check_eps(eps, 1.0)
    return int(np.count_nonzero(s.eigenvalues > eps))


def schatten_residual(s: SpectrumSummary, p: float) -> float:
    """sum_n (lambda_n - lambda_n^2)^p with 0^p = 0."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    base = s.eigenvalues - s.eigenvalues ** 2
    base = base[base > 0]
    return float(np.sum(base ** p))


def schatten_plunge_bound(s: SpectrumSummary, eps: float, p: float):
    _check_eps(eps, 0.5)
    bound = schatten_residual(s, p) / (eps - eps ** 2) ** p
    count = plunge_count(s, eps)
    return {"bound": bound, "count": count, "holds": bool(count <= bound)}


def schatten_transfer(C: float, D: float, a: float, p: float) -> float:
    """C (D + 1/p)^a."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if C <= 0 or D < 0 or a <= 0:
        raise ValueError("C, a must be positive and D non-negative")
    return C * (D + 1.0 / p) ** a


def _ceil_trace(trace):
    r = round(trace)
    return int(r) if abs(trace - r) < 1e-9 else int(math.ceil(trace))


def padded(s: SpectrumSummary, n: int) -> np.ndarray:
    """First n eigenvalues, padded with zeros past the end of the list."""
    lam = s.eigenvalues[:n]
    return np.concatenate([lam, np.zeros(max(0, n - len(lam)))])


def transition_check(s: SpectrumSummary, tol: float = 1e-8):
    """Eigenvalues cross 1/2 within max(2 tr(S - S^2), 1) of ceil(tr S)."""
    K = _ceil_trace(s.trace)
    width = max(2 * s.trace_residual, 1.0)
    lam = s.eigenvalues
    n = np.arange(1, len(lam) + 1)
    upper_ok = bool(np.all(lam[n >= K + width] <= 0.5 + tol))
    lower = n <= K - width
    # indices past the stored list carry eigenvalue 0
    lower_ok = bool(np.all(lam[lower] >= 0.5 - tol)) and K - width < len(lam) + 1
    return {"upper_ok": upper_ok, "lower_ok": lower_ok, "K": K, "width": width}


def deviation_check(s: SpectrumSummary, eps: float):
    """|N_eps - tr S| against width + #M_tau + 1 with tau = 0.999 min(eps, 1 - eps)."""
    _check_eps(eps, 1.0)
    tau = 0.999 * min(eps, 1 - eps)
    deviation = abs(distribution_count(s, eps) - s.trace)
    width = transition_check(s)["width"]
    bound = width + plunge_count(s, tau) + 1
    return {"deviation": deviation, "bound": bound, "holds": bool(deviation <= bound), "tau": tau}


def theorem_checks(s: SpectrumSummary, eps_list=(0.01, 0.1, 0.25), p_list=(0.1, 0.25, 0.5, 1.0)):
    """All exact inequalities on one spectrum; returns (ok, details)."""
    details = {"schatten": [], "deviation": []}
    ok = True
    for e in eps_list:
        for p in p_list:
            r = schatten_plunge_bound(s, e, p)
            details["schatten"].append((e, p, r))
            ok &= r["holds"]
        dv = deviation_check(s, e)
        details["deviation"].append((e, dv))
        ok &= dv["holds"]
    tc = transition_check(s)
    details["transition"] = tc
    ok &= tc["upper_ok"] and tc["lower_ok"]
    return bool(ok), details


def write_spectrum_csv(s: SpectrumSummary, path):
    with open(path, "w") as fh:
        fh.write("index,lambda\n")
        for i, v in enumerate(s.eigenvalues, start=1):
            fh.write(f"{i},{v:.17g}\n")


def summary_dict(s: SpectrumSummary, eps_list=(0.01, 0.1, 0.25)):
    return {
        "source": s.source,
        "n": len(s),
        "trace": s.trace,
        "trace_residual": s.trace_residual,
        "plunge_counts": {str(e): plunge_count(s, e) for e in eps_list},
        "transition": transition_check(s),
        "deviation": {str(e): deviation_check(s, e) for e in eps_list},
    }


def write_summary_json(s: SpectrumSummary, path, eps_list=(0.01, 0.1, 0.25)):
    with open(path, "w") as fh:
        json.dump(summary_dict(s, eps_list), fh, indent=2, sort_keys=True)
