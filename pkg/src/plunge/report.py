"""Figures for sweeps, spectra and convergence tables (rendered to files)."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_spectrum", "plot_scaling", "plot_convergence", "plot_landau_widom", "write_json"]

_STYLE = {"figure.figsize": (5.0, 3.6), "axes.grid": True, "grid.alpha": 0.3,
          "axes.spines.top": False, "axes.spines.right": False, "font.size": 9}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_spectrum(summary, path, eps=0.1):
    lam = summary.eigenvalues
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        n = np.arange(1, len(lam) + 1)
        ax.plot(n, lam, ".", ms=3, color="k")
        ax.axhspan(eps, 1 - eps, color="tab:orange", alpha=0.15, label=f"plunge region, eps={eps:g}")
        ax.axvline(summary.trace, color="tab:blue", lw=0.8, ls="--", label="trace")
        ax.set_xlabel("n")
        ax.set_ylabel(r"$\lambda_n$")
        ax.set_xlim(0, min(len(lam), 3 * summary.trace + 20) + 1)
        ax.legend(frameon=False, loc="upper right")
        return _save(fig, path)


def plot_scaling(records, path, x="r", fit=None):
    """Plunge counts against a size parameter on log-log axes, one series per eps."""
    good = [r for r in records if not r.error]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for eps in sorted({r.eps for r in good}):
            sel = [r for r in good if r.eps == eps]
            xs = np.array([getattr(r, x) for r in sel], float)
            ys = np.array([r.plunge_count for r in sel], float)
            ax.loglog(xs, np.maximum(ys, 0.5), "o-", ms=4, label=f"eps={eps:g}")
        if fit is not None and "C" in fit:
            xs = np.array(sorted({getattr(r, x) for r in good}), float)
            ax.loglog(xs, fit["C"] * xs ** fit["exponent"], "k--", lw=0.8,
                      label=f"fit exponent {fit['exponent']:.2f}")
        ax.set_xlabel(x)
        ax.set_ylabel("plunge count")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_landau_widom(ab, counts, path, fits=None):
    """Plunge counts against log(ab); ``counts`` maps eps to a list aligned with ``ab``."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        la = np.log(np.asarray(ab, float))
        for eps, ys in counts.items():
            ax.plot(la, ys, "o", ms=4, label=f"eps={eps:g}")
            if fits and eps in fits:
                f = fits[eps]
                ax.plot(la, f["intercept"] + f["slope"] * la, "--", lw=0.8)
        ax.set_xlabel("log(ab)")
        ax.set_ylabel("plunge count")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_convergence(study, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        Ls = np.asarray(study["L"][1:], float)
        ax.loglog(Ls, study["diffs"], "o-", ms=4, label="sup difference, top eigenvalues")
        if "rate" in study:
            r = study["rate"]
            ax.loglog(Ls, r["C"] * Ls ** r["exponent"], "k--", lw=0.8,
                      label=f"slope {r['exponent']:.2f}")
        ax.set_xlabel("L")
        ax.set_ylabel("difference to previous L")
        ax.legend(frameon=False)
        return _save(fig, path)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
