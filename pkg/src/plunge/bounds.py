"""Right-hand sides of the plunge-region bounds, the Landau-Widom reference law,
and least-squares fits of the free constants."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, asdict
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = ["BoundInputs", "HypothesisError", "theorem_rhs", "hypotheses", "landau_widom",
           "fit_scaling", "load_constants", "save_constants", "constants_path", "CONSTANTS_ENV"]

CONSTANTS_ENV = "PLUNGE_CONSTANTS"
VARIANTS = ("th1", "th2", "th3", "th-cube")


class HypothesisError(ValueError):
    pass


@dataclass
class BoundInputs:
    """Inputs of one bound.

    For th3, ``bE`` and ``kE`` carry #dOmega and kappa_dOmega.  For th-cube,
    ``W_max`` and ``eta`` are used and ``bF``/``kF`` are ignored.
    """

    variant: str
    d: int
    bE: float
    kE: float
    eps: float
    bF: float = 1.0
    kF: float = 1.0
    alpha: float = 0.25
    A: float = 1.0
    W_max: float = 1.0
    eta: float = 1.0


def hypotheses(b: BoundInputs) -> dict:
    flags = {
        "variant_known": b.variant in VARIANTS,
        "eps_in_range": 0 < b.eps < 0.5,
        "alpha_in_range": 0 < b.alpha < 0.5,
        "positive_constants": b.kE > 0 and b.kF > 0 and b.A > 0,
        "d_at_least_2": b.d >= 2,
    }
    if b.variant == "th-cube":
        flags["boundary_at_least_1"] = b.bE >= 1
        flags["eta_at_least_1"] = b.eta >= 1
    else:
        flags["boundary_product_at_least_1"] = b.bE * b.bF >= 1
    return flags


def theorem_rhs(b: BoundInputs, enforce: bool = True) -> float:
    """Evaluate the selected bound verbatim with the supplied constant A."""
    flags = hypotheses(b)
    if enforce and not all(flags.values()):
        bad = [k for k, v in flags.items() if not v]
        raise HypothesisError(f"hypotheses violated: {', '.join(bad)}")
    d, a = b.d, b.alpha
    if b.variant == "th-cube":
        m = max(b.W_max, 1.0 / b.eta) ** (d - 1)
        lead = m * b.bE / b.kE
        return b.A * lead * math.log(lead / b.eps) ** (2 * d * (1 + a))
    lead = (b.bE / b.kE) * (b.bF / b.kF)
    return b.A * lead * math.log(b.bE * b.bF / (b.kE * b.eps)) ** (2 * d * (1 + a) + 1)


def landau_widom(ab: float, eps: float, c: float = 1.0) -> float:
    """c log(ab) log((1 - eps)/eps)."""
    if ab <= 1 or not 0 < eps <= 0.5:
        raise ValueError("need ab > 1 and eps in (0, 1/2]")
    return c * math.log(ab) * math.log((1 - eps) / eps)


def _lstsq(X, y):
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise ValueError("degenerate design matrix")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / sst if sst > 0 else float("nan")
    return coef, resid, r2


def fit_scaling(x, y, model: str = "power-law", bound=None) -> dict:
    """Least-squares fits.

    power-law:   log y = log C + p log x
    log-linear:  y = a + c log x        (plunge count against log(ab))
    bound-ratio: the smallest A with y <= A * bound, plus the log-log slope
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 4:
        raise ValueError("need at least 4 records")
    if model == "power-law":
        if np.any(x <= 0) or np.any(y <= 0):
            raise ValueError("power-law fit needs positive data")
        X = np.column_stack([np.ones_like(x), np.log(x)])
        coef, resid, r2 = _lstsq(X, np.log(y))
        return {"model": model, "C": float(math.exp(coef[0])), "exponent": float(coef[1]),
                "r2": r2, "residuals": resid.tolist()}
    if model == "log-linear":
        if np.any(x <= 0):
            raise ValueError("log-linear fit needs positive regressors")
        X = np.column_stack([np.ones_like(x), np.log(x)])
        coef, resid, r2 = _lstsq(X, y)
        return {"model": model, "intercept": float(coef[0]), "slope": float(coef[1]),
                "r2": r2, "residuals": resid.tolist()}
    if model == "plunge-vs-bound-ratio":
        b = np.asarray(bound if bound is not None else x, dtype=float)
        if np.any(b <= 0):
            raise ValueError("bounds must be positive")
        ratio = y / b
        return {"model": model, "A": float(ratio.max()), "ratios": ratio.tolist(),
                "median_ratio": float(np.median(ratio))}
    raise ValueError(f"unknown model {model!r}")


def constants_path() -> Path:
    env = os.environ.get(CONSTANTS_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("plunge") / "data" / "constants.json"))


def load_constants(path=None) -> dict:
    p = Path(path) if path else constants_path()
    with open(p) as fh:
        return json.load(fh)


def save_constants(values: dict, path=None) -> Path:
    p = Path(path) if path else constants_path()
    data = {"version": 1}
    if p.exists():
        with open(p) as fh:
            data.update(json.load(fh))
    data.update(values)
    with open(p, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return p


def inputs_dict(b: BoundInputs) -> dict:
    return asdict(b)
