import itertools
import json
import math

import numpy as np
import pytest

from plunge import bounds
from plunge.bounds import BoundInputs, HypothesisError, fit_scaling, landau_widom, theorem_rhs


def test_th3_example():
    b = BoundInputs("th3", 2, 8, 0.5, 0.01, 4, 1, 0.25, 1.0)
    expect = 64 * math.log(6400) ** 6
    assert theorem_rhs(b) == pytest.approx(expect, rel=1e-12)
    assert theorem_rhs(b) == pytest.approx(2.9e7, rel=0.01)


def test_cube_variant_reduces_with_unit_scales():
    b = BoundInputs("th-cube", 2, 10.0, 2.0, 0.05, alpha=0.2, W_max=1.0, eta=1.0)
    assert theorem_rhs(b) == pytest.approx(5 * math.log(5 / 0.05) ** (2 * 2 * 1.2))
    wide = BoundInputs("th-cube", 2, 10.0, 2.0, 0.05, alpha=0.2, W_max=3.0, eta=1.0)
    # the scale factor enters both the prefactor and the logarithm
    assert theorem_rhs(wide) == pytest.approx(15 * math.log(15 / 0.05) ** 4.8)


def test_monotonicity_on_grid():
    base = dict(variant="th1", d=2, bE=6.0, kE=0.8, eps=0.05, bF=3.0, kF=0.9, alpha=0.25, A=1.0)
    ref = theorem_rhs(BoundInputs(**base))
    for key, up in [("bE", 1.5), ("bF", 1.5), ("kE", 1 / 1.5), ("kF", 1 / 1.5), ("eps", 0.5), ("A", 2.0)]:
        for f in (up, up ** 2):
            b = dict(base)
            b[key] *= f
            assert theorem_rhs(BoundInputs(**b)) > ref, key
    for e1, e2 in itertools.pairwise([0.4, 0.2, 0.05, 0.01, 1e-4]):
        lo = theorem_rhs(BoundInputs(**{**base, "eps": e1}))
        assert theorem_rhs(BoundInputs(**{**base, "eps": e2})) > lo


@pytest.mark.parametrize("change", [{"eps": 0.5}, {"alpha": 0.5}, {"bE": 0.1, "bF": 0.1},
                                    {"kE": 0.0}, {"variant": "th9"}, {"d": 1}])
def test_hypothesis_violations(change):
    b = BoundInputs(**{**dict(variant="th3", d=2, bE=8, kE=0.5, eps=0.01, bF=4, kF=1), **change})
    with pytest.raises(HypothesisError):
        theorem_rhs(b)


def test_landau_widom_examples():
    assert landau_widom(math.e, 1 / (1 + math.e)) == pytest.approx(1.0)
    assert landau_widom(100.0, 0.5) == 0.0
    assert landau_widom(16.0, 0.01, c=2.0) == pytest.approx(2 * math.log(16) * math.log(99))
    for ab, eps in [(1.0, 0.1), (10.0, 0.6), (10.0, 0.0)]:
        with pytest.raises(ValueError):
            landau_widom(ab, eps)


def test_exact_power_law():
    r = np.array([1.0, 2, 4, 8, 16])
    fit = fit_scaling(r, 3 * r, "power-law")
    assert fit["exponent"] == pytest.approx(1.0, abs=1e-9)
    assert fit["C"] == pytest.approx(3.0) and fit["r2"] == pytest.approx(1.0)


def test_noisy_power_law():
    rng = np.random.default_rng(11)
    r = np.geomspace(1, 50, 12)
    fit = fit_scaling(r, r * (1 + 0.01 * rng.standard_normal(r.size)), "power-law")
    assert 0.95 <= fit["exponent"] <= 1.05


def test_log_linear_fit():
    ab = np.array([16.0, 32, 64, 128, 256])
    fit = fit_scaling(ab, 2 + 0.7 * np.log(ab), "log-linear")
    assert fit["slope"] == pytest.approx(0.7) and fit["intercept"] == pytest.approx(2.0)


def test_bound_ratio_fit():
    fit = fit_scaling([0] * 4, [1, 2, 3, 8], "plunge-vs-bound-ratio", bound=[10, 10, 10, 20])
    assert fit["A"] == pytest.approx(0.4)


@pytest.mark.parametrize("x,y,model", [
    ([1, 2, 3], [1, 2, 3], "power-law"),
    ([2, 2, 2, 2], [1, 2, 3, 4], "power-law"),
    ([1, 2, 3, 4], [0, 2, 3, 4], "power-law"),
    ([1, 2, 3, 4], [1, 2, 3, 4], "cubic"),
])
def test_fit_errors(x, y, model):
    with pytest.raises(ValueError):
        fit_scaling(x, y, model)


def test_constants_round_trip(tmp_path, monkeypatch):
    path = tmp_path / "c.json"
    monkeypatch.setenv(bounds.CONSTANTS_ENV, str(path))
    bounds.save_constants({"A_fit": 0.5})
    bounds.save_constants({"lattice_C": 0.2})
    data = bounds.load_constants()
    assert data == {"version": 1, "A_fit": 0.5, "lattice_C": 0.2}
    assert json.loads(path.read_text())["A_fit"] == 0.5


def test_packaged_constants_present():
    data = bounds.load_constants(bounds.constants_path() if not bounds.os.environ.get(bounds.CONSTANTS_ENV)
                                 else None)
    for key in ("A_fit", "lattice_C", "med_per_j_C", "gamma_med_C"):
        assert data[key] > 0
