import json
import math
import warnings

import numpy as np
import pytest

from plunge import geometry as geo, harness
from plunge.harness import SweepConfig, SweepError, parse_domain


# -- catalog and parsing --------------------------------------------------------------

@pytest.mark.parametrize("text,volume", [
    ("disk(2)", 4 * math.pi),
    ("BOX(1, 3)", 3.0),
    ("interval(2)", 4.0),
    ("interval(-1, 0.5)", 1.5),
    ("annulus(0.5,1)", 0.75 * math.pi),
    ("boxminusball(2,0.5)", 4 - 0.25 * math.pi),
    ("lshape(2,1)", 3.0),
    ("twosquares(1,2)", 2.0),
    ("dilate(square(1); 2)", 4.0),
    ("shift(disk(1); 3, -1)", math.pi),
    ("union(interval(-3,-1); interval(1,2))", 3.0),
])
def test_parse_volumes(text, volume):
    dom = parse_domain(text)
    assert dom.volume == pytest.approx(volume)


def test_parsed_domains_match_constructors():
    rng = np.random.default_rng(0)
    x = rng.uniform(-4, 4, size=(4000, 2))
    pairs = [("shift(disk(1); 3, -1)", geo.shift(geo.ball(1.0, 2), [3, -1])),
             ("union(disk(1); shift(disk(1); 3, 0))",
              geo.union(geo.ball(1.0, 2), geo.shift(geo.ball(1.0, 2), [3, 0]))),
             ("twodisks(0.5,1.5)", geo.union(geo.shift(geo.ball(0.5, 2), [-0.75, 0]),
                                              geo.shift(geo.ball(0.5, 2), [0.75, 0])))]
    for text, dom in pairs:
        assert np.array_equal(parse_domain(text).contains(x), dom.contains(x))


@pytest.mark.parametrize("text", ["circle(1)", "disk(1", "union(disk(1))", "dilate(disk(1); -2)",
                                  "shift(disk(1); 1)", "twodisks(1, 1)", "interval(2, 1)", "box(0)"])
def test_parse_errors(text):
    with pytest.raises((ValueError, KeyError)):
        parse_domain(text)


def test_unknown_catalog_name():
    with pytest.raises(KeyError, match="known"):
        harness.catalog("hexagon", 1.0)


# -- sweeps -------------------------------------------------------------------------------

def test_single_combination_record():
    cfg = SweepConfig(E=["square(0.75)"], F=["square(1)"], L=[4.0], eps=[0.1])
    recs = harness.run_sweep(cfg)
    assert len(recs) == 1
    r = recs[0]
    assert not r.error and r.n_omega == 9 and r.n_boundary == 8
    assert r.trace == pytest.approx(9 / 16)
    assert r.plunge_count >= 0 and r.transition_upper and r.transition_lower
    assert r.schatten_ok and r.deviation_ok


@pytest.mark.parametrize("change", [{"eps": []}, {"E": []}, {"eps": [0.6]}, {"alpha": 0.7},
                                    {"cap_omega": 0}])
def test_config_errors(change):
    data = {"E": ["disk(1)"], "F": ["square(1)"], "L": [4.0], **change}
    with pytest.raises(SweepError):
        harness.run_sweep(SweepConfig.from_dict(data))


def test_unknown_config_key():
    with pytest.raises(SweepError):
        SweepConfig.from_dict({"E": "disk(1)", "F": "square(1)", "L": 4, "colour": 3})


def test_duplicates_dropped_with_warning():
    cfg = SweepConfig(E=["disk(1)", "disk(1)"], F=["square(1)"], L=[4.0, 4], eps=[0.1])
    with pytest.warns(UserWarning, match="duplicate"):
        recs = harness.run_sweep(cfg)
    assert len(recs) == 1


def test_failures_become_data():
    cfg = SweepConfig(E=["disk(1)"], F=["square(5)"], L=[4.0], eps=[0.1, 0.25])
    recs = harness.run_sweep(cfg)
    assert len(recs) == 2 and all("fundamental cell" in r.error for r in recs)
    cfg = SweepConfig(E=["disk(3)"], F=["square(1)"], L=[4.0], eps=[0.1], cap_omega=10)
    assert "exceeds cap" in harness.run_sweep(cfg)[0].error


def test_sweep_is_deterministic_and_round_trips(tmp_path):
    data = {"E": ["disk(1)", "lshape(2,1)"], "F": ["square(1)", "disk(0.6)"], "L": [4.0],
            "r": [1.0, 1.5], "eps": [0.01, 0.25]}
    a = harness.run_sweep(SweepConfig.from_dict(data))
    b = harness.run_sweep(SweepConfig.from_dict({**data, "workers": 2}))
    strip = lambda recs: [{k: v for k, v in vars(r).items() if k != "seconds"} for r in recs]
    assert json.dumps(strip(a), default=str) == json.dumps(strip(b), default=str)
    path = tmp_path / "sweep.csv"
    harness.write_records(a, path)
    text = path.read_text().splitlines()
    assert text[0] == "# plunge-sweep v1" and text[2] == ",".join(harness.COLUMNS)
    back = harness.read_records(path)
    assert json.dumps(strip(back), default=str) == json.dumps(strip(a), default=str)
    js = harness.records_json(a)
    assert list(js[0]) == harness.COLUMNS


def test_sweep_records_are_sorted():
    cfg = SweepConfig(E=["square(2)", "disk(1)"], F=["square(1)"], L=[4.0], eps=[0.25, 0.01])
    recs = harness.run_sweep(cfg)
    keys = [(r.E, r.F, r.L, r.r, r.eps) for r in recs]
    assert keys == sorted(keys)


def test_bound_uses_unit_resolution():
    cfg = SweepConfig(E=["disk(1)"], F=["square(1)"], L=[4.0], eps=[0.1])
    r = harness.run_sweep(cfg)[0]
    from plunge.bounds import BoundInputs, theorem_rhs
    expect = theorem_rhs(BoundInputs("th3", 2, r.n_boundary, r.kappa_omega, 0.1, r.boundary_F / 4.0,
                                     r.kappa_F, 0.25))
    assert r.rhs_th3 == pytest.approx(expect)


def test_regularity_values():
    assert harness.regularity(parse_domain("interval(2)")) == (2.0, 1.0)
    b, k = harness.regularity(parse_domain("disk(1)"))
    assert b == pytest.approx(2 * math.pi, rel=0.03) and k > 0


# -- convergence and interleaving ---------------------------------------------------------

def test_convergence_single_resolution():
    out = harness.convergence_study("interval(2)", "interval(0.5)", [8], k=4)
    assert out["diffs"] == [] and len(out["top"]) == 1 and "rate" not in out


def test_convergence_table():
    out = harness.convergence_study("interval(2)", "interval(0.5)", [8, 16, 32], k=4)
    assert len(out["top"]) == 3 and len(out["diffs"]) == 2
    assert all(len(t) == 4 for t in out["top"])
    assert out["diffs"][1] < out["diffs"][0]


def test_convergence_needs_increasing_resolutions():
    with pytest.raises(ValueError):
        harness.convergence_study("interval(2)", "interval(0.5)", [16, 8])


def test_interleaving():
    res = harness.interleaving_check(geo.discretize(geo.ball(0.8, 2), 8.0), geo.ball(1.7, 2))
    assert res["holds"] and res["gap_inner"] <= 1e-8 and res["gap_outer"] <= 1e-8


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"E": "disk(1)", "F": ["square(1)"], "L": [4], "eps": [0.1]}))
    cfg = harness.load_config(p)
    assert cfg.E == ["disk(1)"] and cfg.eps == [0.1]
