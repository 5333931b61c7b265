import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plunge import geometry as geo
from plunge.operator import assemble, ft_indicator, nystrom_oracle, trace_stats, write_matrix_csv
from plunge.spectrum import eigenvalues, padded


def dense_reference(omega, F):
    """Entry-by-entry matrix straight from the indicator transform."""
    pts = omega.points
    n = len(pts)
    G = np.empty((n, n), complex)
    for i in range(n):
        for j in range(n):
            G[i, j] = F.ft(((pts[i] - pts[j]) / omega.L)[None])[0]
    return G * omega.L ** (-omega.dim)


# -- indicator transforms -----------------------------------------------------------

def test_interval_transform_values():
    half = geo.box(1.0)
    assert ft_indicator(half, [[0.0]])[0][0] == pytest.approx(1.0)
    assert abs(ft_indicator(half, [[1.0]])[0][0]) < 1e-15
    quarter = geo.box(0.5)
    assert ft_indicator(quarter, [[1.0]])[0][0].real == pytest.approx(1 / math.pi, abs=1e-15)


@pytest.mark.parametrize("F", [geo.ball(0.7, 2), geo.lshape(1.0, 0.4), geo.box_minus_ball(1.0, 0.3, 2),
                               geo.annulus(0.2, 0.5, 2), geo.shift(geo.box(0.4, 0.6), [0.1, -0.2])])
def test_transform_value_at_zero_and_symmetry(F):
    xi = np.array([[0.37, -1.2], [2.1, 0.4]])
    v, tag = ft_indicator(F, np.vstack([np.zeros((1, 2)), xi, -xi]))
    assert tag == "exact"
    assert v[0].real == pytest.approx(F.volume, rel=1e-12)
    assert np.allclose(v[1:3], np.conj(v[3:5]), atol=1e-14)


def test_rasterized_transform_agrees_with_closed_form():
    F = geo.ball(0.6, 2)
    xi = np.array([[0.0, 0.0], [0.5, 0.25], [1.0, -0.75]])
    exact, _ = ft_indicator(F, xi, mode="exact")
    approx, tag = ft_indicator(F, xi, mode="rasterized", cell=0.002)
    assert tag.startswith("rasterized")
    assert np.max(np.abs(exact - approx)) < 5e-3


def test_exact_mode_on_predicate_is_an_error():
    F = geo.Predicate(lambda x: np.sum(x ** 2, axis=1) <= 0.1, [-0.4, -0.4], [0.4, 0.4])
    with pytest.raises(ValueError):
        ft_indicator(F, [[0.1, 0.2]], mode="exact")
    v, tag = ft_indicator(F, [[0.0, 0.0]])
    assert tag.startswith("rasterized")
    assert v[0].real == pytest.approx(0.1 * math.pi, rel=0.02)


# -- assembly -----------------------------------------------------------------------

def test_small_matrices():
    one = assemble(geo.GridSet(1, 1.0, [[0]]), geo.box(1.0)).entries
    assert np.allclose(one, [[1.0]])
    two = assemble(geo.GridSet(1, 1.0, [[0], [1]]), geo.box(0.5)).entries
    assert np.allclose(two, [[0.5, 1 / math.pi], [1 / math.pi, 0.5]], atol=1e-15)
    ident = assemble(geo.GridSet(1, 1.0, [[0], [1]]), geo.box(1.0)).entries
    assert np.allclose(ident, np.eye(2), atol=1e-15)


@pytest.mark.parametrize("omega,F", [
    (geo.GridSet(1, 4.0, [[-3], [0], [1], [5], [8]]), geo.Box([-1.5], [0.5])),
    (geo.discretize(geo.ball(1.0, 2), 3.0), geo.ball(0.8, 2)),
    (geo.discretize(geo.lshape(2.0, 1.0), 2.0), geo.Box([-0.3, -0.7], [0.6, 0.2])),
    (geo.GridSet.block((2, 2, 2), 2.0), geo.box(0.5, 0.7, 0.9)),
])
def test_entries_match_pointwise_reference(omega, F):
    M = assemble(omega, F)
    ref = dense_reference(omega, F)
    assert np.max(np.abs(M.entries - ref)) < 1e-14
    assert np.max(np.abs(M.entries - M.entries.conj().T)) < 1e-14
    assert np.allclose(M.diagonal(), F.volume / omega.L ** omega.dim)


def test_trace_stats_examples():
    M = assemble(geo.GridSet(1, 1.0, [[0], [1]]), geo.box(0.5))
    ts = trace_stats(M)
    assert ts["trace"] == pytest.approx(1.0)
    assert ts["trace_sq"] == pytest.approx(0.5 + 2 / math.pi ** 2)
    ts = trace_stats(assemble(geo.GridSet(1, 1.0, [[0], [1]]), geo.box(1.0)))
    assert ts["trace"] == pytest.approx(2.0) and ts["trace_sq"] == pytest.approx(2.0)
    M = assemble(geo.GridSet(1, 1.0, [[0], [2], [3], [7], [11]]), geo.Box([-0.2], [0.05]))
    assert trace_stats(M)["trace"] == pytest.approx(1.25)


def test_trace_sq_from_counts_matches_dense():
    omega = geo.discretize(geo.annulus(0.5, 1.5, 2), 4.0)
    M = assemble(omega, geo.lshape(1.0, 0.4))
    fast = trace_stats(M)
    G = dense_reference(omega, geo.lshape(1.0, 0.4))
    assert fast["trace_sq"] == pytest.approx(float(np.sum(np.abs(G) ** 2)), rel=1e-12)


def test_assembly_errors():
    omega = geo.GridSet(1, 2.0, [[0], [1]])
    with pytest.raises(ValueError, match="fundamental cell"):
        assemble(omega, geo.box(2.5))
    with pytest.raises(ValueError, match="cap"):
        assemble(geo.GridSet(1, 2.0, [[i * i] for i in range(20)]), geo.box(0.5), cap=10)
    with pytest.raises(ValueError):
        assemble(geo.GridSet(1, 2.0, np.zeros((0, 1))), geo.box(0.5))
    with pytest.raises(ValueError):
        assemble(omega, geo.box(0.5, 0.5))


def test_symmetry_sectors_preserve_spectrum():
    omega = geo.discretize(geo.ball(2.0, 2), 4.0)
    F = geo.box(1.0, 0.6)
    M = assemble(omega, F)
    assert M.symmetric_axes == (0, 1)
    full = np.sort(np.linalg.eigvalsh(M.entries))[::-1]
    assert np.allclose(eigenvalues(M).eigenvalues, np.clip(full, 0, 1), atol=1e-12)
    assert sum(M.sector_sizes()) == len(omega)


def test_matrix_csv(tmp_path):
    M = assemble(geo.GridSet(1, 1.0, [[0], [1]]), geo.box(0.5))
    path = tmp_path / "m.csv"
    write_matrix_csv(M, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "row,col,re,im" and len(lines) == 5
    assert float(lines[2].split(",")[2]) == pytest.approx(1 / math.pi)


# -- oracle -------------------------------------------------------------------------

def test_oracle_two_by_two():
    lam = nystrom_oracle(geo.GridSet(1, 1.0, [[0], [1]]), geo.box(0.5), 512)
    assert np.allclose(lam[:2], [0.5 + 1 / math.pi, 0.5 - 1 / math.pi], atol=1e-3)


def test_oracle_block_in_unit_square():
    omega = geo.GridSet.block((3, 3))
    F = geo.box(1.0, 1.0)
    lam = nystrom_oracle(omega, F, 64)[:9]
    assert np.allclose(eigenvalues(assemble(omega, F)).eigenvalues, lam, atol=1e-3)


def test_oracle_single_frequency_converges_to_one():
    tops = [nystrom_oracle(geo.GridSet(1, 1.0, [[0]]), geo.box(1.0), n)[0] for n in (4, 64)]
    assert tops[-1] == pytest.approx(1.0, abs=1e-9)


def test_oracle_grid_cap():
    with pytest.raises(ValueError):
        nystrom_oracle(geo.GridSet.block((2, 2)), geo.box(1.0, 1.0), 80)


# -- invariants -----------------------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(st.sets(st.integers(-12, 12), min_size=1, max_size=12), st.integers(-50, 50),
       st.floats(-1.5, 0.0), st.floats(0.1, 1.5))
def test_shift_covariance(points, v, a, b):
    omega = geo.GridSet(1, 4.0, [[p] for p in points])
    F = geo.Box([a], [b])
    lam0 = eigenvalues(assemble(omega, F)).eigenvalues
    lam1 = eigenvalues(assemble(omega.translate([v]), F)).eigenvalues
    assert np.allclose(lam0, lam1, atol=1e-10)


def test_shift_covariance_two_dimensions():
    omega = geo.discretize(geo.lshape(2.0, 0.8), 3.0)
    F = geo.ball(0.9, 2)
    lam0 = eigenvalues(assemble(omega, F)).eigenvalues
    lam1 = eigenvalues(assemble(omega.translate([7, -3]), F)).eigenvalues
    assert np.allclose(lam0, lam1, atol=1e-10)


@pytest.mark.parametrize("F1,F2", [
    (geo.ball(0.5, 2), geo.ball(0.9, 2)),
    (geo.box_minus_ball(1.4, 0.5, 2), geo.box(1.4, 1.4)),
    (geo.Box([-0.2, -0.3], [0.1, 0.5]), geo.lshape(1.2, 0.3)),
])
def test_domain_monotonicity(F1, F2):
    omega = geo.discretize(geo.ball(1.5, 2), 3.0)
    lo = eigenvalues(assemble(omega, F1)).eigenvalues
    hi = eigenvalues(assemble(omega, F2)).eigenvalues
    assert np.all(lo <= hi + 1e-10)


def test_frequency_monotonicity():
    F = geo.ball(0.7, 2)
    small = geo.discretize(geo.ball(1.0, 2), 3.0)
    big = geo.discretize(geo.ball(1.6, 2), 3.0)
    assert small.as_set() <= big.as_set()
    a, b = eigenvalues(assemble(small, F)), eigenvalues(assemble(big, F))
    assert np.all(padded(a, len(big)) <= padded(b, len(big)) + 1e-10)


def test_dilation_gives_identical_entries():
    pts = geo.discretize(geo.ball(1.5, 2), 2.0).points
    F = geo.box(0.6, 0.8)
    G1 = assemble(geo.GridSet(2, 2.0, pts), F).entries
    for t in (2.0, 0.5, 4.0):
        G2 = assemble(geo.GridSet(2, 2.0 * t, pts), geo.dilate(F, t)).entries
        assert np.array_equal(G1, G2)
