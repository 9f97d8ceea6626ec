import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from illposed import selection as sel
from illposed.solvers import SolverPath


def picard(clean, noise):
    clean, noise = np.asarray(clean, float), np.asarray(noise, float)
    return sel.PicardData(np.ones_like(clean), clean, noise, clean + noise)


def test_transition_hand_example():
    assert sel.transition_k0(picard([1, 0.1, 0.01], [0.05, 0.05, 0.05])) == (2, True)


def test_transition_noise_free():
    assert sel.transition_k0(picard([1, 0.1, 0.01], [0, 0, 0])) == (3, False)


def test_transition_first_crossing():
    # two crossings: the first one wins
    assert sel.transition_k0(picard([1, 0.01, 1, 0.01], [0.1] * 4)).k0 == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_transition_scale_invariant(seed, c):
    r = np.random.default_rng(seed)
    clean = np.exp(-np.arange(20) * r.uniform(0.2, 2))
    noise = np.abs(r.standard_normal(20)) * 1e-4
    assert sel.transition_k0(picard(clean, noise)) == sel.transition_k0(picard(c * clean, c * noise))


def test_transition_shaw_golden_and_monotone(lab):
    k0 = {}
    for eps in (1e-2, 1e-3, 1e-4):
        inst = lab.instance("shaw", eps)
        k0[eps] = sel.transition_k0(sel.PicardData.from_instance(lab.svd("shaw"), inst)).k0
    assert k0[1e-3] == 7
    assert k0[1e-2] < k0[1e-4]


def test_picard_data_from_instance(lab):
    inst = lab.instance("wing", 1e-2, 16)
    p = sel.PicardData.from_instance(lab.svd("wing", 16), inst)
    for arr in (p.sigma, p.coeffs_clean, p.coeffs_noise, p.coeffs_total):
        assert arr.shape == (16,) and np.all(arr >= 0)


# -- L-curve -----------------------------------------------------------------------
def two_segments(j_star, n=12):
    x = np.concatenate([np.linspace(5, 1, j_star + 1), np.full(n - j_star - 1, 1.0) - np.arange(1, n - j_star) * 1e-2])
    y = np.concatenate([np.full(j_star + 1, 1.0) + np.arange(j_star + 1) * 1e-2, np.linspace(1.2, 6, n - j_star - 1)])
    return x, y


@pytest.mark.parametrize("j_star", [2, 5, 8])
def test_corner_of_synthetic_l(j_star):
    x, y = two_segments(j_star)
    assert sel.lcurve_corner(x, y) == j_star


def test_collinear_has_no_corner():
    t = np.arange(10.0)
    with pytest.raises(sel.NoCorner):
        sel.lcurve_corner(-t, 2 * t + 1)


def test_too_few_points():
    with pytest.raises(sel.NoCorner):
        sel.lcurve_corner([3, 2, 1], [1, 2, 3])
    # non-monotone points are pruned before counting
    with pytest.raises(sel.NoCorner, match="after monotone pruning"):
        sel.lcurve_corner([3, 2, 2.5, 1, 1.5], [1, 2, 0, 3, 0])


def test_invalid_input():
    with pytest.raises(ValueError, match="finite"):
        sel.lcurve_corner([3, 2, 1, np.nan], [1, 2, 3, 4])
    with pytest.raises(ValueError, match="equal length"):
        sel.lcurve_corner([3, 2, 1, 0], [1, 2, 3])
    with pytest.raises(ValueError, match="nonnegative"):
        sel.lcurve_corner(*two_segments(3), min_separation=-1)


def test_tie_goes_to_smaller_index():
    # a staircase of dyadic coordinates: bends at indices 1 and 3 are bitwise identical
    x = np.array([6.0, 5.0, 4.0, 3.0, 2.0, 1.0])
    y = np.array([0.0, 0.125, 1.125, 1.25, 2.25, 2.375])
    assert sel.lcurve_corner(x, y) == 1


def test_stagnating_tail_is_ignored():
    x, y = two_segments(4)
    # a cluster of nearly coincident late points would otherwise dominate the curvature
    tail_x = x[-1] - 1e-9 * np.arange(1, 6)
    tail_y = y[-1] + 1e-9 * np.array([1, 1, 3, 3, 5])
    assert sel.lcurve_corner(np.r_[x, tail_x], np.r_[y, tail_y]) == 4
    assert sel.lcurve_corner(np.r_[x, tail_x], np.r_[y, tail_y], min_separation=0.0) != 4


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.floats(-50, 50), st.floats(-50, 50))
def test_corner_shift_invariant(j_star, cx, cy):
    x, y = two_segments(j_star)
    assert sel.lcurve_corner(x + cx, y + cy) == sel.lcurve_corner(x, y)


def test_corner_matches_oracle_on_shaw(lab):
    path = lab.lsqr("shaw", 1e-3)
    assert abs(sel.lcurve_k(path) - sel.oracle_best_k(path)) <= 2


# -- oracle --------------------------------------------------------------------------
def _path(errors):
    e = np.asarray(errors, float)
    k = np.arange(1, e.size + 1)
    return SolverPath("x", k, np.zeros((e.size, 1)), np.ones(e.size), np.ones(e.size), e)


def test_oracle_convex_and_flat():
    assert sel.oracle_best_k(_path([3, 2, 1, 2, 3])) == 3
    assert sel.oracle_best_k(_path([1, 1, 1])) == 1
    with pytest.raises(ValueError, match="x_true"):
        sel.oracle_best_k(SolverPath("x", np.arange(1, 3), np.zeros((2, 1)), np.ones(2), np.ones(2)))


@pytest.mark.parametrize("name", ["shaw", "heat", "phillips"])
def test_oracle_no_worse_than_lcurve(lab, name):
    path = lab.lsqr(name, 1e-3)
    assert path.relative_errors[sel.oracle_best_k(path) - 1] <= path.relative_errors[sel.lcurve_k(path) - 1]
