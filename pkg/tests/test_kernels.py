"""Reproducing kernels, Gram bounds and minimal-norm interpolation.

On the flat space of type pi the normalized kernel is the cardinal
sinc, integer nodes are orthonormal, and the minimal-norm interpolant
of delta data is sinc itself; those identities pin down every code
path to machine precision.  The Bernstein ratio has the exact oracle
1/sqrt(3) for a single node.
"""

import math

import numpy as np
import pytest

from dblab.spaces import ClosedFormPW, FiniteZeros, PhaseProfile
from dblab.sequences import RealSequence, generate_by_phase, perturb
from dblab.kernels import (IllPosedWindowError, QuadGridError,
                           bernstein_ratio, carleson_constant, cross_gram,
                           frame_bounds, gram, kernel, min_norm_interpolant,
                           on_nodes, riesz_bounds)

PI = math.pi


@pytest.fixture(scope="module")
def pw():
    return PhaseProfile(ClosedFormPW(a=PI))


@pytest.fixture(scope="module")
def fz():
    return PhaseProfile(FiniteZeros(tuple(complex(k, -1.0)
                                          for k in range(-6, 7))))


def test_kernel_is_sinc_on_flat_space(pw):
    for x, y in [(0.3, -1.7), (2.0, 2.0), (0.25, 0.75)]:
        kv = kernel(pw, x, y)
        assert kv.K == pytest.approx(float(np.sinc(x - y)), abs=1e-12)
        assert kv.norm_sq_x == pytest.approx(1.0, abs=1e-12)
        assert kv.norm_sq_y == pytest.approx(1.0, abs=1e-12)


def test_kernel_near_diagonal_stays_smooth(pw):
    kv = kernel(pw, 0.4, 0.4 + 1e-9)   # below the phase-gap switch
    assert abs(kv.K - 1.0) < 1e-12


def test_cross_gram_matches_sinc_table(pw):
    left = np.array([-1.3, 0.0, 0.5])
    right = np.array([-1.3, 0.2, 2.0, 7.5])
    g = cross_gram(pw, left, right)
    assert np.allclose(g, np.sinc(left[:, None] - right[None, :]),
                       rtol=0, atol=1e-12)


def test_kernel_translation_invariance(pw):
    xs = np.array([0.1, 0.9, 3.7])
    ys = xs + 11.25
    assert np.allclose(cross_gram(pw, xs + 0.6, xs),
                       cross_gram(pw, ys + 0.6, ys), rtol=0, atol=1e-12)


def test_orthonormal_nodes_give_identity_gram(pw):
    nodes = on_nodes(pw, (-15.0, 15.0))
    g = gram(pw, nodes)
    assert np.allclose(g, np.eye(len(nodes)), rtol=0, atol=1e-12)
    assert np.all(np.diag(g) == 1.0)


def test_riesz_bounds(pw):
    nodes = on_nodes(pw, (-15.0, 15.0))
    rep = riesz_bounds(pw, nodes)
    assert rep.mode == "riesz"
    assert rep.eig_min == pytest.approx(1.0, abs=1e-10)
    assert rep.eig_max == pytest.approx(1.0, abs=1e-10)
    assert rep.condition == pytest.approx(1.0, abs=1e-9)
    assert len(rep.witness) == len(nodes)
    with pytest.raises(ValueError):
        riesz_bounds(pw, RealSequence((0.0,)))


def test_riesz_survives_smooth_jitter(pw):
    base = generate_by_phase(pw, (-15.2, 15.2), step=PI)
    moved = perturb(base, lambda p: 0.1 * math.sin(3.7 * p))
    rep = riesz_bounds(pw, moved)
    assert 0.5 < rep.eig_min <= rep.eig_max < 1.6
    assert rep.condition < 3.0


def test_frame_bounds_identity_case(pw):
    samples = on_nodes(pw, (-20.0, 20.0))
    rep = frame_bounds(pw, samples, trim_margin=4)
    assert rep.mode == "frame"
    assert rep.eig_min == pytest.approx(1.0, abs=1e-12)
    assert rep.eig_max == pytest.approx(1.0, abs=1e-12)
    assert rep.trim_margin == 4


def test_frame_bounds_oversampling(pw):
    """Doubling the sample density doubles the upper frame bound; the
    lower bound stays within the edge-leakage band."""
    dense = generate_by_phase(pw, (-20.2, 20.2), step=PI / 2)
    rep = frame_bounds(pw, dense, trim_margin=4)
    assert rep.eig_max == pytest.approx(2.0, abs=1e-9)
    assert 1.5 < rep.eig_min <= rep.eig_max


def test_frame_bounds_validation(pw):
    samples = on_nodes(pw, (-10.0, 10.0))
    with pytest.raises(ValueError):
        frame_bounds(pw, samples, trim_margin=50)
    with pytest.raises(ValueError):
        frame_bounds(pw, samples, basis_window=(-30.0, 30.0), trim_margin=1)
    with pytest.raises(ValueError):
        frame_bounds(pw, RealSequence((0.0,)))


def test_min_norm_delta_is_cardinal_sinc(pw):
    seq = generate_by_phase(pw, (-20.2, 20.2), step=PI)
    values = np.zeros(len(seq))
    values[len(seq) // 2] = 1.0      # delta at the node x = 0
    mn = min_norm_interpolant(pw, seq, values)
    for x in (-2.7, -0.4, 0.0, 0.33, 1.9):
        assert mn(x) == pytest.approx(float(np.sinc(x)), abs=1e-12)
    assert np.max(np.abs(mn.residuals(values))) <= 1e-12
    assert mn.norm_sq == pytest.approx(1.0, abs=1e-12)


def test_min_norm_general_data(fz):
    seq = generate_by_phase(fz, (-4.0, 4.0), step=PI)
    rng = np.random.default_rng(11)
    values = rng.standard_normal(len(seq))
    mn = min_norm_interpolant(fz, seq, values)
    assert np.max(np.abs(mn.residuals(values))) <= 1e-8
    assert mn.norm_sq > 0


def test_min_norm_rejects_degenerate_nodes(pw):
    with pytest.raises(IllPosedWindowError):
        min_norm_interpolant(pw, RealSequence((0.0, 1e-9, 5.0)),
                             [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        min_norm_interpolant(pw, RealSequence((0.0, 1.0)), [1.0])


def test_bernstein_single_node_oracle():
    """For f = ktilde_0 in the type-1 space, ||f'||^2 = 1/3 ||f||^2, so
    the reported ratio is 1/sqrt(3).  The grid truncation at |x| = 300
    loses about 1/(300 pi) of the derivative energy."""
    p1 = PhaseProfile(ClosedFormPW(a=1.0))
    grid = np.linspace(-300.0, 300.0, 6501)
    ratio = bernstein_ratio(p1, [1.0], RealSequence((0.0,)), grid)
    assert ratio == pytest.approx(1.0 / math.sqrt(3.0), abs=2e-3)


def test_bernstein_respects_unit_bound(pw):
    nodes = generate_by_phase(pw, (-10.2, 10.2), step=PI)
    coeffs = np.random.default_rng(3).standard_normal(len(nodes))
    grid = np.linspace(-150.0, 150.0, 10001)
    ratio = bernstein_ratio(pw, coeffs, nodes, grid)
    assert 0.0 < ratio < 1.0 + 1e-3


def test_bernstein_grid_validation(pw):
    nodes = RealSequence((0.0,))
    with pytest.raises(QuadGridError):
        bernstein_ratio(pw, [1.0], nodes, np.linspace(-5, 5, 21))  # too coarse
    with pytest.raises(QuadGridError):
        bernstein_ratio(pw, [1.0], nodes, np.linspace(-1, 1, 5))   # too few
    bad = np.concatenate((np.linspace(-1, 0, 50), np.geomspace(0.01, 1, 50)))
    with pytest.raises(QuadGridError):
        bernstein_ratio(pw, [1.0], nodes, bad)                     # non-uniform
    with pytest.raises(ValueError):
        bernstein_ratio(pw, [1.0, 2.0], nodes, np.linspace(-2, 2, 201))


def test_carleson_unit_atoms(pw):
    masses = [(float(k), 1.0) for k in range(-10, 11)]
    rep = carleson_constant(pw, masses, (-10, 10))
    # phase spacing pi > 1 admits one atom per unit window, weight phi' = pi
    assert rep["constant"] == pytest.approx(PI, abs=1e-9)
    assert rep["atoms_in_window"] == 21
    widened = carleson_constant(pw, masses + [(100.0, 5.0)], (-10, 10))
    assert widened["constant"] == rep["constant"]
    with pytest.raises(ValueError):
        carleson_constant(pw, masses, (0.0, 0.2))
