"""Moment matching, multiplier plans, potentials and peak functions.

The flat space of type pi makes every stage auditable by hand: the
doubled phase is 2 pi x, blocks of mass 16 pi are length-8 intervals,
and the continuous log-potential has the primitive
(z - t) log(z - t) - (z - t), giving a closed-form check of the
quadrature.  The 2.5 Z lattice is the standard plan input; it forces
one pad in most blocks and one circle replacement.
"""

import json
import math

import numpy as np
import pytest

from dblab.spaces import ClosedFormPW, PhaseProfile
from dblab.sequences import RealSequence
from dblab.construct import (DensityMarginError, IllConditionedError,
                             MomentMatchError, MomentOverflowError,
                             MomentProblem, MultiplierPlan, PlanError,
                             PotentialField, _block_index, block_mass_balance,
                             block_moment_residuals, build_plan,
                             lagrange_interpolate, moment_match,
                             peak_decay_fit, peak_function, peak_lambda,
                             peak_mass_profile, verify_multiplier)

PI = math.pi


@pytest.fixture(scope="module")
def pw():
    return PhaseProfile(ClosedFormPW(a=PI))


@pytest.fixture(scope="module")
def lattice_plan(pw):
    lam = RealSequence(tuple(2.5 * k for k in range(-10, 11)))
    return build_plan(pw, lam, (-25, 25), epsilon_density_margin=0.6)


@pytest.fixture(scope="module")
def lattice_field(pw, lattice_plan):
    return PotentialField(pw, lattice_plan)


@pytest.fixture(scope="module")
def peak_stack(pw):
    lam = peak_lambda(pw, 0.0, (-60, 60))
    plan = build_plan(pw, lam, (-60, 60), epsilon_density_margin=0.5,
                      protect=(0.0,))
    field = PotentialField(pw, plan)
    peak = peak_function(pw, field, 0.0, m_poles=6)
    return plan, field, peak


# -- moment matching --------------------------------------------------------

def test_moment_match_lebesgue():
    """Two points matching the uniform measure on (-1, 1) sit at the
    Gauss-Legendre nodes +-1/sqrt(3)."""
    res = moment_match(MomentProblem(interval=(-1.0, 1.0), order=2,
                                     density=lambda x: np.ones_like(x)))
    got = sorted(z.real for z in res.points)
    root = 1.0 / math.sqrt(3.0)
    assert got[0] == pytest.approx(-root, abs=1e-9)
    assert got[1] == pytest.approx(root, abs=1e-9)
    assert all(z.imag == 0.0 for z in res.points)
    assert res.total_mass == pytest.approx(2.0, abs=1e-12)
    assert max(res.residuals) <= 1e-9


def test_moment_match_affine_equivariance():
    res = moment_match(MomentProblem(interval=(3.0, 7.0), order=2,
                                     density=lambda x: np.ones_like(x)))
    got = sorted(z.real for z in res.points)
    assert got[0] == pytest.approx(5.0 - 2.0 / math.sqrt(3.0), abs=1e-9)
    assert got[1] == pytest.approx(5.0 + 2.0 / math.sqrt(3.0), abs=1e-9)


def test_moment_match_pure_atoms():
    res = moment_match(MomentProblem(interval=(-1.0, 1.0), order=2,
                                     masses=((0.5, 2.0), (-0.5, 2.0))))
    got = sorted(z.real for z in res.points)
    assert got == pytest.approx([-0.5, 0.5], abs=1e-12)


def test_moment_match_order_one_is_centroid():
    res = moment_match(MomentProblem(interval=(-1.0, 1.0), order=1,
                                     masses=((0.3, 1.0),)))
    assert res.points[0] == pytest.approx(0.3 + 0.0j, abs=1e-12)


def test_moment_match_mass_permutation_invariance():
    masses = ((0.1, 1.0), (-0.7, 2.0), (0.4, 0.5))
    a = moment_match(MomentProblem(interval=(-1.0, 1.0), order=3,
                                   masses=masses))
    b = moment_match(MomentProblem(interval=(-1.0, 1.0), order=3,
                                   masses=masses[::-1]))
    pa = sorted(a.points, key=lambda z: (z.real, z.imag))
    pb = sorted(b.points, key=lambda z: (z.real, z.imag))
    assert all(abs(x - y) <= 1e-12 for x, y in zip(pa, pb))


def test_moment_match_total_mass_override():
    prob = MomentProblem(interval=(-1.0, 1.0), order=2,
                         density=lambda x: np.ones_like(x))
    exact = moment_match(MomentProblem(interval=(-1.0, 1.0), order=2,
                                       density=lambda x: np.ones_like(x),
                                       total_mass=2.0))
    free = moment_match(prob)
    assert sorted(z.real for z in exact.points) == pytest.approx(
        sorted(z.real for z in free.points), abs=1e-12)


def test_moment_match_failure_modes():
    with pytest.raises(MomentOverflowError):
        moment_match(MomentProblem(interval=(-1.0, 1.0), order=2,
                                   masses=((1e7, 1.0),)))
    with pytest.raises(ValueError):
        moment_match(MomentProblem(interval=(-1.0, 1.0), order=0))
    with pytest.raises(ValueError):
        moment_match(MomentProblem(interval=(1.0, 1.0), order=1,
                                   masses=((0.5, 1.0),)))
    with pytest.raises(ValueError):
        moment_match(MomentProblem(interval=(-1.0, 1.0), order=1,
                                   masses=((0.5, 1.0), (-0.5, -1.0))))
    with pytest.raises(MomentMatchError):
        moment_match(MomentProblem(interval=(-1.0, 1.0), order=2,
                                   density=lambda x: np.cos(1e6 * x) + 2.0))


def test_root_of_unity_moment_identity():
    """sum_l (z + tau w^l)^j = n z^j for j < n, and picks up exactly
    n tau^n at j = n; this is what makes circle replacement safe."""
    z, tau = 0.37 + 0.21j, 0.13
    for n in (2, 3, 5):
        circle = [z + tau * np.exp(2j * PI * ell / n) for ell in range(n)]
        for j in range(n):
            total = sum(c ** j for c in circle)
            assert abs(total - n * z ** j) <= 1e-12
        drift = sum(c ** n for c in circle) - n * z ** n
        assert abs(drift - n * tau ** n) <= 1e-12


# -- plan assembly ----------------------------------------------------------

def test_plan_shape_on_lattice(lattice_plan):
    plan = lattice_plan
    assert (plan.M, plan.n) == (8, 2)
    assert plan.block_count == 6
    assert plan.eta == pytest.approx(1.25 * PI, abs=1e-12)
    assert len(plan.lambda_used) == 19
    assert plan.lambda_excluded == (-25.0, 25.0)  # outside the trimmed window
    assert len(plan.lambda_block) == len(plan.lambda_used)
    assert all(0 <= b < plan.block_count for b in plan.lambda_block)


def test_plan_mass_balance_is_exact(lattice_plan):
    assert block_mass_balance(lattice_plan) == 0


def test_plan_padding_stays_in_block(lattice_plan):
    plan = lattice_plan
    for k in range(plan.block_count):
        for q in plan.padded[k]:
            assert plan.edges_x[k] <= q <= plan.edges_x[k + 1]
    assert plan.sep_psi_after >= 0.5 * plan.sep_psi_original * (1 - 1e-9)


def test_plan_moment_residuals(pw, lattice_plan):
    res = block_moment_residuals(pw, lattice_plan)
    assert max(max(r) for r in res if r) <= 1e-7


def test_plan_triggers_circle_replacement(pw, lattice_plan):
    """One lattice block places a moment point within eta/5 of a mass;
    its replacement preserves moments below n but drifts at j = n."""
    plan = lattice_plan
    replaced = [k for k, blk in enumerate(plan.sigma) if len(blk) > plan.n]
    assert replaced
    assert plan.min_sigma_scaled_dist >= plan.eta / 5.0 * (1 - 1e-9)
    res = block_moment_residuals(pw, plan, up_to=plan.n)
    assert res[replaced[0]][plan.n - 1] > 1e-4
    kept = next(k for k in range(plan.block_count) if k not in replaced)
    assert max(res[kept]) <= 1e-7


def test_plan_json_round_trip(lattice_plan):
    doc = json.loads(json.dumps(lattice_plan.to_json()))
    back = MultiplierPlan.from_json(doc)
    assert back == lattice_plan


def test_plan_rejection_paths(pw):
    lam = RealSequence(tuple(2.5 * k for k in range(-10, 11)))
    dense = RealSequence(tuple(0.5 * k for k in range(-50, 51)))
    with pytest.raises(DensityMarginError):
        build_plan(pw, dense, (-25, 25), epsilon_density_margin=0.6)
    with pytest.raises(PlanError):
        build_plan(pw, lam, (-4, 4), epsilon_density_margin=0.6)
    with pytest.raises(PlanError):
        build_plan(pw, lam, (-25, 25), epsilon_density_margin=0.6, n=2, M=2)
    with pytest.raises(PlanError):
        build_plan(pw, RealSequence((0.0,)), (-25, 25),
                   epsilon_density_margin=0.6)
    with pytest.raises(ValueError):
        build_plan(pw, lam, (-25, 25), epsilon_density_margin=1.5)


def test_block_index_edge_snap():
    edges = [0.0, 10.0, 20.0, 30.0]
    assert _block_index(edges, 5.0) == 0
    assert _block_index(edges, 10.0) == 1
    assert _block_index(edges, 10.0 - 1e-12) == 1   # snapped up
    assert _block_index(edges, -1e-12) == 0         # snapped in from below
    assert _block_index(edges, -0.5) == -1
    assert _block_index(edges, 30.0) == -1          # top edge is outside
    assert _block_index(edges, 30.0 - 1e-12) == -1
    assert _block_index(edges, 29.5) == 2


# -- potential --------------------------------------------------------------

def test_potential_continuous_part_closed_form(pw, lattice_plan,
                                               lattice_field):
    """phi'/pi = 1 here, so the continuous potential is
    Re[(z-A)log(z-A) - (z-B)log(z-B)] - (B-A)."""
    plan, field = lattice_plan, lattice_field
    z = complex(3.3, 0.9)
    disc = -sum(math.log(abs(z - p)) for p in plan.lambda_full())
    disc -= sum(m * math.log(abs(z - s))
                for blk in plan.sigma for s, m in blk)
    A, B = plan.edges_x[0], plan.edges_x[-1]
    oracle = ((z - A) * np.log(z - A) - (z - B) * np.log(z - B)).real - (B - A)
    assert field.w(z) - disc == pytest.approx(oracle, abs=1e-9)


def test_potential_atoms_and_removal(lattice_plan, lattice_field):
    plan, field = lattice_plan, lattice_field
    lam0 = plan.lambda_used[3]
    assert field.w(lam0) == math.inf
    reduced = field.with_poles_removed([lam0])
    assert math.isfinite(reduced.w(lam0))
    z = complex(1.234, 0.5)
    assert reduced.w(z) == pytest.approx(
        field.w(z) + math.log(abs(z - lam0)), abs=1e-9)
    with pytest.raises(ValueError):
        field.with_poles_removed([123.456])


def test_verify_multiplier_report(pw, lattice_field):
    rep = verify_multiplier(pw, lattice_field)
    assert math.isfinite(rep.sup_minus_w)
    assert rep.ratios
    assert all(r.ratio_min > 0 for r in rep.ratios)
    assert rep.spread_max < 10.0
    assert 0 < rep.deriv_anchor_min <= rep.deriv_anchor_max < math.inf


# -- peak functions ---------------------------------------------------------

def test_peak_lambda_layout(pw):
    seq = peak_lambda(pw, 0.0, (-60, 60))
    assert len(seq) == 58
    assert seq.points[0] == -58.0 and seq.points[-1] == 58.0
    assert 0.0 not in seq.points
    assert seq.separation_eps == 2 * PI
    off = peak_lambda(pw, 0.3, (-20, 20))
    ks = np.round((off.array() - 0.3) / 2.0)
    assert np.allclose(off.array(), 0.3 + 2.0 * ks, atol=1e-9)
    assert np.all(np.abs(off.array()) < 20.0)       # window is open


def test_peak_normalization_and_zeros(peak_stack):
    plan, field, peak = peak_stack
    assert peak(0.0) == 1.0
    assert peak(8.0) == 0.0          # an atom still in the mass list
    assert peak(2.0) > 0.0           # a divided pole, no singularity left
    assert peak(2.0001) == pytest.approx(peak(2.0), rel=0.05)


def test_peak_protect_keeps_padding_away(peak_stack):
    plan, _, _ = peak_stack
    pads = [q for blk in plan.padded for q in blk]
    assert all(abs(q) > 0.5 for q in pads)


def test_peak_decay_fit(pw, peak_stack):
    _, _, peak = peak_stack
    fit = peak_decay_fit(pw, peak, d_lo=7.0, d_hi=40.0)
    # six divided poles give a decay order near -6
    assert -7.5 < fit["slope"] < -4.5
    assert fit["points"] >= 4
    with pytest.raises(ValueError):
        peak_decay_fit(pw, peak, d_lo=100.0, d_hi=200.0)  # outside the window


def test_peak_mass_concentrates(pw, peak_stack):
    _, _, peak = peak_stack
    mass = peak_mass_profile(pw, peak, d_cut=20.0, d_max=55.0)
    assert mass["total"] > 0
    assert mass["core"] <= mass["total"]
    assert mass["tail_fraction"] < 1e-6


def test_peak_validation(pw, peak_stack):
    plan, field, _ = peak_stack
    with pytest.raises(ValueError):
        peak_function(pw, field, 0.0, m_poles=0)
    with pytest.raises(ValueError):
        peak_function(pw, field, 0.0, m_poles=10 ** 6)
    real_sigma = [z.real for blk in plan.sigma for z, m in blk
                  if z.imag == 0.0]
    assert real_sigma
    with pytest.raises(ValueError):
        peak_function(pw, field, real_sigma[0], m_poles=2)


# -- Lagrange interpolation -------------------------------------------------

def test_lagrange_reproduces_node_data(pw, lattice_plan):
    rng = np.random.default_rng(7)
    values = rng.standard_normal(len(lattice_plan.lambda_used))
    F = lagrange_interpolate(pw, lattice_plan, values)
    nodes = np.asarray(lattice_plan.lambda_used)
    assert np.max(np.abs(F(nodes) - values)) == 0.0
    for blk in lattice_plan.padded:
        for q in blk:
            assert F(q) == 0.0
    for blk in lattice_plan.sigma:
        for z, _ in blk:
            if z.imag == 0.0:
                assert F(z.real) == 0.0
    assert np.isfinite(F.norm_windowed(lattice_plan.window, grid_n=401))


def test_lagrange_bare_sequence(pw):
    F = lagrange_interpolate(pw, RealSequence((0.0, 1.0, 3.0)),
                             [1.0, 0.0, 0.0])
    # classical Lagrange: (x-1)(x-3)/((0-1)(0-3)) at x = 2
    assert F(2.0) == pytest.approx(-1.0 / 3.0, abs=1e-12)
    assert F(0.0) == 1.0


def test_lagrange_validation(pw):
    with pytest.raises(IllConditionedError):
        lagrange_interpolate(pw, RealSequence((0.0, 5e-13)), [1.0, 2.0])
    with pytest.raises(ValueError):
        lagrange_interpolate(pw, RealSequence((0.0, 1.0)), [1.0])
