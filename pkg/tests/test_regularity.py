"""Doubling and comparability probes against elementary measures.

The flat space doubles with ratio exactly 2; the single arctan zero
gives mu(I) = arctan(hi) - arctan(lo), so every probe has a closed
form.  The geometric chain is the non-doubling witness.
"""

import math

import pytest

from dblab.spaces import ClosedFormPW, FiniteZeros, GeometricChain, PhaseProfile
from dblab.regularity import (comparability_check, distortion_check,
                              doubling_ratio, doubling_scan,
                              local_doubling_check, profile_csv_rows,
                              regularity_report)

PI = math.pi


@pytest.fixture(scope="module")
def pw():
    return PhaseProfile(ClosedFormPW(a=PI))


@pytest.fixture(scope="module")
def arctan():
    return PhaseProfile(FiniteZeros((-1j,)))


def test_doubling_ratio_closed_forms(pw, arctan):
    assert doubling_ratio(pw, -1.0, 1.0) == pytest.approx(2.0, abs=1e-12)
    assert doubling_ratio(pw, 3.0, 3.5) == pytest.approx(2.0, abs=1e-12)
    assert doubling_ratio(arctan, -1.0, 1.0) == pytest.approx(
        math.atan(2.0) / math.atan(1.0), abs=1e-12)
    with pytest.raises(ValueError):
        doubling_ratio(pw, 1.0, 1.0)


def test_flat_scan_is_exactly_doubling(pw):
    rep = doubling_scan(pw, (-4, 4), scales=[1.0, 0.5], centers_per_scale=5)
    assert rep.ratio_sup == pytest.approx(2.0, abs=1e-12)
    assert rep.gamma_est == pytest.approx(1.0, abs=1e-12)
    assert rep.witness.ratio == rep.ratio_sup
    # all intersecting probe pairs are consistent with gamma = 1
    assert rep.lemma_K == pytest.approx(1.0, abs=1e-9)


def test_scan_skips_oversized_scales(pw):
    rep = doubling_scan(pw, (-1, 1), scales=[0.4, 10.0], centers_per_scale=4)
    assert {p.scale for p in rep.probes} == {0.4}
    with pytest.raises(ValueError):
        doubling_scan(pw, (-1, 1), scales=[10.0])


def test_chain_ratio_grows_with_scale():
    """Doubling fails along the geometric chain: the ratio increases
    without bound as the probe interval scales up."""
    chain = PhaseProfile(GeometricChain(base=2.0, depth=40))
    r_small = doubling_ratio(chain, 50.0, 150.0)
    r_large = doubling_ratio(chain, 500.0, 1500.0)
    assert r_small > 3.0
    assert r_large > r_small


def test_local_doubling_functional(pw, arctan):
    flat = local_doubling_check(pw, (-5, 5), grid_n=101)
    assert flat.sup == 0.0
    curved = local_doubling_check(arctan, (-1, 1), grid_n=4001)
    # |phi''| / phi'^2 = 2|x| for the arctan phase
    assert curved.sup == pytest.approx(2.0, abs=1e-12)
    assert abs(curved.argmax) == pytest.approx(1.0, abs=1e-12)


def test_comparability(pw, arctan):
    flat = comparability_check(pw, (-5, 5), pairs=100, d_max=1.0, seed=0)
    assert flat.ratio_min == 1.0
    assert flat.ratio_max == 1.0
    rep = comparability_check(arctan, (-1, 1), pairs=400, d_max=0.1, seed=0)
    # |log ratio| <= sup(|phi''|/phi'^2) * d = 2 * 0.1 on this window
    assert math.exp(-0.2) - 1e-9 <= rep.ratio_min <= 1.0
    assert 1.0 <= rep.ratio_max <= math.exp(0.2) + 1e-9


def test_flat_distortion_is_trivial(pw):
    rep = distortion_check(pw, (-10, 10), pairs=200, r_split=1.0, seed=0)
    assert rep.near_min == pytest.approx(1.0, abs=1e-8)
    assert rep.near_max == pytest.approx(1.0, abs=1e-8)
    assert rep.alpha_fit == pytest.approx(1.0, abs=1e-9)
    assert rep.far_pairs > 0


def test_regularity_report_structure(pw):
    rep = regularity_report(pw, (-4, 4), scales=[1.0, 0.5],
                            centers_per_scale=4, grid_n=101, pairs=50)
    doc = rep.to_json()
    assert set(doc) == {"window", "doubling", "local", "comparability",
                        "distortion"}
    assert doc["window"] == [-4.0, 4.0]
    assert doc["doubling"]["gamma_est"] == pytest.approx(1.0, abs=1e-12)
    assert len(doc["doubling"]["probes"]) > 0


def test_profile_csv_rows(pw):
    rows = profile_csv_rows(pw, (-1, 1), grid_n=11)
    assert len(rows) == 11
    xs = [r[0] for r in rows]
    assert xs[0] == -1.0 and xs[-1] == 1.0
    assert all(r[1] == pytest.approx(PI, abs=1e-14) for r in rows)
    assert all(r[2] == 0.0 for r in rows)
