"""Acceptance battery: eleven numbered criteria, one pass/fail each.

Each criterion is a self-contained experiment with frozen configuration
and seeds, returning a CriterionResult whose detail payload carries the
measured numbers alongside the thresholds.  The suite is the single
source of truth for both the test suite and the CLI `suite` command.

Trend criteria compare a quantity across a ladder of window sizes; the
flat space PW(pi) uses node ladders 32/64/128, while the finite-zero
space has only 20 pi of total phase, so its ladders are scaled to fit
the budget (the trend notion and tolerances are unchanged).
"""

from __future__ import annotations

import math
import time

from dataclasses import dataclass

import numpy as np

from .spaces import ClosedFormPW, FiniteZeros, GeometricChain, PhaseProfile
from .sequences import RealSequence, generate_by_phase
from .regularity import doubling_scan, local_doubling_check
from .kernels import (bernstein_ratio, frame_bounds, gram,
                      min_norm_interpolant, on_nodes, riesz_bounds)
from .construct import (MomentProblem, PotentialField, block_moment_residuals,
                        build_plan, lagrange_interpolate, moment_match,
                        peak_decay_fit, peak_function, peak_lambda,
                        peak_mass_profile, verify_multiplier)

PI = math.pi


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    runtime_s: float
    detail: dict

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d}: {self.name} " \
               f"({self.runtime_s:.2f}s)"

    def to_json(self):
        return {"number": self.number, "name": self.name,
                "passed": self.passed, "runtime_s": self.runtime_s,
                "detail": self.detail}


@dataclass(frozen=True)
class SuiteResult:
    results: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self):
        out = [r.line() for r in self.results]
        out.append(f"suite: {'PASS' if self.passed else 'FAIL'} "
                   f"({sum(r.passed for r in self.results)}/"
                   f"{len(self.results)} criteria)")
        return out

    def to_json(self):
        return {"passed": self.passed,
                "results": [r.to_json() for r in self.results]}


def _pw() -> PhaseProfile:
    return PhaseProfile(ClosedFormPW(a=PI))


def _fz() -> PhaseProfile:
    return PhaseProfile(FiniteZeros(tuple(complex(a, -1.0)
                                          for a in range(-10, 10))))


def _central(seq: RealSequence, count: int) -> RealSequence:
    pts = seq.points
    if len(pts) < count:
        raise ValueError(f"only {len(pts)} nodes for a {count}-node window")
    start = (len(pts) - count) // 2
    return RealSequence(pts[start:start + count],
                        separation_eps=seq.separation_eps)


def _frame_ladder(profile, step, sizes, window, trim):
    base = generate_by_phase(profile, window, step=step)
    return [frame_bounds(profile, _central(base, m), trim_margin=trim)
            for m in sizes]


def _riesz_ladder(profile, step, sizes, window):
    base = generate_by_phase(profile, window, step=step)
    return [riesz_bounds(profile, _central(base, m)) for m in sizes]


def _rel_spread(values) -> float:
    """Half-width of the value range relative to the mean."""
    mean = sum(values) / len(values)
    return (max(values) - min(values)) / mean if mean > 0 else math.inf


def criterion_1() -> CriterionResult:
    """Flat-space orthonormal baseline: integer nodes, identity Gram."""
    t0 = time.perf_counter()
    prof = _pw()
    nodes = on_nodes(prof, (-32.2, 31.8), alpha=0.0)   # integers -32..31
    g = gram(prof, nodes)
    off = g - np.eye(len(nodes))
    max_off = float(np.max(np.abs(off)))
    # basis alpha matches the samples so the frame matrix is the Gram
    fb = frame_bounds(prof, nodes, trim_margin=4, alpha=0.0)
    rt = time.perf_counter() - t0
    ok = (len(nodes) == 64 and max_off <= 1e-10
          and abs(fb.eig_min - 1.0) <= 1e-6 and abs(fb.eig_max - 1.0) <= 1e-6
          and rt < 10.0)
    return CriterionResult(1, "orthonormal baseline on the flat space", ok, rt,
                           {"nodes": len(nodes), "max_offdiag": max_off,
                            "frame_A": fb.eig_min, "frame_B": fb.eig_max,
                            "runtime_limit_s": 10.0})


def criterion_2() -> CriterionResult:
    """Oversampled frame bound stays put across 32/64/128-node windows."""
    t0 = time.perf_counter()
    prof = _pw()
    reports = _frame_ladder(prof, PI / 1.2, (32, 64, 128), (-90, 90), trim=4)
    a_vals = [r.eig_min for r in reports]
    rt = time.perf_counter() - t0
    spread = _rel_spread(a_vals)
    ok = spread < 0.20 and min(a_vals) >= 0.02 and rt < 30.0
    return CriterionResult(2, "oversampled frame bound stability", ok, rt,
                           {"A_by_size": dict(zip(("32", "64", "128"), a_vals)),
                            "relative_spread": spread,
                            "spread_limit": 0.20, "floor": 0.02,
                            "runtime_limit_s": 30.0})


def criterion_3() -> CriterionResult:
    """Undersampled frame bound collapses with window growth."""
    t0 = time.perf_counter()
    prof = _pw()
    reports = _frame_ladder(prof, 1.25 * PI, (32, 64, 128), (-110, 110), trim=4)
    a_vals = [r.eig_min for r in reports]
    rt = time.perf_counter() - t0
    ok = a_vals[-1] <= 0.5 * a_vals[0] and rt < 30.0
    return CriterionResult(3, "undersampled frame bound decay", ok, rt,
                           {"A_by_size": dict(zip(("32", "64", "128"), a_vals)),
                            "decay_factor": a_vals[0] / a_vals[-1]
                            if a_vals[-1] > 0 else math.inf,
                            "required_factor": 2.0, "runtime_limit_s": 30.0})


def criterion_4() -> CriterionResult:
    """Interpolation bounds: sparse nodes stable, dense nodes degenerate."""
    t0 = time.perf_counter()
    prof = _pw()
    sparse = [r.eig_min for r in
              _riesz_ladder(prof, 1.2 * PI, (32, 64, 128), (-110, 110))]
    dense = [r.eig_min for r in
             _riesz_ladder(prof, 0.8 * PI, (32, 64, 128), (-70, 70))]
    rt = time.perf_counter() - t0
    mean = sum(sparse) / len(sparse)
    stable = all(abs(v - mean) <= 0.20 * mean for v in sparse)
    ok = (stable and min(sparse) >= 0.05
          and dense[-1] <= 0.5 * dense[0])
    return CriterionResult(4, "interpolation bounds in both regimes", ok, rt,
                           {"sparse_eig_min": dict(zip(("32", "64", "128"),
                                                       sparse)),
                            "dense_eig_min": dict(zip(("32", "64", "128"),
                                                      dense)),
                            "sparse_floor": 0.05, "stability_band": 0.20,
                            "dense_decay": dense[0] / dense[-1]
                            if dense[-1] > 0 else math.inf})


def criterion_5() -> CriterionResult:
    """Frame trends on the 20-zero space (phase budget 20 pi).

    Ladders are scaled to the budget: 8/12/16 nodes oversampled,
    6/9/12 undersampled, trim 2; tolerances match criteria 2-3.
    """
    t0 = time.perf_counter()
    prof = _fz()
    over = [r.eig_min for r in
            _frame_ladder(prof, PI / 1.2, (8, 12, 16), (-60, 60), trim=2)]
    under = [r.eig_min for r in
             _frame_ladder(prof, 1.25 * PI, (6, 9, 12), (-60, 60), trim=2)]
    rt = time.perf_counter() - t0
    spread = _rel_spread(over)
    ok = (spread < 0.20 and min(over) >= 0.02
          and under[-1] <= 0.5 * under[0] and rt < 30.0)
    return CriterionResult(5, "frame trends on the finite-zero space", ok, rt,
                           {"oversampled_A": dict(zip(("8", "12", "16"), over)),
                            "undersampled_A": dict(zip(("6", "9", "12"),
                                                       under)),
                            "relative_spread": spread, "spread_limit": 0.20,
                            "floor": 0.02,
                            "decay_factor": under[0] / under[-1]
                            if under[-1] > 0 else math.inf,
                            "runtime_limit_s": 30.0})


def _newton_elementary(p):
    """Elementary symmetric functions from power sums."""
    n = len(p)
    e = np.zeros(n + 1, dtype=complex)
    e[0] = 1.0
    for k in range(1, n + 1):
        s = 0.0 + 0.0j
        for i in range(1, k + 1):
            s += (-1) ** (i - 1) * e[k - i] * p[i - 1]
        e[k] = s / k
    return e


def _roots_by_deflation(p):
    """Roots for n <= 3 by explicit formulas and synthetic division.

    Independent of the companion-matrix path: the cubic's real root
    comes from bisection on a sign bracket, then the quadratic formula
    finishes the deflated factor.
    """
    n = len(p)
    e = _newton_elementary(p).real
    if n == 1:
        return [complex(e[1])]
    if n == 2:
        b, c = -e[1], e[2]
        disc = complex(b * b - 4 * c) ** 0.5
        return [(-b + disc) / 2.0, (-b - disc) / 2.0]
    if n != 3:
        raise ValueError("deflation oracle covers n <= 3 only")

    def cubic(t):
        return ((t - e[1]) * t + e[2]) * t - e[3]

    r = 1.0 + max(abs(e[1]), abs(e[2]), abs(e[3]))
    a, b = -r, r
    for _ in range(200):
        m = 0.5 * (a + b)
        if cubic(a) * cubic(m) <= 0:
            b = m
        else:
            a = m
    root = 0.5 * (a + b)
    # synthetic division by (t - root)
    q1 = -e[1] + root
    q2 = e[2] + root * q1
    disc = complex(q1 * q1 - 4 * q2) ** 0.5
    return [complex(root), (-q1 + disc) / 2.0, (-q1 - disc) / 2.0]


def _match_sets(a, b, tol):
    left = list(b)
    for z in a:
        best, best_d = None, math.inf
        for i, w in enumerate(left):
            d = abs(z - w)
            if d < best_d:
                best, best_d = i, d
        if best is None or best_d > tol * max(1.0, abs(z)):
            return False
        left.pop(best)
    return True


def criterion_6() -> CriterionResult:
    """Moment matcher against hand and deflation oracles."""
    t0 = time.perf_counter()
    leb = moment_match(MomentProblem(interval=(-1.0, 1.0), order=2,
                                     density=lambda x: np.ones_like(x)))
    got = sorted(z.real for z in leb.points)
    target = 1.0 / math.sqrt(3.0)
    leb_err = max(abs(got[0] + target), abs(got[1] - target),
                  abs(leb.points[0].imag), abs(leb.points[1].imag))

    rng = np.random.default_rng(606)
    worst_res = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        k = n + int(rng.integers(0, 9))
        pos = np.sort(rng.uniform(-1.0, 1.0, size=k))
        wts = rng.uniform(0.2, 2.0, size=k)
        res = moment_match(MomentProblem(interval=(-1.0, 1.0), order=n,
                                         masses=tuple(zip(pos, wts))))
        worst_res = max(worst_res, max(res.residuals))

    deflation_ok = True
    for _ in range(40):
        n = int(rng.integers(2, 4))
        k = n + int(rng.integers(0, 6))
        pos = rng.uniform(-1.0, 1.0, size=k)
        wts = rng.uniform(0.2, 2.0, size=k)
        res = moment_match(MomentProblem(interval=(-1.0, 1.0), order=n,
                                         masses=tuple(zip(pos, wts))))
        oracle = _roots_by_deflation(list(res.power_sums))
        if not _match_sets(list(res.points_unit), oracle, 1e-8):
            deflation_ok = False
            break
    rt = time.perf_counter() - t0
    ok = leb_err <= 1e-10 and worst_res <= 1e-9 and deflation_ok
    return CriterionResult(6, "moment matcher oracles", ok, rt,
                           {"lebesgue_n2_error": leb_err,
                            "worst_power_sum_residual": worst_res,
                            "deflation_agreement": deflation_ok})


def criterion_7() -> CriterionResult:
    """Multiplier plan on the 2.5-spaced lattice: moments and bounds."""
    t0 = time.perf_counter()
    prof = _pw()
    lam = RealSequence(tuple(2.5 * k for k in range(-20, 21)))
    plan = build_plan(prof, lam, (-50.0, 50.0), epsilon_density_margin=0.6)
    residuals = block_moment_residuals(prof, plan)
    worst = max((max(r) for r in residuals if r), default=0.0)
    field = PotentialField(prof, plan)
    rep = verify_multiplier(prof, field)
    rt = time.perf_counter() - t0
    ok = (worst <= 1e-7 and math.isfinite(rep.sup_minus_w)
          and rep.spread_max <= 100.0 and rt < 120.0)
    return CriterionResult(7, "multiplier plan, moments and potential bounds",
                           ok, rt,
                           {"M": plan.M, "n": plan.n,
                            "blocks": plan.block_count, "eta": plan.eta,
                            "padded_points": sum(len(b) for b in plan.padded),
                            "worst_block_moment": worst,
                            "sup_minus_w": rep.sup_minus_w,
                            "ratio_spread_max": rep.spread_max,
                            "spread_limit": 100.0, "runtime_limit_s": 120.0})


def criterion_8() -> CriterionResult:
    """Chain space: locally doubling, globally not."""
    t0 = time.perf_counter()
    prof = PhaseProfile(GeometricChain(2.0, 40))
    window = (-1e4, 1e4)
    sup_a = local_doubling_check(prof, window, grid_n=4001).sup
    sup_b = local_doubling_check(prof, window, grid_n=8001).sup
    stable = (math.isfinite(sup_a) and math.isfinite(sup_b)
              and abs(sup_a - sup_b) <= 0.05 * max(sup_a, sup_b))
    ratios = []
    for t_scale in (1e2, 1e3, 1e4):
        win = (t_scale / 2.0, 1.5 * t_scale)
        half = 0.5 * (win[1] - win[0])
        rep = doubling_scan(prof, win, scales=[half / 2 ** j for j in range(6)],
                            centers_per_scale=9)
        ratios.append(rep.ratio_sup)
    rt = time.perf_counter() - t0
    increasing = ratios[0] < ratios[1] < ratios[2]
    ok = stable and increasing and min(ratios) > 3.0
    return CriterionResult(8, "local doubling without global doubling", ok, rt,
                           {"local_sup_4001": sup_a, "local_sup_8001": sup_b,
                            "refinement_band": 0.05,
                            "window_ratios": dict(zip(("1e2", "1e3", "1e4"),
                                                      ratios)),
                            "ratio_floor": 3.0})


def criterion_9() -> CriterionResult:
    """Weighted derivative bound over random coefficient draws."""
    t0 = time.perf_counter()
    prof = _pw()
    nodes = on_nodes(prof, (-32.2, 31.8), alpha=0.0)
    grid = np.linspace(-40.0, 40.0, 2693)
    rng = np.random.default_rng(909)
    worst = 0.0
    for _ in range(100):
        c = rng.standard_normal(len(nodes))
        worst = max(worst, bernstein_ratio(prof, c, nodes, grid))

    fz = _fz()
    fz_nodes = on_nodes(fz, (-60.0, 60.0))
    lo = fz_nodes.points[0] - 8.0
    hi = fz_nodes.points[-1] + 8.0
    count = int((hi - lo) / 0.03) | 1
    fz_grid = np.linspace(lo, hi, count)
    ratios = []
    for _ in range(100):
        c = rng.standard_normal(len(fz_nodes))
        ratios.append(bernstein_ratio(fz, c, fz_nodes, fz_grid))
    spread = max(ratios) / min(ratios)
    rt = time.perf_counter() - t0
    ok = worst <= 1.0 + 1e-2 and spread <= 3.0
    return CriterionResult(9, "weighted derivative bound", ok, rt,
                           {"flat_worst_ratio": worst, "flat_limit": 1.01,
                            "finite_zero_ratio_min": min(ratios),
                            "finite_zero_ratio_max": max(ratios),
                            "finite_zero_spread": spread, "spread_limit": 3.0})


def criterion_10() -> CriterionResult:
    """Peak function drops fast and carries almost all mass near x0."""
    t0 = time.perf_counter()
    prof = _pw()
    lam = peak_lambda(prof, 0.0, (-150.0, 150.0))
    plan = build_plan(prof, lam, (-150.0, 150.0), epsilon_density_margin=0.5,
                      protect=(0.0,))
    field = PotentialField(prof, plan)
    peak = peak_function(prof, field, 0.0, m_poles=6)
    unit = abs(peak(0.0) - 1.0)
    fit = peak_decay_fit(prof, peak, d_lo=5.0, d_hi=50.0)
    mass = peak_mass_profile(prof, peak, d_cut=50.0, d_max=200.0)
    rt = time.perf_counter() - t0
    ok = (unit <= 1e-12 and fit["slope"] <= -4.0
          and mass["tail_fraction"] < 0.01)
    return CriterionResult(10, "peak decay and localization", ok, rt,
                           {"normalization_error": unit,
                            "decay_slope": fit["slope"], "slope_limit": -4.0,
                            "fit_points": fit["points"],
                            "tail_fraction": mass["tail_fraction"],
                            "tail_limit": 0.01, "poles": list(peak.poles)})


def criterion_11() -> CriterionResult:
    """Interpolant cross-check plus the delta-data closed form."""
    t0 = time.perf_counter()
    prof = _pw()
    base = generate_by_phase(prof, (-30.0, 30.0), step=1.2 * PI)
    nodes = _central(base, 21)
    rng = np.random.default_rng(1111)
    values = rng.standard_normal(21)
    mn = min_norm_interpolant(prof, nodes, values)
    mn_res = float(np.max(np.abs(mn.residuals(values))))
    lg = lagrange_interpolate(prof, nodes, values)
    lg_res = float(np.max(np.abs(lg(np.asarray(nodes.points)) - values)))
    span = (nodes.points[0] - 6.0, nodes.points[-1] + 6.0)
    lg_norm = lg.norm_windowed(span)
    norm_ratio = lg_norm / mn.norm_sq if mn.norm_sq > 0 else math.inf

    ints = on_nodes(prof, (-10.2, 10.2), alpha=0.0)      # integers -10..10
    delta = np.zeros(len(ints))
    delta[ints.points.index(0.0)] = 1.0
    mn_delta = min_norm_interpolant(prof, ints, delta)
    xs = rng.uniform(-4.0, 4.0, size=10)
    sinc_err = float(np.max(np.abs(mn_delta(xs) - np.sinc(xs))))
    rt = time.perf_counter() - t0
    ok = (mn_res <= 1e-8 and lg_res <= 1e-8
          and math.isfinite(mn.norm_sq) and mn.norm_sq > 0
          and math.isfinite(lg_norm) and sinc_err <= 1e-6)
    return CriterionResult(11, "interpolant cross-check and delta data", ok, rt,
                           {"min_norm_residual": mn_res,
                            "lagrange_residual": lg_res,
                            "min_norm_norm_sq": mn.norm_sq,
                            "lagrange_windowed_norm": lg_norm,
                            "norm_ratio": norm_ratio,
                            "sinc_max_error": sinc_err,
                            "value_tolerance": 1e-8, "sinc_tolerance": 1e-6})


ALL_CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
    9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def run_suite(numbers=None) -> SuiteResult:
    selected = sorted(ALL_CRITERIA) if numbers is None else sorted(numbers)
    results = []
    for num in selected:
        results.append(ALL_CRITERIA[num]())
    return SuiteResult(results=tuple(results))
