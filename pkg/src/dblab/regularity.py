"""Doubling and distortion diagnostics for the measure mu = phi' dx.

Doubling compares mu(2I) with mu(I) over Euclidean intervals; both
masses are exact phase differences, so every probe is reproducible to
roundoff from its witness (center, scale).  All suprema reported here
are probe-based lower bounds of the true suprema.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spaces import PhaseProfile


@dataclass(frozen=True)
class DoublingProbe:
    center: float
    scale: float
    ratio: float

    def to_json(self):
        return {"center": self.center, "scale": self.scale, "ratio": self.ratio}


@dataclass(frozen=True)
class DoublingReport:
    ratio_sup: float
    witness: DoublingProbe
    gamma_est: float                 # log 2 / log(ratio_sup)
    lemma_K: float                   # worst (mu(I)/mu(I'))^gamma / (r/r') over pairs
    probes: tuple = field(repr=False)

    def to_json(self):
        return {
            "ratio_sup": self.ratio_sup,
            "witness": self.witness.to_json(),
            "gamma_est": self.gamma_est,
            "lemma_K": self.lemma_K,
            "probes": [p.to_json() for p in self.probes],
        }


def doubling_ratio(profile: PhaseProfile, lo: float, hi: float) -> float:
    """mu(2I)/mu(I) for I = (lo, hi), 2I concentric with doubled length."""
    c = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo)
    if r <= 0:
        raise ValueError("interval must have positive length")
    return profile.measure(c - 2 * r, c + 2 * r) / profile.measure(lo, hi)


def doubling_scan(profile: PhaseProfile, window, scales,
                  centers_per_scale: int = 16) -> DoublingReport:
    """Probe mu(2I)/mu(I) over a center grid at each Euclidean scale.

    Probe intervals I lie inside the window; their doubles may extend
    past it, since mu is defined on the whole line.  Centers are
    equispaced with the end-touching intervals always included; scales
    with 2r above the window length are skipped.
    """
    lo, hi = float(window[0]), float(window[1])
    probes = []
    for r in scales:
        r = float(r)
        if 2 * r > hi - lo or r <= 0:
            continue
        c_lo, c_hi = lo + r, hi - r
        if centers_per_scale < 2 or c_lo == c_hi:
            centers = [0.5 * (c_lo + c_hi)]
        else:
            centers = np.linspace(c_lo, c_hi, centers_per_scale)
        for c in centers:
            ratio = doubling_ratio(profile, c - r, c + r)
            probes.append(DoublingProbe(float(c), r, float(ratio)))
    if not probes:
        raise ValueError("no admissible (scale, center) probes in window")
    best = max(probes, key=lambda p: p.ratio)
    gamma = math.log(2.0) / math.log(max(best.ratio, 1.0 + 1e-15))
    lemma_K = _lemma_consistency(profile, probes, gamma)
    return DoublingReport(ratio_sup=best.ratio, witness=best, gamma_est=gamma,
                          lemma_K=lemma_K, probes=tuple(probes))


def _lemma_consistency(profile, probes, gamma):
    """Worst (mu(I)/mu(I'))^gamma / (r/r') over intersecting probe pairs.

    Finite K certifies the scan is consistent with the doubling-exponent
    bound the gamma estimate encodes.
    """
    if len(probes) > 60:  # cap the O(n^2) audit
        idx = np.linspace(0, len(probes) - 1, 60).astype(int)
        probes = [probes[i] for i in idx]
    masses = [profile.measure(p.center - p.scale, p.center + p.scale)
              for p in probes]
    worst = 0.0
    for i, p in enumerate(probes):
        for j, q in enumerate(probes):
            if masses[i] <= masses[j] or p.scale <= q.scale:
                continue
            if abs(p.center - q.center) > p.scale + q.scale:
                continue  # need a common point
            val = (masses[i] / masses[j]) ** gamma / (p.scale / q.scale)
            worst = max(worst, val)
    return worst


@dataclass(frozen=True)
class LocalDoublingReport:
    sup: float          # sup |phi''| / phi'^2 over the grid
    argmax: float
    grid_n: int

    def to_json(self):
        return {"sup": self.sup, "argmax": self.argmax, "grid_n": self.grid_n}


def local_doubling_check(profile: PhaseProfile, window,
                         grid_n: int = 4001) -> LocalDoublingReport:
    """Grid supremum of |phi''|/phi'^2, the local-doubling functional.

    Finite values mean phi' is comparable at unit phase distance; the
    flat space gives exactly 0.
    """
    lo, hi = float(window[0]), float(window[1])
    xs = np.linspace(lo, hi, int(grid_n))
    vals = np.abs(profile.phase_second(xs)) / profile.phase_derivative(xs) ** 2
    k = int(np.argmax(vals))
    return LocalDoublingReport(sup=float(vals[k]), argmax=float(xs[k]),
                               grid_n=int(grid_n))


@dataclass(frozen=True)
class ComparabilityReport:
    ratio_min: float
    ratio_max: float
    witness_min: tuple
    witness_max: tuple
    pairs: int
    d_max: float

    def to_json(self):
        return {"ratio_min": self.ratio_min, "ratio_max": self.ratio_max,
                "witness_min": list(self.witness_min),
                "witness_max": list(self.witness_max),
                "pairs": self.pairs, "d_max": self.d_max}


def comparability_check(profile: PhaseProfile, window, pairs: int = 400,
                        d_max: float = 1.0, seed: int = 0) -> ComparabilityReport:
    """Range of phi'(x)/phi'(y) over random pairs with d(x, y) <= d_max.

    y is drawn by inverting a uniform phase offset from x, so the pair
    is exactly at the sampled phase distance.
    """
    lo, hi = float(window[0]), float(window[1])
    rng = np.random.default_rng(seed)
    p_lo, p_hi = profile.phase(lo), profile.phase(hi)
    rmin, rmax = math.inf, -math.inf
    wmin = wmax = (math.nan, math.nan)
    for _ in range(pairs):
        x = float(rng.uniform(lo, hi))
        t = profile.phase(x) + float(rng.uniform(-d_max, d_max))
        t = min(max(t, p_lo), p_hi)
        y = profile.phase_inverse(t, bracket=(lo, hi))
        ratio = profile.phase_derivative(x) / profile.phase_derivative(y)
        if ratio < rmin:
            rmin, wmin = ratio, (x, y)
        if ratio > rmax:
            rmax, wmax = ratio, (x, y)
    return ComparabilityReport(ratio_min=float(rmin), ratio_max=float(rmax),
                               witness_min=wmin, witness_max=wmax,
                               pairs=pairs, d_max=d_max)


@dataclass(frozen=True)
class DistortionReport:
    """Near regime: bounds on d(x,y) / (phi'(x)|x-y|) for d <= r_split.
    Far regime: regression exponent alpha with
    (phi'(x)|x-y|)^(1/alpha) <~ d <~ (phi'(x)|x-y|)^alpha."""

    near_min: float
    near_max: float
    near_witness_min: tuple
    near_witness_max: tuple
    alpha_fit: float
    far_pairs: int
    r_split: float

    def to_json(self):
        return {"near_min": self.near_min, "near_max": self.near_max,
                "near_witness_min": list(self.near_witness_min),
                "near_witness_max": list(self.near_witness_max),
                "alpha_fit": self.alpha_fit, "far_pairs": self.far_pairs,
                "r_split": self.r_split}


def distortion_check(profile: PhaseProfile, window, pairs: int = 400,
                     r_split: float = 1.0, seed: int = 0) -> DistortionReport:
    lo, hi = float(window[0]), float(window[1])
    rng = np.random.default_rng(seed)
    p_lo, p_hi = profile.phase(lo), profile.phase(hi)
    nmin, nmax = math.inf, -math.inf
    wn_min = wn_max = (math.nan, math.nan)
    us, vs = [], []
    for _ in range(pairs):
        # near pair: phase offset below r_split
        x = float(rng.uniform(lo, hi))
        t = profile.phase(x) + float(rng.uniform(-r_split, r_split))
        t = min(max(t, p_lo), p_hi)
        y = profile.phase_inverse(t, bracket=(lo, hi))
        if y != x:
            ratio = profile.metric(x, y) / (profile.phase_derivative(x) * abs(x - y))
            if ratio < nmin:
                nmin, wn_min = ratio, (x, y)
            if ratio > nmax:
                nmax, wn_max = ratio, (x, y)
        # far pair: independent draws, kept when beyond r_split
        x2, y2 = rng.uniform(lo, hi, size=2)
        d = profile.metric(x2, y2)
        if d > r_split and x2 != y2:
            us.append(math.log(profile.phase_derivative(x2) * abs(x2 - y2)))
            vs.append(math.log(d))
    alpha = _alpha_regression(np.asarray(us), np.asarray(vs))
    return DistortionReport(near_min=float(nmin), near_max=float(nmax),
                            near_witness_min=wn_min, near_witness_max=wn_max,
                            alpha_fit=alpha, far_pairs=len(us), r_split=r_split)


def _alpha_regression(u: np.ndarray, v: np.ndarray) -> float:
    """Larger of the two least-squares slopes (v on u, u on v), floored at 1."""
    if len(u) < 2:
        return math.nan
    du = u - u.mean()
    dv = v - v.mean()
    vu = float(du @ dv)
    s1 = vu / float(du @ du) if du @ du > 0 else math.inf
    s2 = vu / float(dv @ dv) if dv @ dv > 0 else math.inf
    return max(abs(s1), abs(s2), 1.0)


@dataclass(frozen=True)
class RegularityReport:
    """Aggregate of the four probes for one window."""

    window: tuple
    doubling: DoublingReport
    local: LocalDoublingReport
    comparability: ComparabilityReport
    distortion: DistortionReport

    def to_json(self):
        return {"window": list(self.window),
                "doubling": self.doubling.to_json(),
                "local": self.local.to_json(),
                "comparability": self.comparability.to_json(),
                "distortion": self.distortion.to_json()}


def regularity_report(profile: PhaseProfile, window, scales=None,
                      centers_per_scale: int = 16, grid_n: int = 4001,
                      pairs: int = 400, seed: int = 0) -> RegularityReport:
    lo, hi = float(window[0]), float(window[1])
    if scales is None:
        # geometric ladder 2^j fitting the window
        top = (hi - lo) / 4.0
        scales = [top / 2 ** j for j in range(8) if top / 2 ** j > 0]
    doubling = doubling_scan(profile, window, scales, centers_per_scale)
    local = local_doubling_check(profile, window, grid_n)
    comp = comparability_check(profile, window, pairs=pairs, seed=seed)
    dist = distortion_check(profile, window, pairs=pairs, seed=seed + 1)
    return RegularityReport(window=(lo, hi), doubling=doubling, local=local,
                            comparability=comp, distortion=dist)


def profile_csv_rows(profile: PhaseProfile, window, grid_n: int = 1001):
    """Rows (x, phi', phi''/phi'^2) for the regularity export."""
    xs = np.linspace(float(window[0]), float(window[1]), int(grid_n))
    dp = profile.phase_derivative(xs)
    d2 = profile.phase_second(xs)
    return [(float(x), float(a), float(b / a ** 2))
            for x, a, b in zip(xs, dp, d2)]
