"""Real node sequences, phase separation and sliding-window densities.

Densities are Beurling-type counts measured against mu = phi' dx: an
interval of mass r is a phase interval of length r, so every sweep is
done in phase coordinates where intervals slide by plain translation.
The count of a half-open window [t, t+r) over the sorted node phases
is a step function; its extrema are evaluated exactly at all event
breakpoints and segment midpoints, which strictly dominates any finite
grid of window positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .spaces import PhaseProfile


class WindowMassError(ValueError):
    """Requested window mass exceeds the mass available in the window."""


@dataclass(frozen=True)
class RealSequence:
    """Sorted, strictly increasing real nodes with an optional separation
    certificate (a proven lower bound on adjacent phase gaps)."""

    points: tuple
    separation_eps: float | None = None

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def array(self) -> np.ndarray:
        return np.asarray(self.points)

    def restrict(self, lo: float, hi: float) -> "RealSequence":
        """Nodes in the half-open window [lo, hi); certificate is kept."""
        kept = tuple(p for p in self.points if lo <= p < hi)
        return RealSequence(kept, self.separation_eps)


def sequence_from_file(path) -> RealSequence:
    """Newline-separated decimal literals; blank lines ignored."""
    pts = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                pts.append(float(line))
    return RealSequence(tuple(sorted(pts)))


def sequence_to_file(path, seq: RealSequence) -> None:
    with open(path, "w") as fh:
        for p in seq.points:
            fh.write(f"{p!r}\n")


def check_separation(profile: PhaseProfile, seq: RealSequence):
    """Minimum adjacent phase gap, or None for fewer than two points."""
    if len(seq) < 2:
        return None
    phases = profile.phase(seq.array())
    return float(np.min(np.diff(phases)))


def certify_separation(profile: PhaseProfile, seq: RealSequence) -> RealSequence:
    """Attach the computed minimum phase gap as the certificate."""
    return replace(seq, separation_eps=check_separation(profile, seq))


def generate_by_phase(profile: PhaseProfile, window, step: float,
                      alpha: float = 0.0) -> RealSequence:
    """All x in the window with phi(x) = alpha + step*n, n integer.

    The result is phase-separated with gap exactly step, which is
    recorded as the certificate.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    lo, hi = float(window[0]), float(window[1])
    p_lo, p_hi = profile.phase(lo), profile.phase(hi)
    n_lo = int(np.ceil((p_lo - alpha) / step - 1e-12))
    n_hi = int(np.floor((p_hi - alpha) / step + 1e-12))
    pts = [profile.phase_inverse(alpha + step * n, bracket=(lo, hi))
           for n in range(n_lo, n_hi + 1)]
    return RealSequence(tuple(pts), separation_eps=step)


def perturb(seq: RealSequence, jitter) -> RealSequence:
    """Apply the offset map point -> point + jitter(point) and re-sort.

    Exactly coincident points are merged and flagged by a 0.0
    certificate; otherwise the old certificate is dropped (None) and
    should be re-established with check_separation.
    """
    moved = sorted(p + float(jitter(p)) for p in seq.points)
    collapsed = any(b <= a for a, b in zip(moved, moved[1:]))
    if collapsed:
        uniq = []
        for p in moved:
            if not uniq or p > uniq[-1]:
                uniq.append(p)
        return RealSequence(tuple(uniq), separation_eps=0.0)
    return RealSequence(tuple(moved), separation_eps=None)


def thin_to_separation(profile: PhaseProfile, seq: RealSequence,
                       eps: float) -> RealSequence:
    """Greedy left-to-right subsequence with adjacent phase gaps >= eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    kept = []
    last_phase = None
    for p in seq.points:
        ph = profile.phase(p)
        if last_phase is None or ph - last_phase >= eps:
            kept.append(p)
            last_phase = ph
    return RealSequence(tuple(kept), separation_eps=eps)


@dataclass(frozen=True)
class IntervalWitness:
    lo: float
    hi: float
    count: int

    def to_json(self):
        return {"lo": self.lo, "hi": self.hi, "count": self.count}


@dataclass(frozen=True)
class DensityReport:
    """Sliding-window counts per unit mass, with extremal witnesses."""

    window: tuple
    r_values: tuple
    lower: tuple          # min count / r per r
    upper: tuple          # max count / r per r
    witnesses: tuple = field(repr=False)  # (min_witness, max_witness) per r

    def to_json(self):
        return {
            "window": list(self.window),
            "r_values": list(self.r_values),
            "lower": list(self.lower),
            "upper": list(self.upper),
            "witnesses": [{"min": wmin.to_json(), "max": wmax.to_json()}
                          for (wmin, wmax) in self.witnesses],
        }


def _step_extrema(T: np.ndarray, width: float, t_lo: float, t_hi: float,
                  weights: np.ndarray | None = None):
    """Extrema of t -> mass of [t, t+width) over sorted phases T.

    Candidates are all breakpoints of the step function clipped to
    [t_lo, t_hi] plus the midpoints between consecutive breakpoints, so
    every constant segment is hit and the extrema are exact.
    Returns (min_val, min_t, max_val, max_t).
    """
    brk = np.concatenate((T, T - width, (t_lo, t_hi)))
    brk = np.unique(np.clip(brk, t_lo, t_hi))
    cands = np.concatenate((brk, 0.5 * (brk[:-1] + brk[1:]))) if len(brk) > 1 else brk
    i_lo = np.searchsorted(T, cands, side="left")
    i_hi = np.searchsorted(T, cands + width, side="left")
    if weights is None:
        vals = i_hi - i_lo
    else:
        cum = np.concatenate(([0.0], np.cumsum(weights)))
        vals = cum[i_hi] - cum[i_lo]
    kmin = int(np.argmin(vals))
    kmax = int(np.argmax(vals))
    return vals[kmin], float(cands[kmin]), vals[kmax], float(cands[kmax])


def _endpoint(profile, t, T, pts, bracket):
    """Invert the phase at t, snapping to a known node when exact."""
    j = np.searchsorted(T, t)
    if j < len(T) and T[j] == t:
        return float(pts[j])
    return profile.phase_inverse(t, bracket=bracket)


def density(profile: PhaseProfile, seq: RealSequence, window,
            r_list) -> DensityReport:
    """Extremal counts per unit mass over windows of mass r inside window.

    Counting is half-open [lo, hi).  Raises WindowMassError when some r
    exceeds the mass of the window.
    """
    lo, hi = float(window[0]), float(window[1])
    pts = seq.array()
    pts = pts[(pts >= lo) & (pts <= hi)]
    T = profile.phase(pts) if len(pts) else np.empty(0)
    p_lo, p_hi = profile.phase(lo), profile.phase(hi)
    total = p_hi - p_lo
    lower, upper, wits = [], [], []
    for r in r_list:
        r = float(r)
        if r <= 0:
            raise ValueError("window mass r must be positive")
        if r > total:
            raise WindowMassError(f"window mass {r} exceeds available {total}")
        cmin, tmin, cmax, tmax = _step_extrema(T, r, p_lo, p_hi - r)
        bracket = (lo, hi)
        wmin = IntervalWitness(_endpoint(profile, tmin, T, pts, bracket),
                               _endpoint(profile, tmin + r, T, pts, bracket),
                               int(cmin))
        wmax = IntervalWitness(_endpoint(profile, tmax, T, pts, bracket),
                               _endpoint(profile, tmax + r, T, pts, bracket),
                               int(cmax))
        lower.append(cmin / r)
        upper.append(cmax / r)
        wits.append((wmin, wmax))
    return DensityReport(window=(lo, hi), r_values=tuple(float(r) for r in r_list),
                         lower=tuple(lower), upper=tuple(upper),
                         witnesses=tuple(wits))


def count_in(seq: RealSequence, lo: float, hi: float) -> int:
    """Half-open count #(seq & [lo, hi)), the witness reproduction rule."""
    a = seq.array()
    return int(np.searchsorted(a, hi, side="left") - np.searchsorted(a, lo, side="left"))
