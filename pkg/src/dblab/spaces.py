"""Hermite-Biehler structure functions and their phase calculus.

A structure function E has no real zeros and satisfies |E*(z)| < |E(z)|
in the upper half plane, where E*(z) = conj(E(conj(z))).  On the real
axis E(x) = |E(x)| e^{-i phi(x)} with a smooth, strictly increasing
branch phi, the phase.  Everything downstream (metric geometry,
kernels, densities, multiplier plans) is driven by phi, phi' and the
measure phi'(x) dx, so this module keeps those exact and cheap:

    phi'(x)  = sum_n  b_n / ((x - a_n)^2 + b_n^2)      zeros z_n = a_n - i b_n
    phi''(x) = -sum_n 2 b_n (x - a_n) / ((x - a_n)^2 + b_n^2)^2
    phi(x)   = sum_n  arctan((x - a_n)/b_n) + c0

The closed-form variant E(z) = exp(-i a z) has phi(x) = a x and models
the Paley-Wiener space of type a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


class PhaseRangeError(ValueError):
    """Requested phase value lies outside the attainable range of phi."""


class UnboundedIntervalError(ValueError):
    """Phase interval of the requested radius does not close on one side."""


@dataclass(frozen=True)
class ClosedFormPW:
    """E(z) = exp(-i a z), a > 0.  Paley-Wiener space of exponential type a."""

    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("exponential type a must be positive")


@dataclass(frozen=True)
class FiniteZeros:
    """Monic E(z) = prod (z - z_k) with every Im z_k < 0."""

    zeros: tuple

    def __post_init__(self):
        zs = tuple(complex(z) for z in self.zeros)
        if not zs:
            raise ValueError("need at least one zero")
        if any(z.imag >= 0 for z in zs):
            raise ValueError("all zeros must lie strictly below the real axis")
        object.__setattr__(self, "zeros", zs)


@dataclass(frozen=True)
class GeometricChain:
    """Zeros -i b^n for n = 1..depth on the imaginary axis, base b > 1.

    The depth-N truncation of the infinite chain changes phi' by at most
    tail_bound() anywhere on the real line, since b_n/(x^2+b_n^2) <= 1/b_n.
    Base 2 at depth 40 keeps that below 1e-12.
    """

    base: float
    depth: int

    def __post_init__(self):
        if not self.base > 1:
            raise ValueError("base must exceed 1")
        if self.depth < 1:
            raise ValueError("depth must be at least 1")

    @property
    def zeros(self):
        return tuple(-1j * self.base ** n for n in range(1, self.depth + 1))

    def tail_bound(self) -> float:
        """Uniform bound on the phi' error of the depth-N truncation."""
        return self.base ** (-self.depth) / (self.base - 1.0)


# Any of the three space variants.
SpaceSpec = (ClosedFormPW, FiniteZeros, GeometricChain)


def eval_E(spec, z):
    """Evaluate the structure function at complex z.

    Products over large zero sets overflow for the geometric chain at
    depth ~40; use eval_Phi (log magnitude) for anything quantitative
    there.  Downstream code only ever needs |E| through eval_Phi.
    """
    z = np.asarray(z, dtype=complex)
    if isinstance(spec, ClosedFormPW):
        out = np.exp(-1j * spec.a * z)
    else:
        zs = np.asarray(spec.zeros)
        out = np.prod(z[..., None] - zs, axis=-1)
    return out[()] if out.ndim == 0 else out


def eval_Phi(spec, z):
    """Symmetrized log magnitude: log|E(z)| for Im z >= 0, log|E*(z)| below.

    Harmonic off the real axis away from zeros, continuous across the
    axis, and satisfies eval_Phi(conj(z)) == eval_Phi(z) exactly.
    """
    z = complex(z)
    if z.imag < 0:
        z = z.conjugate()
    if isinstance(spec, ClosedFormPW):
        return spec.a * z.imag
    total = 0.0
    for zk in spec.zeros:
        d = abs(z - zk)
        if d == 0.0:
            return -math.inf
        total += math.log(d)
    return total


def space_to_json(spec) -> dict:
    if isinstance(spec, ClosedFormPW):
        return {"kind": "pw", "a": spec.a}
    if isinstance(spec, GeometricChain):
        return {"kind": "geometric", "base": spec.base, "depth": spec.depth}
    return {"kind": "zeros", "zeros": [[z.real, z.imag] for z in spec.zeros]}


def space_from_json(doc: dict):
    kind = doc.get("kind")
    if kind == "pw":
        return ClosedFormPW(a=float(doc["a"]))
    if kind == "geometric":
        return GeometricChain(base=float(doc["base"]), depth=int(doc["depth"]))
    if kind == "zeros":
        zeros = []
        for pair in doc["zeros"]:
            re, im = float(pair[0]), float(pair[1])
            if im >= 0:
                raise ValueError(f"zero {re}+{im}j is not in the lower half plane")
            zeros.append(complex(re, im))
        return FiniteZeros(zeros=tuple(zeros))
    raise ValueError(f"unknown space kind {kind!r}")


@dataclass(frozen=True)
class PhaseInterval:
    """Real interval realizing a phase ball I(x, r) = {y : |phi(y)-phi(x)| < r}."""

    lo: float
    hi: float

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def radius(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def disk(self):
        """Disk D(x, r) in the plane having this interval as a diameter."""
        return complex(self.center, 0.0), self.radius


@dataclass(frozen=True)
class PhasePoint:
    """A real point with its cached phase data, for sweep plumbing."""

    x: float
    phi: float
    dphi: float


class PhaseProfile:
    """Phase function of a space, with derivatives, inverse and metric.

    The branch constant c0 pins the additive normalization; by default
    it is chosen so that phi(0) = 0 (for ClosedFormPW the closed form
    a*x already does this).  eps_eval bounds the residual |phi(x) - t|
    accepted by the phase inverse.
    """

    def __init__(self, spec, c0: float | None = None, eps_eval: float = 1e-12):
        self.spec = spec
        self.eps_eval = float(eps_eval)
        if isinstance(spec, ClosedFormPW):
            self._an = self._bn = None
            self.c0 = 0.0 if c0 is None else float(c0)
        else:
            zs = np.asarray(spec.zeros)
            self._an = zs.real.copy()
            self._bn = -zs.imag.copy()  # all positive by construction
            if c0 is None:
                # phi(0) = sum arctan(-a_n/b_n) + c0 = 0
                self.c0 = float(np.sum(np.arctan(self._an / self._bn)))
            else:
                self.c0 = float(c0)

    # -- evaluation ---------------------------------------------------------

    def phase(self, x):
        x, scalar = _as_array(x)
        if self._an is None:
            out = self.spec.a * x
        else:
            out = np.arctan((x[..., None] - self._an) / self._bn).sum(axis=-1) + self.c0
        return float(out) if scalar else out

    def phase_derivative(self, x):
        x, scalar = _as_array(x)
        if self._an is None:
            out = np.full_like(x, self.spec.a)
        else:
            d = x[..., None] - self._an
            out = (self._bn / (d * d + self._bn * self._bn)).sum(axis=-1)
        return float(out) if scalar else out

    def phase_second(self, x):
        x, scalar = _as_array(x)
        if self._an is None:
            out = np.zeros_like(x)
        else:
            d = x[..., None] - self._an
            q = d * d + self._bn * self._bn
            out = (-2.0 * self._bn * d / (q * q)).sum(axis=-1)
        return float(out) if scalar else out

    def phase_delta(self, x: float, y: float) -> float:
        """phi(x) - phi(y) without cancellation for nearby x, y.

        Uses the arctan subtraction identity per zero; valid whenever no
        term wraps the branch (always the case once |phi(x)-phi(y)| < 1,
        since b_n phi'(a_n) >= 1 keeps b_n above the gap scale).  Falls
        back to direct subtraction if a term would wrap.
        """
        if self._an is None:
            return self.spec.a * (x - y)
        u = (x - self._an) / self._bn
        v = (y - self._an) / self._bn
        dnm = 1.0 + u * v
        if np.any(dnm <= 0):
            return self.phase(x) - self.phase(y)
        return float(np.arctan((u - v) / dnm).sum())

    def phase_slope(self, x: float, y: float) -> float:
        """(phi(x) - phi(y)) / (x - y), continued to phi'(x) on the diagonal."""
        if x == y:
            return self.phase_derivative(x)
        return self.phase_delta(x, y) / (x - y)

    def point(self, x: float) -> PhasePoint:
        return PhasePoint(x=float(x), phi=self.phase(x), dphi=self.phase_derivative(x))

    # -- metric and inversion ----------------------------------------------

    def metric(self, x, y):
        """Phase distance d(x, y) = |phi(x) - phi(y)|."""
        return abs(self.phase(x) - self.phase(y))

    def measure(self, lo: float, hi: float) -> float:
        """Mass of phi'(t) dt on [lo, hi]; exact via the phase."""
        return self.phase(hi) - self.phase(lo)

    def phase_range(self):
        """Open range of attainable phase values (infinite for the PW form)."""
        if self._an is None:
            return (-math.inf, math.inf)
        half = 0.5 * math.pi * len(self._bn)
        return (self.c0 - half, self.c0 + half)

    def phase_inverse(self, t: float, bracket=None) -> float:
        """Solve phi(x) = t by monotone bisection with Newton polish.

        Residual |phi(x) - t| <= eps_eval on success.  Raises
        PhaseRangeError if t is outside the attainable range or outside
        the supplied bracket.
        """
        t = float(t)
        lo_r, hi_r = self.phase_range()
        if not (lo_r < t < hi_r):
            raise PhaseRangeError(f"phase value {t} outside attainable range "
                                  f"({lo_r}, {hi_r})")
        if self._an is None:
            return t / self.spec.a
        if bracket is None:
            lo, hi = self._bracket(t)
        else:
            lo, hi = float(bracket[0]), float(bracket[1])
        tol = self.eps_eval
        flo = self.phase(lo) - t
        fhi = self.phase(hi) - t
        if flo > tol or fhi < -tol:
            raise PhaseRangeError(f"bracket ({lo}, {hi}) does not contain "
                                  f"phase value {t}")
        x = 0.5 * (lo + hi)
        for _ in range(300):
            f = self.phase(x) - t
            if abs(f) <= tol:
                return x
            if f > 0:
                hi = x
            else:
                lo = x
            d = self.phase_derivative(x)
            step_ok = d > 0 and math.isfinite(d)
            xn = x - f / d if step_ok else math.nan
            x = xn if (step_ok and lo < xn < hi) else 0.5 * (lo + hi)
        f = self.phase(x) - t
        if abs(f) <= 10 * tol:
            return x
        raise PhaseRangeError(f"phase inversion stalled at residual {f}")

    def _bracket(self, t: float):
        # expand geometrically from the zero cloud until phi straddles t
        x0 = float(np.median(self._an))
        d = 1.0 + float(np.max(np.abs(self._an - x0))) + float(np.min(self._bn))
        lo = hi = x0
        f0 = self.phase(x0) - t
        if f0 >= 0:
            while self.phase(x0 - d) - t > 0:
                d *= 2.0
                if d > 1e300:
                    raise PhaseRangeError("bracket expansion diverged")
            lo, hi = x0 - d, x0
        else:
            while self.phase(x0 + d) - t < 0:
                d *= 2.0
                if d > 1e300:
                    raise PhaseRangeError("bracket expansion diverged")
            lo, hi = x0, x0 + d
        return lo, hi

    def interval(self, x: float, r: float) -> PhaseInterval:
        """Phase ball I(x, r) as a real interval; its disk() is D(x, r).

        Raises UnboundedIntervalError if the phase variation on either
        side of x is at most r, so the interval would not close.
        """
        if r <= 0:
            raise ValueError("radius must be positive")
        p = self.phase(x)
        lo_r, hi_r = self.phase_range()
        if p - r <= lo_r or p + r >= hi_r:
            raise UnboundedIntervalError(
                f"phase radius {r} at x={x} exceeds one-sided variation")
        return PhaseInterval(self.phase_inverse(p - r), self.phase_inverse(p + r))

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        doc = space_to_json(self.spec)
        doc["eps"] = self.eps_eval
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "PhaseProfile":
        spec = space_from_json(doc)
        return cls(spec, eps_eval=float(doc.get("eps", 1e-12)))


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0
