"""Reproducing kernels, Gram matrices, frame and Riesz diagnostics.

The kernel of the space H(E) at real points is

    K(x, y) = |E(x)E(y)| sin(phi(x) - phi(y)) / (pi (x - y)),
    K(x, x) = |E(x)|^2 phi'(x) / pi,

and the normalized kernel ktilde = K/sqrt(K(x,x)K(y,y)) depends only on
the phase, so Gram assembly never touches |E| and stays finite for
spaces whose structure function overflows.  All matrix diagnostics are
phrased on normalized kernels: a sampling sequence gives frame bounds,
a node sequence gives Riesz bounds, both as extreme eigenvalues.

Nodes with phases alpha + pi Z are an orthonormal set (exactly: the
cross sines vanish); they serve as the computational basis.  For all
but at most one alpha they span the space, so the default alpha = pi/2
is re-drawn if the orthonormal-expansion identity fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spaces import PhaseProfile, eval_Phi
from .sequences import RealSequence, generate_by_phase, _step_extrema

PI = math.pi


class EigensolverError(RuntimeError):
    """Dense symmetric eigensolver failed to converge."""


class IllPosedWindowError(ValueError):
    """Interpolation window is numerically degenerate (Gram nearly singular)."""


class QuadGridError(ValueError):
    """Quadrature grid too coarse for the local phase frequency."""


@dataclass(frozen=True)
class KernelValue:
    """Unnormalized kernel value with the two diagonal norms."""

    K: float
    norm_sq_x: float
    norm_sq_y: float

    @property
    def normalized(self) -> float:
        return self.K / math.sqrt(self.norm_sq_x * self.norm_sq_y)


def kernel(profile: PhaseProfile, x: float, y: float) -> KernelValue:
    """Pointwise kernel; switches to a cancellation-free slope form when
    the phase gap drops below 1e-6 (and reproduces the diagonal exactly)."""
    x, y = float(x), float(y)
    dpx = profile.phase_derivative(x)
    dpy = profile.phase_derivative(y)
    mag = math.exp(eval_Phi(profile.spec, x) + eval_Phi(profile.spec, y))
    delta = profile.phase(x) - profile.phase(y)
    if abs(delta) < 1e-6:
        delta = profile.phase_delta(x, y)
        slope = dpx if x == y else delta / (x - y)
    else:
        slope = delta / (x - y)
    # sin(d)/(x-y) = slope * sinc(d); np.sinc(u) = sin(pi u)/(pi u)
    k = mag / PI * slope * float(np.sinc(delta / PI))
    return KernelValue(K=k, norm_sq_x=dpx * mag_x(profile, x) / PI,
                       norm_sq_y=dpy * mag_x(profile, y) / PI)


def mag_x(profile: PhaseProfile, x: float) -> float:
    """|E(x)|^2 on the real axis."""
    return math.exp(2.0 * eval_Phi(profile.spec, x))


def cross_gram(profile: PhaseProfile, left: np.ndarray,
               right: np.ndarray) -> np.ndarray:
    """Matrix of normalized kernel inner products <k_r, k_l>.

    Entry [i, j] = ktilde(left[i], right[j]) = sin(phi_l - phi_r) /
    ((l - r) sqrt(phi'(l) phi'(r))), with the exact diagonal limit 1
    when points coincide.
    """
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    pl, pr = profile.phase(left), profile.phase(right)
    dl, dr = profile.phase_derivative(left), profile.phase_derivative(right)
    delta = pl[:, None] - pr[None, :]
    dx = left[:, None] - right[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = delta / dx
    coincide = dx == 0.0
    if np.any(coincide):
        slope[coincide] = np.broadcast_to(dl[:, None], slope.shape)[coincide]
    tiny = (np.abs(delta) < 1e-6) & ~coincide
    if np.any(tiny):
        for i, j in zip(*np.nonzero(tiny)):
            slope[i, j] = profile.phase_slope(float(left[i]), float(right[j]))
            delta[i, j] = profile.phase_delta(float(left[i]), float(right[j]))
    return slope * np.sinc(delta / PI) / np.sqrt(dl[:, None] * dr[None, :])


def gram(profile: PhaseProfile, seq: RealSequence) -> np.ndarray:
    """Symmetric normalized Gram matrix with unit diagonal."""
    pts = seq.array()
    g = cross_gram(profile, pts, pts)
    g = 0.5 * (g + g.T)
    np.fill_diagonal(g, 1.0)
    return g


def on_nodes(profile: PhaseProfile, window, alpha: float = PI / 2) -> RealSequence:
    """Orthonormal node set {x : phi(x) = alpha + pi n} inside the window."""
    return generate_by_phase(profile, window, step=PI, alpha=alpha)


@dataclass(frozen=True)
class GramReport:
    """Extreme eigenvalues of a kernel Gram or frame operator matrix.

    mode 'riesz': eigenvalues of the normalized Gram of the sequence.
    mode 'frame': eigenvalues of M^T M for the cross matrix M between
    samples and interior orthonormal nodes (squared singular values).
    """

    mode: str
    shape: tuple
    eig_min: float
    eig_max: float
    window: tuple
    trim_margin: int | None = None
    witness: tuple = field(default=(), repr=False)  # eigvec of eig_min

    @property
    def condition(self) -> float:
        return self.eig_max / self.eig_min if self.eig_min > 0 else math.inf

    def to_json(self):
        return {"mode": self.mode, "shape": list(self.shape),
                "eig_min": self.eig_min, "eig_max": self.eig_max,
                "window": list(self.window), "trim_margin": self.trim_margin,
                "witness": list(self.witness)}


def _eigh(mat: np.ndarray):
    try:
        return np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - numpy rarely fails
        raise EigensolverError(f"symmetric eigensolver failed: {exc}") from exc


def riesz_bounds(profile: PhaseProfile, seq: RealSequence) -> GramReport:
    """Riesz-sequence bounds of the normalized kernels at the nodes."""
    if len(seq) < 2:
        raise ValueError("need at least two points")
    g = gram(profile, seq)
    w, v = _eigh(g)
    pts = seq.points
    return GramReport(mode="riesz", shape=g.shape, eig_min=float(w[0]),
                      eig_max=float(w[-1]), window=(pts[0], pts[-1]),
                      witness=tuple(float(c) for c in v[:, 0]))


def frame_bounds(profile: PhaseProfile, sample_seq: RealSequence,
                 basis_window=None, trim_margin: int = 4,
                 alpha: float = PI / 2) -> GramReport:
    """Empirical frame bounds of the normalized kernels at the samples.

    Test functions are unit-coefficient combinations of interior
    orthonormal nodes (trim_margin nodes dropped at each basis end so no
    test vector concentrates where the samples cannot see it), and
    A, B are the extreme eigenvalues of M^T M for
    M[sample, node] = ktilde(sample, node).  By orthonormality the test
    functions have exactly unit norm, so no second quadrature enters.

    Default basis window is the exact sample span; a wider basis window
    would put nodes outside the sampled region and report a spurious A.
    """
    samples = sample_seq.array()
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    if basis_window is None:
        basis_window = (samples[0], samples[-1])
    nodes = on_nodes(profile, basis_window, alpha=alpha).array()
    if trim_margin < 0 or 2 * trim_margin >= len(nodes):
        raise ValueError(f"trim_margin {trim_margin} must be below half the "
                         f"node count {len(nodes)}")
    interior = nodes[trim_margin: len(nodes) - trim_margin]
    if samples[0] > interior[0] or samples[-1] < interior[-1]:
        raise ValueError("samples must cover the interior node span")
    m = cross_gram(profile, samples, interior)
    w, v = _eigh(m.T @ m)
    return GramReport(mode="frame", shape=m.shape, eig_min=float(w[0]),
                      eig_max=float(w[-1]),
                      window=(float(samples[0]), float(samples[-1])),
                      trim_margin=trim_margin,
                      witness=tuple(float(c) for c in v[:, 0]))


class MinNormInterpolant:
    """Minimal-norm element of H(E) matching prescribed node values.

    Solves the kernel system K c = values through its normalized form
    (diagonal scaling by the node norms), which keeps the linear algebra
    conditioned even when |E| is astronomically large.  norm_sq is the
    exact squared norm c^T values of the solution.
    """

    def __init__(self, profile: PhaseProfile, seq: RealSequence, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (len(seq),):
            raise ValueError("values must match the node count")
        pts = seq.array()
        g = gram(profile, seq)
        w, _ = _eigh(g)
        if w[0] <= 1e-10:
            raise IllPosedWindowError(
                f"normalized Gram minimum eigenvalue {w[0]:.3e} <= 1e-10")
        dphi = profile.phase_derivative(pts)
        scale = np.sqrt(dphi / PI) * np.exp([eval_Phi(profile.spec, p) for p in pts])
        b = values / scale
        y = np.linalg.solve(g, b)
        self.profile = profile
        self.seq = seq
        self._pts = pts
        self._y = y
        self._scale = scale
        self.coeffs = y / scale
        self.norm_sq = float(y @ b)

    def __call__(self, x):
        """Evaluate on real points: sum_k y_k ktilde_{gamma_k}(x) |E(x)|-free
        normalized kernels times |E(x)|."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        kt = cross_gram(self.profile, x, self._pts)
        dphi = self.profile.phase_derivative(x)
        mag = np.exp([eval_Phi(self.profile.spec, xi) for xi in x])
        out = (kt @ self._y) * np.sqrt(dphi / PI) * mag
        return out[0] if out.shape == (1,) else out

    def residuals(self, values) -> np.ndarray:
        return np.asarray([self(p) for p in self._pts]) - np.asarray(values)


def min_norm_interpolant(profile: PhaseProfile, seq: RealSequence,
                         values) -> MinNormInterpolant:
    return MinNormInterpolant(profile, seq, values)


def bernstein_ratio(profile: PhaseProfile, coeffs, basis_nodes: RealSequence,
                    quad_grid) -> float:
    """Ratio of the weighted derivative norm to the function norm.

    For f = sum c_n ktilde_{node_n}, the real representative of f/E is

        S(x) = sum_n c_n sin(phi(x) - phi_n) / (sqrt(pi phi'_n) (x - node_n)),

    and the reported quantity is ||S'/phi'||_L2(grid) / |c|_2, with S'
    from 6th-order central differences on the uniform grid and the
    integral by composite Simpson.  |c|_2 equals ||f|| exactly by node
    orthonormality.  Refuses grids coarser than 0.1 / max phi'.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    grid = np.asarray(quad_grid, dtype=float)
    if len(grid) < 9:
        raise QuadGridError("need at least 9 grid points")
    h = grid[1] - grid[0]
    if not np.allclose(np.diff(grid), h, rtol=1e-9, atol=0.0):
        raise QuadGridError("quadrature grid must be uniform")
    max_dphi = float(np.max(profile.phase_derivative(grid)))
    if h > 0.1 / max_dphi:
        raise QuadGridError(f"grid step {h:.4g} exceeds 0.1/max phi' = "
                            f"{0.1 / max_dphi:.4g}")
    nodes = basis_nodes.array()
    if coeffs.shape != nodes.shape:
        raise ValueError("coefficient count must match node count")
    pn = profile.phase(nodes)
    dn = profile.phase_derivative(nodes)
    pg = profile.phase(grid)
    delta = pg[:, None] - pn[None, :]
    dx = grid[:, None] - nodes[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        core = np.sin(delta) / dx
    hit = dx == 0.0
    if np.any(hit):
        core[hit] = np.broadcast_to(profile.phase_derivative(grid)[:, None],
                                    core.shape)[hit]
    S = core @ (coeffs / np.sqrt(PI * dn))
    # 6th-order interior stencil, three boundary points dropped per side
    d = (-S[:-6] + 9 * S[1:-5] - 45 * S[2:-4] + 45 * S[4:-2]
         - 9 * S[5:-1] + S[6:]) / (60.0 * h)
    interior = grid[3:-3]
    ratio_sq = _simpson((d / profile.phase_derivative(interior)) ** 2, h)
    norm = float(np.linalg.norm(coeffs))
    return math.sqrt(ratio_sq) / norm


def _simpson(y: np.ndarray, h: float) -> float:
    n = len(y)
    if n < 3:
        return float(0.5 * h * (y[0] + y[-1])) if n == 2 else 0.0
    if n % 2 == 0:  # even count: Simpson on n-1 points plus a trapezoid
        return _simpson(y[:-1], h) + 0.5 * h * (y[-2] + y[-1])
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-2:2] = 2.0
    return float(h / 3.0 * (w @ y))


def carleson_constant(profile: PhaseProfile, masses, window) -> dict:
    """Supremum over unit-mass windows of sum mass * phi' at the atoms.

    masses is a sequence of (position, mass) pairs.  The test measure
    nu = sum mass delta_pos is Carleson for the space exactly when this
    supremum is finite uniformly over unit-mass (phase length 1)
    intervals; the sweep is exact in phase coordinates.
    """
    lo, hi = float(window[0]), float(window[1])
    pos = np.asarray([p for p, _ in masses], dtype=float)
    wts = np.asarray([m for _, m in masses], dtype=float)
    keep = (pos >= lo) & (pos <= hi)
    pos, wts = pos[keep], wts[keep]
    order = np.argsort(pos)
    pos, wts = pos[order], wts[order]
    T = profile.phase(pos) if len(pos) else np.empty(0)
    weights = wts * profile.phase_derivative(pos) if len(pos) else np.empty(0)
    p_lo, p_hi = profile.phase(lo), profile.phase(hi)
    if p_hi - p_lo < 1.0:
        raise ValueError("window carries less than unit mass")
    _, _, vmax, tmax = _step_extrema(T, 1.0, p_lo, p_hi - 1.0, weights=weights)
    return {"constant": float(vmax), "witness_phase_left": tmax,
            "atoms_in_window": int(len(pos))}
