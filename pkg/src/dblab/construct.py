"""Multiplier plans: moment-matched discrete masses, log-potentials,
peak functions and Lagrange interpolation.

Everything here lives in the doubled phase psi = 2 phi, whose measure
mu = psi'(x) dx governs the zero counting of functions dominated by
|E|^2.  Given a node set Lambda of upper mu-density below 1/(2 pi), the
plan partitions a window into blocks of mass 2 pi M, pads Lambda so
each block has deficiency exactly n^2 against mu/(2 pi), and places n
moment-matched points per block (each carrying mass n) so the signed
block measures

    nu_k = mu/(2 pi)|_{I_k} - sum_{lambda in I_k} delta_lambda
           - n sum_{xi in Xi_k} delta_xi

annihilate polynomials of degree below n.  The log-potential
w(z) = integral log|z - zeta| d nu(zeta) then stays bounded above and
behaves like log d_psi(z, Lambda) near each node, which is the
numerical content of the multiplier construction: e^{-w} is the
modulus of a function vanishing on Lambda with controlled growth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import roots_legendre

from .spaces import PhaseProfile, eval_Phi
from .regularity import doubling_scan
from .sequences import RealSequence, _step_extrema

PI = math.pi
TWO_PI = 2.0 * math.pi


class MomentMatchError(RuntimeError):
    """Moment quadrature or power-sum verification failed to converge."""


class MomentOverflowError(OverflowError):
    """Power sums exceed 1e12; rescale the problem interval."""


class DensityMarginError(ValueError):
    """Node set too dense for the requested multiplier margin."""


class PaddingError(ValueError):
    """Cannot pad a block while keeping half the original separation."""


class PlanError(ValueError):
    """Window or configuration cannot support a plan (e.g. < 3 blocks)."""


class IllConditionedError(ValueError):
    """Derivative surrogate at a node is numerically degenerate."""


# ---------------------------------------------------------------------------
# moment matching
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentProblem:
    """Signed measure tau on an interval: optional continuous density
    (vectorized callable of x) plus discrete (point, weight) atoms.

    order is the number of matched power sums; total_mass overrides the
    quadrature value of tau(I) when it is known exactly.
    """

    interval: tuple
    order: int
    density: object = None
    masses: tuple = ()
    total_mass: float | None = None


@dataclass(frozen=True)
class MomentResult:
    points: tuple            # n complex points, original coordinates
    points_unit: tuple       # same, on the mapped interval (-1, 1)
    power_sums: tuple        # target power sums c_j, j = 1..n (unit coords)
    residuals: tuple         # relative |sum xi^j - c_j|, j = 1..n
    total_mass: float

    @property
    def max_unit_modulus(self) -> float:
        return max(abs(p) for p in self.points_unit)


def _unit_moments(problem: MomentProblem):
    """Moments of tau pulled back to (-1, 1), j = 0..order."""
    lo, hi = problem.interval
    c = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo)
    if r <= 0:
        raise ValueError("interval must have positive length")
    n = problem.order
    moments = np.zeros(n + 1, dtype=complex)
    if problem.density is not None:
        prev = None
        for order_q in (64, 128, 256, 512, 1024, 2048):
            xs, ws = roots_legendre(order_q)
            dens = np.asarray(problem.density(c + r * xs), dtype=float)
            vals = np.array([np.sum(ws * dens * xs ** j) * r
                             for j in range(n + 1)])
            if prev is not None and np.all(
                    np.abs(vals - prev) <= 1e-12 * np.maximum(1.0, np.abs(vals))):
                break
            prev = vals
        else:
            raise MomentMatchError("continuous moment quadrature did not converge")
        moments += vals
    for p, wmass in problem.masses:
        u = (complex(p) - c) / r
        moments += wmass * u ** np.arange(n + 1)
    return moments, c, r


def moment_match(problem: MomentProblem) -> MomentResult:
    """n points whose uniform atomic measure matches tau's power sums.

    Mapped to (-1, 1), the targets are c_j = n m_j / tau(I); Newton's
    identities convert them to elementary symmetric functions, whose
    monic polynomial is solved through the companion matrix, and the
    roots are mapped back.  Recovered power sums are verified to 1e-9
    relative; roots with negligible imaginary part are snapped real so
    downstream sign bookkeeping stays exact.
    """
    n = problem.order
    if n < 1:
        raise ValueError("order must be at least 1")
    moments, c, r = _unit_moments(problem)
    total = problem.total_mass if problem.total_mass is not None else moments[0].real
    if total == 0:
        raise ValueError("total mass of tau vanishes; cannot normalize")
    p = n * moments[1:] / total          # power sums p_1..p_n of the points
    if np.any(np.abs(p) > 1e12):
        raise MomentOverflowError("power sums exceed 1e12; rescale the interval")
    e = np.zeros(n + 1, dtype=complex)
    e[0] = 1.0
    for k in range(1, n + 1):
        s = 0.0 + 0.0j
        for i in range(1, k + 1):
            s += (-1) ** (i - 1) * e[k - i] * p[i - 1]
        e[k] = s / k
    coeffs = np.array([(-1) ** k * e[k] for k in range(n + 1)])
    if np.all(np.abs(coeffs.imag) <= 1e-12 * np.maximum(1.0, np.abs(coeffs.real))):
        coeffs = coeffs.real             # real path keeps conjugate pairs exact
    roots = np.asarray(np.roots(coeffs), dtype=complex)
    snap = np.abs(roots.imag) <= 1e-11 * np.maximum(1.0, np.abs(roots.real))
    roots[snap] = roots[snap].real
    res = []
    for j in range(1, n + 1):
        got = np.sum(roots ** j)
        res.append(abs(got - p[j - 1]) / max(1.0, abs(p[j - 1])))
    if max(res) > 1e-9:
        raise MomentMatchError(f"power-sum verification failed: residuals {res}")
    pts = tuple(complex(c + r * z) for z in roots)
    return MomentResult(points=pts, points_unit=tuple(map(complex, roots)),
                        power_sums=tuple(map(complex, p)),
                        residuals=tuple(map(float, res)), total_mass=float(total))


# ---------------------------------------------------------------------------
# multiplier plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiplierPlan:
    window: tuple                 # partition support (trimmed to whole blocks)
    requested_window: tuple
    M: int
    n: int
    eta: float                    # half the certified psi-separation
    gamma_used: float
    epsilon_margin: float
    edges_x: tuple
    edges_psi: tuple
    lambda_used: tuple            # original nodes inside the partition
    lambda_excluded: tuple        # original nodes outside it
    lambda_block: tuple           # block index per used node (edge-snapped)
    padded: tuple                 # per block: tuple of added nodes
    xi: tuple                     # per block: tuple of complex mass points
    sigma: tuple                  # per block: tuple of (complex point, int mult)
    protect: tuple
    inner_window: tuple
    xi_unit_max: tuple            # per block: max |xi| on the mapped interval
    warnings: tuple
    sep_psi_original: float
    sep_psi_after: float
    min_sigma_scaled_dist: float  # min |sigma - p| * psi'(p) over masses p
    min_sigma_proj_dpsi: float    # min d_psi(Re sigma, p)

    @property
    def block_count(self) -> int:
        return len(self.edges_x) - 1

    def lambda_full(self) -> tuple:
        pts = list(self.lambda_used)
        for blk in self.padded:
            pts.extend(blk)
        return tuple(sorted(pts))

    def to_json(self):
        return {
            "window": list(self.window),
            "requested_window": list(self.requested_window),
            "M": self.M, "n": self.n, "eta": self.eta,
            "gamma_used": self.gamma_used,
            "epsilon_margin": self.epsilon_margin,
            "edges_x": list(self.edges_x), "edges_psi": list(self.edges_psi),
            "lambda_used": list(self.lambda_used),
            "lambda_excluded": list(self.lambda_excluded),
            "lambda_block": list(self.lambda_block),
            "padded": [list(b) for b in self.padded],
            "xi": [[[z.real, z.imag] for z in b] for b in self.xi],
            "sigma": [[[z.real, z.imag, m] for z, m in b] for b in self.sigma],
            "protect": list(self.protect),
            "inner_window": list(self.inner_window),
            "xi_unit_max": list(self.xi_unit_max),
            "warnings": list(self.warnings),
            "sep_psi_original": self.sep_psi_original,
            "sep_psi_after": self.sep_psi_after,
            "min_sigma_scaled_dist": self.min_sigma_scaled_dist,
            "min_sigma_proj_dpsi": self.min_sigma_proj_dpsi,
        }

    @staticmethod
    def from_json(obj) -> "MultiplierPlan":
        return MultiplierPlan(
            window=tuple(obj["window"]),
            requested_window=tuple(obj["requested_window"]),
            M=int(obj["M"]), n=int(obj["n"]), eta=float(obj["eta"]),
            gamma_used=float(obj["gamma_used"]),
            epsilon_margin=float(obj["epsilon_margin"]),
            edges_x=tuple(obj["edges_x"]), edges_psi=tuple(obj["edges_psi"]),
            lambda_used=tuple(obj["lambda_used"]),
            lambda_excluded=tuple(obj["lambda_excluded"]),
            lambda_block=tuple(int(b) for b in obj["lambda_block"]),
            padded=tuple(tuple(b) for b in obj["padded"]),
            xi=tuple(tuple(complex(re, im) for re, im in b) for b in obj["xi"]),
            sigma=tuple(tuple((complex(re, im), int(m)) for re, im, m in b)
                        for b in obj["sigma"]),
            protect=tuple(obj["protect"]),
            inner_window=tuple(obj["inner_window"]),
            xi_unit_max=tuple(obj["xi_unit_max"]),
            warnings=tuple(obj["warnings"]),
            sep_psi_original=float(obj["sep_psi_original"]),
            sep_psi_after=float(obj["sep_psi_after"]),
            min_sigma_scaled_dist=float(obj["min_sigma_scaled_dist"]),
            min_sigma_proj_dpsi=float(obj["min_sigma_proj_dpsi"]))


def psi(profile: PhaseProfile, x):
    return 2.0 * profile.phase(x)


def psi_derivative(profile: PhaseProfile, x):
    return 2.0 * profile.phase_derivative(x)


def _psi_inverse(profile: PhaseProfile, t: float, bracket=None) -> float:
    return profile.phase_inverse(0.5 * t, bracket=bracket)


def _block_index(edges_psi, t: float, rel: float = 1e-9) -> int:
    """Half-open block assignment with an edge snap.

    Lattice nodes routinely land exactly on block edges, where float
    drift in the edge arithmetic would flip the half-open test at
    random.  A point within rel * (block mass) of an edge counts as
    sitting on it, hence in the upper block; past the last edge that
    means outside the partition.  Returns -1 for outside.
    """
    tol = rel * (edges_psi[1] - edges_psi[0])
    k = int(np.searchsorted(edges_psi, t, side="right")) - 1
    if k + 1 < len(edges_psi) and edges_psi[k + 1] - t <= tol:
        k += 1
    return k if 0 <= k < len(edges_psi) - 1 else -1


def _snap_real(z: complex) -> complex:
    if abs(z.imag) <= 1e-13 * max(1.0, abs(z.real)):
        return complex(z.real, 0.0)
    return z


def build_plan(profile: PhaseProfile, lam: RealSequence, window,
               epsilon_density_margin: float, n: int | None = None,
               M: int | None = None, gamma: float | None = None,
               protect=(), slot_refine: int = 8) -> MultiplierPlan:
    """Assemble a multiplier plan for the node set on the window.

    epsilon_density_margin is the epsilon in D+ <= (1 - epsilon)/(2 pi):
    blocks of mass 2 pi M then hold at most about (1 - epsilon) M nodes,
    so a deficiency of n^2 <= epsilon M can be arranged by padding.  n
    defaults to the smallest integer with n * gamma > 1 (gamma from a
    doubling scan of the window), M to the smallest power of two with
    M * epsilon >= n^2.  protect lists points (e.g. a peak center) that
    padding and the separation audit must keep clear.
    """
    eps = float(epsilon_density_margin)
    if not 0 < eps < 1:
        raise ValueError("epsilon_density_margin must lie in (0, 1)")
    lo, hi = float(window[0]), float(window[1])
    pts = [p for p in lam.points if lo <= p <= hi]
    if len(pts) < 2:
        raise PlanError("need at least two nodes inside the window")

    if gamma is None:
        gamma = doubling_scan(profile, window,
                              scales=[(hi - lo) / 2 ** j for j in range(2, 8)],
                              centers_per_scale=9).gamma_est
    if n is None:
        n = int(1.0 / gamma) + 1
    if M is None:
        M = 2 ** math.ceil(math.log2(n * n / eps))
    if M * eps < n * n - 1e-9:
        raise PlanError(f"M={M} too small: need M*epsilon >= n^2 = {n * n}")

    # centered partition into blocks of psi-mass 2 pi M
    t_lo, t_hi = psi(profile, lo), psi(profile, hi)
    nblocks = int((t_hi - t_lo) / (TWO_PI * M))
    if nblocks < 3:
        raise PlanError(f"window supports only {nblocks} blocks; need >= 3")
    slack = (t_hi - t_lo) - nblocks * TWO_PI * M
    edges_psi = [t_lo + 0.5 * slack + TWO_PI * M * k for k in range(nblocks + 1)]
    edges_x = [_psi_inverse(profile, t, bracket=(lo, hi)) for t in edges_psi]

    lam_psi = {p: psi(profile, p) for p in pts}
    assign_all = {p: _block_index(edges_psi, lam_psi[p]) for p in pts}
    used = [p for p in pts if assign_all[p] >= 0]
    excluded = [p for p in pts if assign_all[p] < 0]
    if len(used) < 2:
        raise PlanError("fewer than two nodes inside the partition")
    assign = np.asarray([assign_all[p] for p in used])

    sep0 = min(lam_psi[b] - lam_psi[a] for a, b in zip(used, used[1:]))
    T_used = np.asarray([lam_psi[p] for p in used])
    # density precondition at the block scale (+2 boundary slack)
    _, _, cmax, _ = _step_extrema(T_used, TWO_PI * M, edges_psi[0],
                                  edges_psi[-1] - TWO_PI * M)
    if cmax > (1 - eps) * M + 2:
        raise DensityMarginError(
            f"sliding count {cmax} exceeds (1-eps)M + 2 = {(1 - eps) * M + 2:.2f}")

    # block assignment and padding up to deficiency n^2
    counts = np.bincount(assign, minlength=nblocks)
    padded: list[list[float]] = [[] for _ in range(nblocks)]
    occupied = sorted([lam_psi[p] for p in used] +
                      [psi(profile, q) for q in protect])
    for k in range(nblocks):
        deficit = M - n * n - int(counts[k])
        if deficit < 0:
            raise DensityMarginError(
                f"block {k} holds {counts[k]} nodes; at most {M - n * n} "
                f"allowed for deficiency n^2 = {n * n}")
        # slots anchored at the block edge so exact gap midpoints of
        # lattice node sets stay reachable; the edge slot itself is
        # skipped, a pad there would belong to the neighbouring block
        step = TWO_PI / slot_refine
        slots = edges_psi[k] + np.arange(1, M * slot_refine) * step
        for _ in range(deficit):
            occ = np.asarray(occupied)
            j = np.searchsorted(occ, slots)
            left = np.where(j > 0, slots - occ[np.maximum(j - 1, 0)], np.inf)
            right = np.where(j < len(occ),
                             occ[np.minimum(j, len(occ) - 1)] - slots, np.inf)
            gap = np.minimum(left, right)
            best = int(np.argmax(gap))
            if not gap[best] > 0:
                raise PaddingError(f"no free slot in block {k}")
            t_new = float(slots[best])
            padded[k].append(_psi_inverse(profile, t_new,
                                          bracket=(edges_x[k], edges_x[k + 1])))
            occupied.append(t_new)
            occupied.sort()
    full = sorted(used + [q for blk in padded for q in blk])
    full_psi = np.asarray([psi(profile, p) for p in full])
    sep_after = float(np.min(np.diff(full_psi))) if len(full) > 1 else math.inf
    if sep_after < 0.5 * sep0 * (1 - 1e-9):
        raise PaddingError(
            f"padding reduced separation to {sep_after:.4g} < half the "
            f"original {sep0:.4g}")
    guard = sorted(set(full) | set(float(q) for q in protect))
    guard_psi = np.asarray([psi(profile, p) for p in guard])
    sep_eta = float(np.min(np.diff(guard_psi))) if len(guard) > 1 else sep_after
    eta = 0.5 * sep_eta

    # per-block moment matching of mu/(2 pi) - sum delta_lambda
    warnings: list[str] = []
    xi_blocks, unit_maxes = [], []
    for k in range(nblocks):
        in_blk = sorted([p for p, b in zip(used, assign) if b == k] +
                        padded[k])
        problem = MomentProblem(
            interval=(edges_x[k], edges_x[k + 1]), order=n,
            density=lambda t: profile.phase_derivative(t) / PI,
            masses=tuple((p, -1.0) for p in in_blk),
            total_mass=float(n * n))
        result = moment_match(problem)
        xi_blocks.append(tuple(_snap_real(z) for z in result.points))
        unit_maxes.append(result.max_unit_modulus)
        if result.max_unit_modulus > 10.0:
            warnings.append(f"block {k}: moment points reach "
                            f"{result.max_unit_modulus:.2f} on the unit interval")

    # circle replacement against every mass point (nodes, padding, protect)
    centers = np.asarray(sorted(set(full) | set(float(q) for q in protect)))
    rho = 1.0 / psi_derivative(profile, centers)
    sigma_blocks = []
    min_scaled = math.inf
    min_proj = math.inf
    for k in range(nblocks):
        entries = []
        for xi_pt in xi_blocks[k]:
            scaled = np.abs(xi_pt - centers) / rho
            j = int(np.argmin(scaled))
            if scaled[j] < eta / 5.0:
                tau = 3.0 * eta * rho[j] / 5.0
                for ell in range(n):
                    entries.append(
                        (_snap_real(xi_pt + tau * np.exp(2j * PI * ell / n)), 1))
            else:
                entries.append((complex(xi_pt), n))
        sigma_blocks.append(tuple(entries))
        for z, _ in entries:
            min_scaled = min(min_scaled,
                             float(np.min(np.abs(z - centers) / rho)))
            min_proj = min(min_proj, float(np.min(
                2.0 * np.abs(profile.phase(z.real) - profile.phase(centers)))))
    if min_scaled < eta / 5.0 * (1 - 1e-9):
        raise PlanError(f"replacement separation audit failed: "
                        f"{min_scaled:.4g} < eta/5 = {eta / 5:.4g}")

    inner = (edges_x[1], edges_x[-2])
    return MultiplierPlan(
        window=(edges_x[0], edges_x[-1]), requested_window=(lo, hi),
        M=int(M), n=int(n), eta=float(eta), gamma_used=float(gamma),
        epsilon_margin=eps, edges_x=tuple(edges_x), edges_psi=tuple(edges_psi),
        lambda_used=tuple(used), lambda_excluded=tuple(excluded),
        lambda_block=tuple(int(b) for b in assign),
        padded=tuple(tuple(b) for b in padded),
        xi=tuple(xi_blocks), sigma=tuple(sigma_blocks),
        protect=tuple(float(q) for q in protect),
        inner_window=inner, xi_unit_max=tuple(map(float, unit_maxes)),
        warnings=tuple(warnings), sep_psi_original=float(sep0),
        sep_psi_after=float(sep_after), min_sigma_scaled_dist=float(min_scaled),
        min_sigma_proj_dpsi=float(min_proj))


def _block_members(plan: MultiplierPlan, k: int):
    lam_k = [p for p, b in zip(plan.lambda_used, plan.lambda_block) if b == k]
    return lam_k, list(plan.padded[k])


def block_mass_balance(plan: MultiplierPlan) -> int:
    """Sum over blocks of M - |nodes| - |padding| - n^2; zero exactly
    by integer bookkeeping when the plan is consistent."""
    total = 0
    for k in range(plan.block_count):
        lam_k, pad_k = _block_members(plan, k)
        total += plan.M - len(lam_k) - len(pad_k) - plan.n ** 2
    return total


def block_moment_residuals(profile: PhaseProfile, plan: MultiplierPlan,
                           up_to: int | None = None) -> list:
    """Independent audit: moments 1..n-1 of nu_k on the mapped interval.

    Continuous part by adaptive quadrature (not the Gauss ladder used
    to build the plan), atoms summed directly; entry k lists |moment_j|
    for j = 1..n-1.  Together with the exact mass balance this covers
    the n vanishing moments of each block measure.  Circle replacement
    preserves exactly these (the root-of-unity identity holds for
    j < n), so the audit is quadrature-exact in all cases; pass
    up_to=n to see the j = n drift of replaced blocks.
    """
    n_up = plan.n - 1 if up_to is None else up_to
    out = []
    for k in range(plan.block_count):
        lo, hi = plan.edges_x[k], plan.edges_x[k + 1]
        c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
        lam_k, pad_k = _block_members(plan, k)
        res_k = []
        for j in range(1, n_up + 1):
            cont, _ = integrate.quad(
                lambda t: ((t - c) / r) ** j * profile.phase_derivative(t) / PI,
                lo, hi, limit=200, epsabs=1e-11, epsrel=1e-11)
            atom = -sum(((p - c) / r) ** j for p in lam_k + pad_k)
            disc = -sum(m * ((z - c) / r) ** j for z, m in plan.sigma[k])
            res_k.append(abs(cont + atom + disc))
        out.append(res_k)
    return out


# ---------------------------------------------------------------------------
# log-potential
# ---------------------------------------------------------------------------

class PotentialField:
    """Evaluator of w(z) for a plan's signed measure:

        w(z) = (1/2 pi) int log|z - t| psi'(t) dt
               - sum_Lambda log|z - lambda| - sum_Sigma m log|z - sigma|.

    The continuous integral runs over the partition support with
    geometric panel refinement toward Re z (16-point Gauss per panel,
    innermost offset 1e-12 of the window scale), giving roughly 1e-8
    absolute accuracy away from the atoms.  The atom weights are
    negative, so w tends to +inf at the atoms and e^{-w} vanishes
    there; exact hits return +inf.

    drop_lambda removes chosen node atoms, which cancels their log
    singularity exactly; peak functions use this to divide out poles.
    """

    def __init__(self, profile: PhaseProfile, plan: MultiplierPlan,
                 drop_lambda=()):
        self.profile = profile
        self.plan = plan
        remaining = list(drop_lambda)
        atoms = []
        for p in plan.lambda_full():
            if remaining and _pop_close(remaining, p):
                continue
            atoms.append((complex(p), 1.0))
        if remaining:
            raise ValueError(f"drop_lambda entries not in the plan: {remaining}")
        for blk in plan.sigma:
            for z, m in blk:
                atoms.append((complex(z), float(m)))
        self._atoms = atoms
        self._atom_z = np.asarray([p for p, _ in atoms])
        self._atom_m = np.asarray([m for _, m in atoms])
        self._A = plan.edges_x[0]
        self._B = plan.edges_x[-1]
        self._gl_x, self._gl_w = roots_legendre(16)

    def with_poles_removed(self, poles) -> "PotentialField":
        return PotentialField(self.profile, self.plan, drop_lambda=poles)

    def w(self, z) -> float:
        z = complex(z)
        d = np.abs(z - self._atom_z)
        if np.any(d == 0.0):
            return math.inf
        disc = -float(np.sum(self._atom_m * np.log(d)))
        return self._continuous(z) + disc

    def w_many(self, zs) -> np.ndarray:
        return np.asarray([self.w(z) for z in np.atleast_1d(zs)])

    def _continuous(self, z: complex) -> float:
        A, B = self._A, self._B
        s = min(max(z.real, A), B)
        scale = B - A
        edges = [A]
        for off in reversed(_offsets(s - A, 1e-12 * scale, scale / 16.0)[1:]):
            edges.append(s - off)
        for off in _offsets(B - s, 1e-12 * scale, scale / 16.0)[1:]:
            edges.append(s + off)
        edges.append(B)
        edges = np.unique(np.clip(np.asarray(edges), A, B))
        if len(edges) < 2:
            return 0.0
        mids = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * np.diff(edges)
        nodes = (mids[:, None] + half[:, None] * self._gl_x[None, :]).ravel()
        wts = (half[:, None] * self._gl_w[None, :]).ravel()
        dens = self.profile.phase_derivative(nodes) / PI
        with np.errstate(divide="ignore"):
            logs = np.log(np.abs(z - nodes))
        vals = wts * dens * logs
        return float(np.sum(vals[np.isfinite(vals)]))


def _offsets(side: float, h_min: float, cap: float):
    """0 < h_min < 2 h_min < ... out to side, growth capped at cap."""
    offs = [0.0]
    off = h_min
    while off < side:
        offs.append(off)
        off += min(off, cap)
    if side > 0:
        offs.append(side)
    return offs


def _pop_close(items: list, p: float, tol: float = 1e-9) -> bool:
    for i, q in enumerate(items):
        if abs(q - p) <= tol * max(1.0, abs(p)):
            items.pop(i)
            return True
    return False


def potential(field: PotentialField, z) -> float:
    return field.w(z)


@dataclass(frozen=True)
class LambdaRatio:
    lam: float
    ratio_min: float
    ratio_max: float

    @property
    def spread(self) -> float:
        return self.ratio_max / self.ratio_min if self.ratio_min > 0 else math.inf

    def to_json(self):
        return {"lambda": self.lam, "ratio_min": self.ratio_min,
                "ratio_max": self.ratio_max, "spread": self.spread}


@dataclass(frozen=True)
class MultiplierReport:
    sup_minus_w: float            # B with e^{-w} <= e^B on the probe grid
    witness_x: float
    ratios: tuple                 # per-node LambdaRatio over I_psi(lambda, eta/5)
    spread_max: float
    deriv_anchor_min: float       # e^{-w(x)} / (|x - lambda| phi'(lambda))
    deriv_anchor_max: float
    grid_n: int
    skipped: int

    def to_json(self):
        return {"sup_minus_w": self.sup_minus_w, "witness_x": self.witness_x,
                "ratios": [r.to_json() for r in self.ratios],
                "spread_max": self.spread_max,
                "deriv_anchor_min": self.deriv_anchor_min,
                "deriv_anchor_max": self.deriv_anchor_max,
                "grid_n": self.grid_n, "skipped": self.skipped}


def verify_multiplier(profile: PhaseProfile, field: PotentialField,
                      grid_n: int = 801,
                      lambda_samples: int = 33) -> MultiplierReport:
    """Probe the two multiplier estimates on the plan's inner window.

    (a) global bound: B = sup -w over a real grid (atom collisions are
    skipped); (b) near each node, e^{-w(x)} against d_psi(x, lambda)
    across I_psi(lambda, eta/5), reporting the spread of the ratio, plus
    the derivative anchor e^{-w}/|x - lambda| against phi'(lambda) at
    the innermost samples.

    The probe radius is eta/5 capped at half the realized Sigma
    clearance.  The comparison cannot extend past the first Sigma zero
    (e^{-w} vanishes there), and a kept xi may sit arbitrarily little
    beyond the eta/5 replacement trigger; half the clearance keeps
    every sample at least its own radius away from Sigma, which bounds
    the per-atom distance swing by a factor 3.
    """
    plan = field.plan
    lo, hi = plan.inner_window
    xs = np.linspace(lo, hi, grid_n)
    atom_pos = field._atom_z.real
    scale = max(1.0, abs(lo), abs(hi))
    skipped = 0
    best, best_x = -math.inf, math.nan
    for x in xs:
        if np.min(np.abs(x - atom_pos)) < 1e-9 * scale:
            skipped += 1
            continue
        val = -field.w(x)
        if val > best:
            best, best_x = val, float(x)
    ratios = []
    d_lo, d_hi = math.inf, -math.inf
    eta_v = plan.eta / 5.0
    if math.isfinite(plan.min_sigma_scaled_dist):
        eta_v = min(eta_v, 0.5 * plan.min_sigma_scaled_dist)
    for lam in plan.lambda_full():
        if not lo <= lam <= hi:
            continue
        t = psi(profile, lam)
        a = _psi_inverse(profile, t - eta_v, bracket=plan.window)
        b = _psi_inverse(profile, t + eta_v, bracket=plan.window)
        rmin, rmax = math.inf, -math.inf
        for x in np.linspace(a, b, lambda_samples):
            d = 2.0 * abs(profile.phase(x) - profile.phase(lam))
            if d < 0.05 * eta_v:
                continue
            ratio = math.exp(-field.w(x)) / d
            rmin, rmax = min(rmin, ratio), max(rmax, ratio)
        ratios.append(LambdaRatio(lam=float(lam), ratio_min=rmin, ratio_max=rmax))
        for sgn in (-1.0, 1.0):
            x = _psi_inverse(profile, t + sgn * 0.02 * plan.eta,
                             bracket=plan.window)
            anchor = math.exp(-field.w(x)) / (abs(x - lam)
                                              * profile.phase_derivative(lam))
            d_lo, d_hi = min(d_lo, anchor), max(d_hi, anchor)
    spread_max = max((r.spread for r in ratios), default=math.inf)
    return MultiplierReport(sup_minus_w=float(best), witness_x=best_x,
                            ratios=tuple(ratios), spread_max=float(spread_max),
                            deriv_anchor_min=float(d_lo),
                            deriv_anchor_max=float(d_hi),
                            grid_n=grid_n, skipped=skipped)


# ---------------------------------------------------------------------------
# peak functions
# ---------------------------------------------------------------------------

def peak_lambda(profile: PhaseProfile, x0: float, window) -> RealSequence:
    """Node set {y : d_psi(x0, y) = 4 pi k, k >= 1} inside the window.

    Consecutive psi-gaps are 4 pi, so the upper mu-density is 1/(4 pi),
    safely inside the multiplier margin epsilon = 1/2.
    """
    lo, hi = float(window[0]), float(window[1])
    t0 = psi(profile, x0)
    t_lo, t_hi = psi(profile, lo), psi(profile, hi)
    pts = []
    k = 1
    while t0 - 4 * PI * k > t_lo or t0 + 4 * PI * k < t_hi:
        for t in (t0 - 4 * PI * k, t0 + 4 * PI * k):
            if t_lo < t < t_hi:   # window is open, endpoints stay out
                pts.append(_psi_inverse(profile, t, bracket=(lo, hi)))
        k += 1
    return RealSequence(tuple(sorted(pts)), separation_eps=TWO_PI)


class PeakEvaluator:
    """Concentrated bump at x0: weighted modulus of the multiplier
    divided by its m nearest plan zeros.

    Values are e^{Psi(x0) - Psi(y)} |h(y)| with h normalized to 1 at
    x0; dividing out a pole drops that atom from the potential's mass
    list, cancelling the log singularity analytically, so the evaluator
    is smooth across the divided zeros.
    """

    def __init__(self, profile: PhaseProfile, field: PotentialField,
                 x0: float, m_poles: int, epsilon: float = 0.0):
        plan = field.plan
        lam = np.asarray(plan.lambda_full())
        if not 1 <= m_poles <= len(lam):
            raise ValueError(f"m_poles must be in 1..{len(lam)}")
        t0 = psi(profile, x0)
        dist = np.abs(np.asarray([psi(profile, p) for p in lam]) - t0)
        order = np.argsort(dist, kind="stable")
        poles = tuple(sorted(float(lam[i]) for i in order[:m_poles]))
        self.profile = profile
        self.x0 = float(x0)
        self.poles = poles
        self.epsilon = float(epsilon)  # growth allowance; only shifts the scale
        self._field = field.with_poles_removed(poles)
        self._w0 = self._field.w(self.x0)
        if not math.isfinite(self._w0):
            raise ValueError("x0 collides with a plan mass; pass it via "
                             "protect= when building the plan")

    def log_modulus(self, y) -> np.ndarray:
        ys = np.atleast_1d(np.asarray(y, dtype=float))
        return np.asarray([self._w0 - self._field.w(v) for v in ys])

    def __call__(self, y):
        out = np.exp(self.log_modulus(y))
        return float(out[0]) if np.ndim(y) == 0 else out


def peak_function(profile: PhaseProfile, field: PotentialField, x0: float,
                  m_poles: int, epsilon: float = 0.0) -> PeakEvaluator:
    return PeakEvaluator(profile, field, x0, m_poles, epsilon)


def peak_decay_fit(profile: PhaseProfile, peak: PeakEvaluator,
                   d_lo: float = 5.0, d_hi: float = 50.0,
                   samples: int = 40) -> dict:
    """Log-log slope of the peak modulus against d_psi(x0, y).

    The sample window [d_lo, d_hi] is in plain distance |y - x0|, which
    is what places it beyond the divided-pole cluster (the density cap
    forces those poles to span several blocks of phase mass, so a
    window stated in the metric would start inside the cluster).  The
    regression itself runs against the metric distance, matching the
    1/(1 + d_psi^k) form of the bound; the two slopes agree whenever
    psi' is comparable across the window.  Samples are log-spaced on
    both sides of x0; the least-squares slope estimates the decay
    order, about -m for m divided poles.
    """
    plan = peak._field.plan
    lo, hi = plan.window
    ds, vals = [], []
    for d in np.geomspace(d_lo, d_hi, max(samples // 2, 4)):
        for sgn in (-1.0, 1.0):
            y = peak.x0 + sgn * d
            if not lo < y < hi:
                continue
            v = float(peak(y))
            if v > 0.0:
                ds.append(2.0 * abs(profile.phase(y)
                                    - profile.phase(peak.x0)))
                vals.append(v)
    if len(ds) < 4:
        raise ValueError("not enough usable samples for a decay fit")
    logs_d = np.log(np.asarray(ds))
    logs_v = np.log(np.asarray(vals))
    du = logs_d - logs_d.mean()
    slope = float(du @ (logs_v - logs_v.mean()) / (du @ du))
    return {"slope": slope, "points": len(ds), "d_lo": d_lo, "d_hi": d_hi}


def peak_mass_profile(profile: PhaseProfile, peak: PeakEvaluator,
                      d_cut: float = 50.0, d_max: float = 200.0,
                      grid_n: int = 2001) -> dict:
    """psi'-weighted L2 profile of the section y -> |h(y)|.

    Substituting u = psi(y) turns int |h|^2 psi' dy into a uniform-grid
    integral in u, done by composite Simpson; reports the relative tail
    mass beyond plain distance d_cut from x0, out to d_max (capped at
    the plan window; distances in the same units as peak_decay_fit).
    """
    plan = peak._field.plan
    scale = 1e-9 * (plan.window[1] - plan.window[0])
    y_lo = max(peak.x0 - d_max, plan.window[0] + scale)
    y_hi = min(peak.x0 + d_max, plan.window[1] - scale)
    us = np.linspace(psi(profile, y_lo), psi(profile, y_hi), grid_n)
    ys = np.asarray([_psi_inverse(profile, u, bracket=plan.window) for u in us])
    vals = peak(ys) ** 2
    h = us[1] - us[0]
    total = _simpson_uniform(vals, h)
    core = _simpson_uniform(
        np.where(np.abs(ys - peak.x0) <= d_cut, vals, 0.0), h)
    tail = max(total - core, 0.0)
    return {"total": float(total), "core": float(core),
            "tail_fraction": float(tail / total) if total > 0 else math.nan,
            "d_cut": d_cut, "d_max": d_max}


def _simpson_uniform(y: np.ndarray, h: float) -> float:
    n = len(y)
    if n < 3:
        return float(0.5 * h * (y[0] + y[-1])) if n == 2 else 0.0
    if n % 2 == 0:
        return _simpson_uniform(y[:-1], h) + float(0.5 * h * (y[-2] + y[-1]))
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-2:2] = 2.0
    return float(h / 3.0 * (w @ y))


# ---------------------------------------------------------------------------
# Lagrange interpolation
# ---------------------------------------------------------------------------

class LagrangeInterpolant:
    """Windowed Lagrange sum over a plan's zero multiset,

        F(x) = sum_l v_l prod_{zeta != zero(l)} (x - zeta) / (l - zeta).

    Interpolation nodes are the plan's original nodes; padding points
    and discrete masses enter every basis product as fixed zeros, so F
    vanishes there and reproduces the data exactly at the nodes (each
    basis denominator reuses the numerator's own log terms, hence the
    node values are exactly delta).  A bare RealSequence acts as a
    trivial plan whose multiset is just its own points.
    """

    def __init__(self, profile: PhaseProfile, plan, values):
        if isinstance(plan, MultiplierPlan):
            nodes = list(plan.lambda_used)
            zeros = [complex(p) for p in nodes]
            zeros += [complex(q) for blk in plan.padded for q in blk]
            mults = [1] * len(zeros)
            for blk in plan.sigma:
                for z, m in blk:
                    zeros.append(complex(z))
                    mults.append(int(m))
        else:
            nodes = list(plan.points)
            zeros = [complex(p) for p in nodes]
            mults = [1] * len(zeros)
        values = np.asarray(values, dtype=float)
        if values.shape != (len(nodes),):
            raise ValueError("values must match the interpolation node count")
        self.profile = profile
        self.nodes = np.asarray(nodes, dtype=float)
        self.values = values
        self._zeros = np.asarray(zeros, dtype=complex)
        self._mults = np.asarray(mults, dtype=int)
        self._real_zero = self._zeros.imag == 0.0
        gaps = np.abs(self._zeros[:, None] - self._zeros[None, :])
        np.fill_diagonal(gaps, np.inf)
        if float(np.min(gaps[:len(nodes)])) < 1e-12:
            raise IllConditionedError(
                "a node sits within 1e-12 of another zero; the derivative "
                "surrogate is degenerate")
        self._den_log = np.empty(len(nodes))
        self._den_sign = np.empty(len(nodes))
        for i in range(len(nodes)):
            self._den_log[i], self._den_sign[i] = self._log_product(
                complex(nodes[i]), skip=i)

    def _log_product(self, z: complex, skip: int):
        """log of |prod_{j != skip} (z - zero_j)^mult_j| and its sign.

        Complex zeros come in conjugate pairs (real data), so only real
        zeros contribute sign flips.
        """
        diffs = z - self._zeros
        diffs[skip] = 1.0
        mags = np.abs(diffs)
        if np.any(mags == 0.0):
            return -math.inf, 1.0
        lg = float(np.sum(self._mults * np.log(mags)))
        neg = (diffs.real < 0.0) & self._real_zero
        flips = int(np.sum(self._mults[neg] % 2))
        return lg, -1.0 if flips % 2 else 1.0

    def __call__(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros(len(xs))
        for k, xv in enumerate(xs):
            z = complex(xv)
            acc = 0.0
            for i in range(len(self.nodes)):
                if self.values[i] == 0.0:
                    continue
                lg, sg = self._log_product(z, skip=i)
                if lg == -math.inf:   # x sits on another zero of this term
                    continue
                acc += self.values[i] * sg * self._den_sign[i] * \
                    math.exp(lg - self._den_log[i])
            out[k] = acc
        return float(out[0]) if np.ndim(x) == 0 else out

    def norm_windowed(self, window, grid_n: int = 2001) -> float:
        """Quadrature of |F/E|^2 over the window (the norm surrogate)."""
        xs = np.linspace(float(window[0]), float(window[1]), grid_n)
        phi_log = np.asarray([eval_Phi(self.profile.spec, x) for x in xs])
        vals = (self(xs) * np.exp(-phi_log)) ** 2
        return _simpson_uniform(vals, xs[1] - xs[0])


def lagrange_interpolate(profile: PhaseProfile, plan,
                         values) -> LagrangeInterpolant:
    return LagrangeInterpolant(profile, plan, values)
