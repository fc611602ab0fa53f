"""Greedy dyadic decomposition, bubble extraction and linear profile decomposition.

The pipeline for a sequence ``u_n``:

1. split ``F u_n`` greedily into amplitude-capped pieces on dyadic cubes and
   group pieces whose cubes sit at comparable scale and position;
2. move every group to a canonical frame ``(h, b)``;
3. look for space-time bubbles ``U(s) T(a) phi`` in the renormalized groups;
4. rebuild ``u_n`` from the averaged profiles and keep the exact remainder.

All "limit in n" quantities are reported as the value at the largest n plus a
trend; nothing here decides a true limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy import optimize

from .errors import (ConfigurationError, ExtractionError, StallError,
                     ValidationError, BandOverflowError)
from .grid import FOURIER, PHYSICAL, DyadicCube, GridField, dyadic_exponent, resample
from .spaces import (MorreySpec, hat_morrey_norm, size_function,
                     spectral_moments, star)
from .symmetry import Deformation, apply, invert, orthogonality_divergence, shift_and_flow


def greedy_spec(d: int, alpha: float, q_tilde: float | None = None) -> MorreySpec:
    """``M^{d alpha}_{q~, r~}`` with ``r~ = ((d+2) alpha)^*`` and q~ inside ``(2, (d + 2/(d+3)) alpha)``."""
    hi = (d + 2.0 / (d + 3)) * alpha
    if not hi > 2:
        raise ConfigurationError(f"no admissible q~ for d={d}, alpha={alpha}")
    q = 0.5 * (2 + hi) if q_tilde is None else q_tilde
    if not 2 < q < hi:
        raise ConfigurationError(f"q~ = {q} must lie in (2, {hi})")
    return MorreySpec(d * alpha, q, star((d + 2) * alpha), hat=True)


# -- greedy scale decomposition --------------------------------------------------------


@dataclass(frozen=True)
class ScalePiece:
    """Spectral piece assigned to the cube ``tau = h([0,1)^d + b)``.

    ``members`` lists every selected cube folded into this piece; ``cube`` is
    the one with the largest selection score.
    """

    cube: DyadicCube
    field: GridField = field(repr=False)
    amp_cap: float
    local_mass: float
    score: float
    members: tuple[DyadicCube, ...] = ()

    @property
    def h(self) -> float:
        return self.cube.side

    @property
    def b(self) -> np.ndarray:
        return np.asarray(self.cube.k)

    def support(self) -> np.ndarray:
        return self.field.values != 0

    def to_json(self) -> dict:
        return {"cube": self.cube.to_json(), "amp_cap": self.amp_cap, "local_mass": self.local_mass,
                "score": self.score, "members": [c.to_json() for c in self.members]}


@dataclass(frozen=True)
class GreedyResult:
    """Pieces (grouped), raw single-cube pieces, remainder and the norm history."""

    pieces: tuple[ScalePiece, ...]
    remainder: GridField
    raw: tuple[ScalePiece, ...] = ()
    history: tuple[float, ...] = ()
    spec: MorreySpec | None = None

    def __iter__(self) -> Iterator:
        return iter((list(self.pieces), self.remainder))

    def reconstruct(self) -> GridField:
        total = self.remainder.values.copy()
        for p in self.raw:
            total = total + p.field.values
        return self.remainder.with_values(total)


def _level_scores(absvals: np.ndarray, h: float, P: float, Q: float, C1: float, m: int) -> np.ndarray:
    """Truncated normalized masses of all cubes of side ``2^m h``."""
    d = absvals.ndim
    s = 2.0**m * h
    cap = C1 * s ** (-d / P)
    w = np.where(absvals <= cap, absvals, 0.0) ** Q * h**d
    n = absvals.shape[0]
    nb = n >> m
    mass = w.reshape(sum(((nb, 1 << m) for _ in range(d)), ())).sum(axis=tuple(range(1, 2 * d, 2)))
    return s ** (d * (1.0 / P - 1.0 / Q)) * mass ** (1.0 / Q)


def _select(absvals: np.ndarray, h: float, J: int, P: float, Q: float, C1: float,
            tie_rtol: float) -> tuple[float, DyadicCube, float]:
    n, d = absvals.shape[0], absvals.ndim
    levels = []
    best = 0.0
    for m in range(n.bit_length() - 1):
        sc = _level_scores(absvals, h, P, Q, C1, m)
        levels.append(sc)
        best = max(best, float(sc.max()))
    if best == 0.0:
        return 0.0, None, 0.0
    # ties: coarsest scale first, then smallest lattice index
    for m in range(len(levels) - 1, -1, -1):
        sc = levels[m]
        hits = np.flatnonzero(sc.ravel() >= best * (1 - tie_rtol))
        if hits.size:
            nb = n >> m
            ks = [tuple(int(i) - nb // 2 for i in np.unravel_index(f, (nb,) * d)) for f in hits]
            k = min(ks)
            s = 2.0**m * h
            return float(sc[tuple(np.add(k, nb // 2))]), DyadicCube(J - m, k), C1 * s ** (-d / P)
    raise AssertionError("unreachable")


def _cube_mask(fh: GridField, cube: DyadicCube) -> np.ndarray:
    ax = fh.axis()
    masks = [(ax >= lo) & (ax < lo + cube.side) for lo in cube.lower]
    mask = masks[0]
    for mm in masks[1:]:
        mask = np.multiply.outer(mask, mm)
    return mask


def _frame_distance(c1: DyadicCube, c2: DyadicCube) -> float:
    gap = np.abs(c1.center - c2.center).max() / max(c1.side, c2.side)
    return abs(c1.j - c2.j) + float(gap)


def _density(piece: ScalePiece) -> np.ndarray:
    rho = np.abs(piece.field.to_physical().values) ** 2
    tot = rho.sum()
    return rho / tot if tot > 0 else rho


def _group(raw: Sequence[ScalePiece], radius: float, overlap: float) -> list[list[int]]:
    """Single-linkage groups of pieces that share scale, frequency and location.

    Two pieces link when their cubes are within ``radius`` (scale steps plus
    center gap in units of the larger side) and their physical densities
    overlap by at least ``overlap`` (histogram intersection).
    """
    parent = list(range(len(raw)))
    dens: dict[int, np.ndarray] = {}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def rho(i):
        if i not in dens:
            dens[i] = _density(raw[i])
        return dens[i]

    for i in range(len(raw)):
        for j in range(i):
            if find(i) == find(j) or _frame_distance(raw[i].cube, raw[j].cube) > radius:
                continue
            if overlap <= 0 or float(np.minimum(rho(i), rho(j)).sum()) >= overlap:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(len(raw)):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _merge(raw: Sequence[ScalePiece], idx: Sequence[int], P: float) -> ScalePiece:
    lead = max(idx, key=lambda i: (raw[i].score, -i))
    vals = sum(raw[i].field.values for i in idx)
    f = raw[lead].field.with_values(vals)
    cube = raw[lead].cube
    mask = _cube_mask(f, cube)
    local = cube.volume ** (1.0 / P - 0.5) * math.sqrt(float(np.sum(np.abs(vals[mask]) ** 2)) * f.dxi**f.dim)
    return ScalePiece(cube, f, max(raw[i].amp_cap for i in idx), local, raw[lead].score,
                      tuple(raw[i].cube for i in sorted(idx)))


def greedy_scale_decomposition(u: GridField, eps: float, spec: MorreySpec, C1: float = 1.0,
                               merge_radius: float = 3.5, overlap: float = 0.3, stall_delta: float = 1e-6,
                               max_pieces: int = 1000, tie_rtol: float = 1e-9) -> GreedyResult:
    """Peel amplitude-capped dyadic pieces off ``F u`` until ``||q|| <= eps``.

    Each step picks the cube maximizing ``|tau|^{1/P - 1/Q} ||F u 1_{|F u| <= A}||_{L^Q(tau)}``
    with ``(P, Q) = (p', q')`` and ``A = C1 |tau|^{-1/P}``, moves those samples
    into a piece and repeats.  Pieces are disjoint sets of Fourier samples, so
    ``u = sum(pieces) + q`` holds exactly.  Raw pieces are then grouped (see
    :func:`_group`); ``overlap=0`` groups by cube geometry alone.
    """
    if not eps > 0:
        raise ConfigurationError("eps must be positive")
    if not spec.hat:
        raise ConfigurationError("the greedy decomposition runs in a hat-mode space")
    if not C1 > 0:
        raise ConfigurationError("C1 must be positive")
    P, Q, _ = spec.sample_exponents()
    fh = u.in_space(FOURIER)
    J = dyadic_exponent(fh.dxi)
    rem = np.array(fh.values)
    norm = hat_morrey_norm(fh, spec)
    history = [norm]
    raw: list[ScalePiece] = []
    while history[-1] > eps:
        if len(raw) >= max_pieces:
            raise StallError(f"piece limit {max_pieces} reached with ||q|| = {history[-1]:.3e}")
        score, cube, cap = _select(np.abs(rem), fh.dxi, J, P, Q, C1, tie_rtol)
        if cube is None:
            raise StallError(f"every sample exceeds its amplitude cap; ||q|| = {history[-1]:.3e}")
        mask = _cube_mask(fh, cube) & (np.abs(rem) <= cap)
        piece_vals = np.where(mask, rem, 0)
        rem = np.where(mask, 0, rem)
        local = cube.volume ** (1.0 / P - 0.5) * math.sqrt(float(np.sum(np.abs(piece_vals) ** 2)) * fh.dxi**fh.dim)
        raw.append(ScalePiece(cube, fh.with_values(piece_vals), cap, local, score, (cube,)))
        history.append(hat_morrey_norm(fh.with_values(rem), spec))
        if len(history) > 3 and history[-1] > (1 - stall_delta) * history[-4]:
            raise StallError(f"||q|| stalled at {history[-1]:.3e} after {len(raw)} pieces")
    groups = _group(raw, merge_radius, overlap)
    pieces = [_merge(raw, g, P) for g in groups]
    pieces.sort(key=lambda p: -p.score)
    return GreedyResult(tuple(pieces), fh.with_values(rem), tuple(raw), tuple(history), spec)


# -- grids and frames -----------------------------------------------------------------


def compact(f: GridField, tol: float = 1e-10, min_n: int = 32) -> GridField:
    """Smallest power-of-two grid (same grid family) that loses at most ``tol``."""
    g = f.in_space(PHYSICAL)
    changed = True
    while changed and g.n > min_n:
        changed = False
        for extent, n in ((g.extent / 2, g.n // 2), (g.extent, g.n // 2)):
            try:
                g = resample(g, extent, n, tol=tol)
                changed = True
                break
            except BandOverflowError:
                continue
    return g


def common_grid(fields: Sequence[GridField]) -> tuple[float, int]:
    """Largest extent and finest spacing among ``fields``."""
    extent = max(f.extent for f in fields)
    dx = min(f.dx for f in fields)
    return extent, int(round(2 * extent / dx))


def canonical_frame(piece: GridField) -> Deformation:
    """``D(h) P(-b)`` with ``h`` the dyadic spectral RMS radius and ``b = round(centroid / h)``."""
    centroid, rms, _ = spectral_moments(piece)
    m = 0 if rms == 0 else int(round(math.log2(rms)))
    b = np.round(centroid / 2.0**m)
    return Deformation(m=m, b=tuple(-b + 0.0))


def renormalize(piece: GridField, frame: Deformation, alpha: float) -> GridField:
    """``frame^{-1} piece``: the cube ``h([0,1)^d + b)`` moves next to the origin."""
    return apply(invert(frame), piece.in_space(PHYSICAL), alpha)


# -- bubble extraction ------------------------------------------------------------------


@dataclass(frozen=True)
class Bubble:
    """One extracted bubble ``U(s_n) T(a_n) phi_n`` per sequence entry."""

    s: np.ndarray
    a: np.ndarray
    phi: GridField = field(repr=False)
    estimates: tuple[GridField, ...] = field(repr=False)
    correlation: np.ndarray = None

    def to_json(self) -> dict:
        return {"s": self.s, "a": self.a, "correlation": self.correlation}


@dataclass(frozen=True)
class BubbleExtraction:
    bubbles: tuple[Bubble, ...]
    residuals: tuple[GridField, ...] = field(repr=False)
    separations: dict = field(default_factory=dict)

    def __iter__(self):
        for b in self.bubbles:
            yield b.a, b.s, b.phi, self.residuals

    def __len__(self) -> int:
        return len(self.bubbles)

    def diverging(self) -> dict:
        """Pairs whose separation grows strictly along the sequence."""
        return {k: bool(np.all(np.diff(v) > 0)) for k, v in self.separations.items()}


def _window_hat(fh: GridField, width: float) -> np.ndarray:
    """Unitary transform of the real window ``exp(-|x|^2 / (2 width^2))``."""
    k2 = sum(k**2 for k in fh.mesh())
    return width**fh.dim * np.exp(-0.5 * width**2 * k2)


def _auto_s_grid(r: GridField, s_max: float, ds: float) -> np.ndarray:
    _, rms, _ = spectral_moments(r)
    reach = min(s_max, 0.25 * r.extent / max(rms, 1.0))
    reach = max(reach, 2 * ds)
    return np.arange(-reach, reach + 0.5 * ds, ds)


def _correlation_peak(r: GridField, s_grid: np.ndarray, width: float,
                      batch: int = 2**22) -> tuple[float, float, np.ndarray, int]:
    """Grid maximum of ``|<U(-s) T(-a) r, w>|`` over s in ``s_grid`` and a on the grid."""
    fh = r.to_fourier()
    d = fh.dim
    base = fh.values * _window_hat(fh, width)
    k2 = sum(k**2 for k in fh.mesh())
    scale = (2 * np.pi) ** (d / 2)
    best = (-1.0, 0, None)
    per = max(1, batch // base.size)
    for lo in range(0, len(s_grid), per):
        ss = s_grid[lo:lo + per]
        stack = base[None] * np.exp(1j * ss.reshape((-1,) + (1,) * d) * k2[None])
        ax = tuple(range(1, d + 1))
        phys = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(stack, axes=ax), axes=ax), axes=ax)
        phys = np.abs(phys) * (scale * (math.sqrt(2 * math.pi) / fh.dx) ** d)
        flat = phys.reshape(len(ss), -1)
        idx = np.unravel_index(int(np.argmax(flat)), flat.shape)
        if flat[idx] > best[0]:
            best = (float(flat[idx]), lo + idx[0], np.array(np.unravel_index(idx[1], phys.shape[1:])))
    val, s_idx, x_idx = best
    a = np.array([fh.axis(PHYSICAL)[i] for i in x_idx]) if x_idx is not None else np.zeros(d)
    return val, float(s_grid[s_idx]), a, s_idx


def _refine(r: GridField, s0: float, a0: np.ndarray, width: float, ds: float) -> tuple[float, float, np.ndarray]:
    fh = r.to_fourier()
    win = _window_hat(fh, width)
    keep = win > 1e-18 * win.max()                  # the window kills the rest
    base = (fh.values * win * fh.dxi**fh.dim)[keep]
    mesh = [k[keep] for k in fh.mesh()]
    k2 = sum(k**2 for k in mesh)

    def neg(z):
        phase = z[0] * k2 + sum(ai * k for ai, k in zip(z[1:], mesh))
        return -abs(complex(np.sum(base * np.exp(1j * phase))))

    z0 = np.concatenate([[s0], a0])
    simplex = [z0] + [z0 + np.eye(len(z0))[i] * (0.5 * ds if i == 0 else 0.5 * fh.dx) for i in range(len(z0))]
    res = optimize.minimize(neg, z0, method="Nelder-Mead",
                            options={"initial_simplex": np.array(simplex), "xatol": 1e-11, "fatol": 1e-15,
                                     "maxiter": 4000})
    z = res.x if -res.fun >= -neg(z0) else z0
    return -neg(z), float(z[0]), np.asarray(z[1:])


def _localizer(g: GridField, radius: float) -> np.ndarray:
    return np.exp(-((g.radius() / radius) ** 16))


def extract_bubbles(R: Sequence[GridField], F_cap: GridField | float | None = None, max_bubbles: int = 1,
                    *, s_grid: Sequence[float] | None = None, s_max: float = 64.0, ds: float = 0.5,
                    width: float = 1.0, localize: float = 8.0, tol: float = 1e-3) -> BubbleExtraction:
    """Peel ``U(s_n) T(a_n) phi`` bubbles off a sequence of fields.

    For each n the correlation ``|<U(-s) T(-a) R_n, w>|`` with a Gaussian
    window ``w`` of the given width is maximized over the s grid times the
    spatial grid, then refined with Nelder-Mead.  The aligned field is cut
    off smoothly at ``localize`` and subtracted.  Extraction stops once the
    mean aligned correlation falls below ``tol`` times the mean input norm.
    """
    R = [r.in_space(PHYSICAL) for r in R]
    if len(R) < 3:
        raise ValidationError("bubble extraction needs a sequence of at least 3 fields")
    if F_cap is not None:
        for i, r in enumerate(R):
            cap = F_cap.in_space(FOURIER).values if isinstance(F_cap, GridField) else F_cap
            if np.any(np.abs(r.to_fourier().values) > cap * (1 + 1e-12)):
                raise ValidationError(f"entry {i} exceeds the Fourier amplitude cap")
    d = R[0].dim
    wnorm = (math.pi * width**2) ** (d / 4)
    # localize only on the common grid: a localized coarse estimate is not band-limited
    ext, n = common_grid(R)
    current = [resample(r.in_space(PHYSICAL), ext, n) for r in R]
    bubbles: list[Bubble] = []
    floor = tol * float(np.mean([r.l2_norm() for r in R]))
    for _ in range(max_bubbles):
        norms = np.array([r.l2_norm() for r in current])
        if norms.max() == 0:
            break
        ss, aa, cc, est, resid = [], [], [], [], []
        for r in current:
            if r.l2_norm() == 0:
                ss.append(0.0); aa.append(np.zeros(d)); cc.append(0.0)
                est.append(r); resid.append(r)
                continue
            grid = np.asarray(s_grid, dtype=float) if s_grid is not None else _auto_s_grid(r, s_max, ds)
            val, s0, a0, idx = _correlation_peak(r, grid, width)
            if idx in (0, len(grid) - 1) and len(grid) > 2:
                if s_grid is not None:
                    raise ExtractionError(f"correlation peak at the edge of the s grid (s = {s0})")
                grid = np.arange(2 * grid[0], 2 * grid[-1] + 0.5 * ds, ds)
                val, s0, a0, idx = _correlation_peak(r, grid, width)
                if idx in (0, len(grid) - 1):
                    raise ExtractionError(f"correlation peak at the edge of the s grid (s = {s0})")
            step = grid[1] - grid[0] if len(grid) > 1 else ds
            val, s0, a0 = _refine(r, s0, a0, width, step)
            aligned = shift_and_flow(r, -a0, -s0)
            phi = aligned.with_values(aligned.values * _localizer(aligned, localize))
            ss.append(s0); aa.append(a0); cc.append(val / wnorm)
            est.append(phi)
            resid.append(r - shift_and_flow(phi, a0, s0))
        cc = np.array(cc)
        if cc.mean() < floor:
            break
        avg = sum(e.values for e in est) / len(est)
        bubbles.append(Bubble(np.array(ss), np.array(aa), GridField(avg, ext, PHYSICAL), tuple(est), cc))
        current = resid
    seps = {}
    for i in range(len(bubbles)):
        for j in range(i + 1, len(bubbles)):
            bi, bj = bubbles[i], bubbles[j]
            seps[(i, j)] = np.abs(bi.s - bj.s) + np.linalg.norm(bi.a - bj.a, axis=1)
    return BubbleExtraction(tuple(bubbles), tuple(current), seps)



# -- assembled profile decomposition --------------------------------------------------

# profiles are truncated to the grid of each entry; the remainder absorbs the cut
PLACE_TOL = 1e-3


@dataclass(frozen=True)
class ProfileTrack:
    """One profile with its deformation for every sequence entry."""

    deformations: tuple[Deformation, ...]
    profile: GridField = field(repr=False)
    estimates: tuple[GridField, ...] = field(repr=False)
    family: int = 0
    bubble: int = 0

    def to_json(self) -> dict:
        return {"family": self.family, "bubble": self.bubble,
                "deformations": [G.to_json() for G in self.deformations],
                "profile_grid": [self.profile.extent, self.profile.n]}


@dataclass(frozen=True)
class ProfileDecomposition:
    profiles: tuple[ProfileTrack, ...]
    remainder: tuple[GridField, ...] = field(repr=False)
    decoupling_residual: float
    pairwise_divergence: np.ndarray
    divergence: tuple = ()
    sizes: dict = field(default_factory=dict)
    norms: np.ndarray = None
    family_counts: tuple[int, ...] = ()
    remainder_strichartz: np.ndarray | None = None
    alpha: float = 1.0

    def __len__(self) -> int:
        return len(self.profiles)

    def reconstruct(self, n: int) -> GridField:
        """``sum_j G_n^j phi^j + R_n`` on the grid of entry ``n``."""
        out = self.remainder[n]
        for tr in self.profiles:
            out = out + _place(tr.profile, tr.deformations[n], out, self.alpha).in_space(out.space)
        return out

    def trend(self, values: Sequence[float]) -> tuple[float, float]:
        """(value at the last entry, least-squares slope against the entry index)."""
        v = np.asarray(values, dtype=float)
        if len(v) < 2:
            return float(v[-1]), 0.0
        return float(v[-1]), float(np.polyfit(np.arange(len(v)), v, 1)[0])

    def to_json(self) -> dict:
        out = {"profiles": [p.to_json() for p in self.profiles],
               "decoupling_residual": self.decoupling_residual,
               "pairwise_divergence": self.pairwise_divergence,
               "divergence_by_n": [np.asarray(m) for m in self.divergence],
               "sizes": self.sizes, "norms": self.norms, "family_counts": list(self.family_counts),
               "remainder_l2": [r.l2_norm() for r in self.remainder]}
        if self.remainder_strichartz is not None:
            out["remainder_strichartz"] = {"values": self.remainder_strichartz,
                                           "last_and_slope": self.trend(self.remainder_strichartz)}
        return out


def _place(phi: GridField, G: Deformation, target: GridField, alpha: float) -> GridField:
    try:
        return apply(G, phi, alpha, grid=(target.extent, target.n), tol=PLACE_TOL).in_space(PHYSICAL)
    except (BandOverflowError, ConfigurationError) as exc:
        raise ExtractionError(f"profile does not fit the grid of the sequence entry: {exc}") from exc


def profile_decompose(u_seq: Sequence[GridField], eps: float, spec: MorreySpec, *,
                      C1: float = 1.0, merge_radius: float = 3.5, overlap: float = 0.3,
                      max_bubbles: int = 1, bubble_tol: float = 1e-3, s_max: float = 64.0,
                      localize: float = 8.0, backfit: int = 2, strichartz: bool = True,
                      size_cfg=None) -> ProfileDecomposition:
    """Linear profile decomposition of a finite sequence.

    ``spec`` is the state space ``M^{d alpha}_{2,r}`` (hat mode); the greedy
    step runs in the companion space from :func:`greedy_spec` with threshold
    ``eps``.  Groups are tracked across n by rank of their state-space norm;
    the number of tracked groups is the smallest count over the sequence.

    Greedy pieces only seed the deformations.  Each profile estimate is then
    re-read ``backfit`` times from ``u_n`` minus the other current estimates,
    on the grid of ``u_n`` itself, so no frequency band is lost to the cubes.
    """
    if not spec.hat or spec.q != 2:
        raise ConfigurationError("profile_decompose expects the state space M^{d alpha}_{2,r}")
    u_seq = [u.in_space(PHYSICAL) for u in u_seq]
    if not u_seq:
        raise ValidationError("empty sequence")
    d = u_seq[0].dim
    alpha = spec.p / d
    gspec = greedy_spec(d, alpha)
    norms = np.array([hat_morrey_norm(u, spec) if np.any(u.values) else 0.0 for u in u_seq])
    if not np.all(np.isfinite(norms)):
        raise ValidationError("sequence is not bounded in the state space")

    per_n = []
    for u in u_seq:
        res = greedy_scale_decomposition(u, eps, gspec, C1=C1, merge_radius=merge_radius, overlap=overlap)
        fams = []
        for piece in res.pieces:
            frame = canonical_frame(piece.field)
            fams.append((hat_morrey_norm(piece.field, spec), frame, piece))
        fams.sort(key=lambda t: -t[0])
        per_n.append(fams)
    counts = tuple(len(f) for f in per_n)
    J = min(counts)

    seeds = []                                       # (family, bubble, frames, s, a)
    for j in range(J):
        frames = [per_n[i][j][1] for i in range(len(u_seq))]
        R = [compact(renormalize(per_n[i][j][2].field, frames[i], alpha)) for i in range(len(u_seq))]
        if len(R) >= 3:
            ext = extract_bubbles(R, max_bubbles=max_bubbles, s_max=s_max, localize=localize, tol=bubble_tol)
        else:
            ext = _pairwise_bubbles(R, max_bubbles, s_max, localize, bubble_tol)
        for l, bub in enumerate(ext.bubbles):
            seeds.append((j, l, frames, bub.s, bub.a))

    tracks = _backfit(u_seq, seeds, alpha, localize, backfit)

    remainder = []
    for i, u in enumerate(u_seq):
        r = u
        for tr in tracks:
            r = r - _place(tr.profile, tr.deformations[i], u, alpha)
        remainder.append(r)

    cfg = size_cfg
    ell_u = np.array([size_function(u, spec, cfg).value for u in u_seq])
    ell_phi = np.array([size_function(tr.profile, spec, cfg).value for tr in tracks])
    ell_r = np.array([size_function(r, spec, cfg).value for r in remainder])
    rr = spec.r
    lhs = float(np.max(ell_u ** rr))
    rhs = float(np.sum(ell_phi ** rr) + np.max(ell_r ** rr))
    residual = max(0.0, rhs - lhs)

    div = []
    for i in range(len(u_seq)):
        m = np.zeros((len(tracks), len(tracks)))
        for a_, ta in enumerate(tracks):
            for b_, tb in enumerate(tracks):
                if a_ != b_:
                    m[a_, b_] = orthogonality_divergence(ta.deformations[i], tb.deformations[i]).total
        div.append(m)
    pairwise = div[-1] if div else np.zeros((0, 0))

    rs = None
    if strichartz:
        from .evolution import free_strichartz_norm
        p = (d + 2) * alpha
        vals = []
        for r in remainder:
            try:
                vals.append(free_strichartz_norm(compact(r, tol=1e-8), p).total if np.any(r.values) else 0.0)
            except Exception:  # diagnostics only; keep the decomposition
                vals.append(float("nan"))
        rs = np.array(vals)

    sizes = {"sequence": ell_u, "profiles": ell_phi, "remainder": ell_r, "lhs": lhs, "rhs": rhs}
    return ProfileDecomposition(tuple(tracks), tuple(remainder), residual, pairwise, tuple(div),
                                sizes, norms, counts, rs, alpha)


def _backfit(u_seq, seeds, alpha, localize, sweeps, width: float = 1.0) -> list[ProfileTrack]:
    """Alternate over profiles: refine ``(s_n, a_n)`` and the localized estimate."""
    nseq = len(u_seq)
    state = [[None] * nseq for _ in seeds]          # (estimate, s, a)
    for t, (_, _, _, ss, aa) in enumerate(seeds):
        for i in range(nseq):
            state[t][i] = (None, float(ss[i]), np.asarray(aa[i], dtype=float))

    def deformation(t, i):
        F = seeds[t][2][i]
        _, s_, a_ = state[t][i]
        return Deformation(0.0, F.m, F.b, s_, tuple(a_))

    for _ in range(max(1, sweeps)):
        for t in range(len(seeds)):
            for i, u in enumerate(u_seq):
                r = u
                for o in range(len(seeds)):
                    if o != t and state[o][i][0] is not None:
                        r = r - apply(deformation(o, i), state[o][i][0], alpha)
                w = renormalize(r, seeds[t][2][i], alpha)
                _, s_old, a_old = state[t][i]
                _, s_new, a_new = _refine(w, s_old, a_old, width, 0.5)
                aligned = shift_and_flow(w, -a_new, -s_new)
                est = aligned.with_values(aligned.values * _localizer(aligned, localize))
                state[t][i] = (est, s_new, a_new)

    tracks = []
    for t, (j, l, _, _, _) in enumerate(seeds):
        est = [state[t][i][0] for i in range(nseq)]
        ext, n = common_grid(est)
        phi = GridField(sum(resample(e, ext, n, tol=PLACE_TOL).values for e in est) / nseq, ext, PHYSICAL)
        tracks.append(ProfileTrack(tuple(deformation(t, i) for i in range(nseq)), phi, tuple(est), j, l))
    return tracks


def _pairwise_bubbles(R, max_bubbles, s_max, localize, tol) -> BubbleExtraction:
    """Bubble extraction for sequences shorter than three (padded by repetition)."""
    padded = list(R) + [R[-1]] * (3 - len(R))
    ext = extract_bubbles(padded, max_bubbles=max_bubbles, s_max=s_max, localize=localize, tol=tol)
    k = len(R)
    bubbles = tuple(Bubble(b.s[:k], b.a[:k], b.phi, b.estimates[:k], b.correlation[:k]) for b in ext.bubbles)
    return BubbleExtraction(bubbles, ext.residuals[:k], {})


def deformed_distance(G1: Deformation, f1: GridField, G2: Deformation, f2: GridField,
                      target: GridField, alpha: float) -> float:
    """``||G1 f1 - G2 f2|| / ||G2 f2||`` on the grid of ``target``."""
    a = _place(f1, G1, target, alpha)
    b = _place(f2, G2, target, alpha)
    return (a - b).l2_norm() / b.l2_norm()


# -- concentration lower bound --------------------------------------------------------


@dataclass(frozen=True)
class EtaReport:
    m: float
    M: float
    beta_shape: float
    max_profile_size: float
    consistent: bool

    def to_json(self) -> dict:
        return {"m": self.m, "M": self.M, "beta_shape": self.beta_shape,
                "max_profile_size": self.max_profile_size, "consistent": self.consistent}


def beta_shape(m: float, M: float, p: float, r: float) -> float:
    """``(1/2) (m^p / M^r)^{1/(p - r)}`` with the unknown constant set to one.

    ``p`` is the Strichartz exponent ``(d+2) alpha``, which exceeds every admissible r.
    """
    if not p > r:
        raise ConfigurationError(f"beta_shape needs p > r, got p = {p}, r = {r}")
    if m == 0 or M == 0:
        return 0.0
    return 0.5 * (m**p / M**r) ** (1.0 / (p - r))


def eta_lower_bound(u_seq: Sequence[GridField], spec: MorreySpec,
                    decomposition: ProfileDecomposition | None = None,
                    eps: float | None = None) -> EtaReport:
    """Compare the largest extracted profile size with the lower-bound shape.

    Only the qualitative statement is checked: a sequence with non-vanishing
    free Strichartz norm has a non-zero profile.
    """
    from .evolution import free_strichartz_norm
    d = u_seq[0].dim
    alpha = spec.p / d
    p = (d + 2) * alpha
    S = [free_strichartz_norm(u, p).total if np.any(u.values) else 0.0 for u in u_seq]
    m = float(min(S))
    M = float(max(hat_morrey_norm(u, spec) if np.any(u.values) else 0.0 for u in u_seq))
    beta = beta_shape(m, M, p, spec.r)
    if m == 0:
        return EtaReport(m, M, beta, 0.0, True)
    if decomposition is None:
        gnorm = max(hat_morrey_norm(u, greedy_spec(d, alpha)) for u in u_seq)
        decomposition = profile_decompose(u_seq, eps if eps is not None else 0.1 * gnorm, spec,
                                          strichartz=False)
    sizes = decomposition.sizes.get("profiles", np.zeros(0))
    biggest = float(np.max(sizes)) if len(sizes) else 0.0
    return EtaReport(m, M, beta, biggest, biggest > 0)


# -- almost periodicity ---------------------------------------------------------------


@dataclass(frozen=True)
class APParams:
    """Concentration parameters of one field.

    ``lam`` is the dyadic frequency scale of the chosen cube and ``b`` its
    lattice index; ``a`` is the center of the unit space-time tile with the
    largest local Strichartz mass in the renormalized frame.
    """

    lam: float
    b: np.ndarray
    a: np.ndarray
    tile_time: int
    local_mass: float
    piece_strichartz: float
    floor: float
    pieces: int
    cube: DyadicCube

    @property
    def N(self) -> float:
        return self.lam

    @property
    def y(self) -> np.ndarray:
        return self.a / self.lam

    @property
    def z(self) -> np.ndarray:
        return self.lam * self.b

    def to_json(self) -> dict:
        return {"lambda": self.lam, "b": self.b, "a": self.a, "N": self.N, "y": self.y, "z": self.z,
                "tile_time": self.tile_time, "local_mass": self.local_mass,
                "piece_strichartz": self.piece_strichartz, "floor": self.floor,
                "pieces": self.pieces, "cube": self.cube.to_json()}


def _local_strichartz(g: GridField, p: float, tiles: int, nodes: int = 17) -> tuple[float, int, np.ndarray]:
    """Best unit tile ``[k - 1/2, k + 1/2) x (unit box)`` for ``|e^{it Delta} g|^p``."""
    from scipy.integrate import simpson
    from .evolution import free_propagate
    d = g.dim
    while g.dx > 1 / 16:                             # g is band-limited: refining is exact
        g = resample(g, g.extent, 2 * g.n)
    width = max(1, int(round(1.0 / g.dx)))
    best = (-1.0, 0, np.zeros(d))
    for k in range(-tiles, tiles + 1):
        ts = np.linspace(k - 0.5, k + 0.5, nodes)
        dens = simpson(np.stack([np.abs(free_propagate(g, t).values) ** p for t in ts]), x=ts, axis=0)
        box = dens
        for ax in range(d):
            c = np.cumsum(np.concatenate([box, np.take(box, range(width - 1), axis=ax)], axis=ax), axis=ax)
            zero = np.zeros_like(np.take(c, [0], axis=ax))
            c = np.concatenate([zero, c], axis=ax)
            box = np.take(c, range(width, width + g.n), axis=ax) - np.take(c, range(0, g.n), axis=ax)
        box = box * g.dx**d
        idx = np.unravel_index(int(np.argmax(box)), box.shape)
        val = float(box[idx])
        if val > best[0] * (1 + 1e-12):
            x = g.axis()
            start = np.array([x[i] + 0.5 * (width - 1) * g.dx for i in idx])
            best = (val, k, _mean_shift(dens, g, start))
    return best


def _mean_shift(dens: np.ndarray, g: GridField, c: np.ndarray, iters: int = 50) -> np.ndarray:
    """Move a unit box onto the centroid of ``dens`` inside it, until it settles.

    The result is continuous in the data, and mirror-image ties between boxes
    land on the same center.
    """
    x0 = g.axis()[0]
    period = 2 * g.extent
    for _ in range(iters):
        rows, weights = [], []
        for ci in c:
            r = np.arange(int(np.floor((ci - 0.5 - x0) / g.dx)), int(np.ceil((ci + 0.5 - x0) / g.dx)) + 1)
            # fraction of each sample cell inside the box keeps the map continuous in c
            weights.append(np.clip((0.5 - np.abs(x0 + r * g.dx - ci)) / g.dx + 0.5, 0.0, 1.0))
            rows.append(r)
        local = dens[np.ix_(*[r % g.n for r in rows])]
        for ax, wt in enumerate(weights):
            local = local * np.expand_dims(wt, tuple(a for a in range(g.dim) if a != ax))
        w = local.sum()
        if w == 0:
            break
        new = np.empty_like(c)
        for ax, r in enumerate(rows):
            other = tuple(a for a in range(g.dim) if a != ax)
            new[ax] = float(np.sum(local * np.expand_dims(x0 + r * g.dx, other)) / w)
        new = (new - x0) % period + x0
        if np.max(np.abs(new - c)) < 1e-12:
            return new
        c = new
    return c


# greedy pieces have hard spectral edges; their 1/x tails only need this much room
PIECE_RADIUS_KEEP = 0.99


def almost_periodicity_params(u: GridField, delta: float, spec: MorreySpec, *,
                              C1: float = 1.0, tiles: int = 3, pad: int = 4,
                              max_pad: int = 64) -> APParams:
    """Frequency scale, frequency cube and spatial center of a concentrating field."""
    from .evolution import free_strichartz_norm
    d = u.dim
    alpha = spec.p / d
    p = (d + 2) * alpha
    S_u = free_strichartz_norm(u, p).total
    if S_u < delta:
        raise ValidationError(f"free Strichartz norm {S_u:.4g} is below delta = {delta}")
    # Pieces have hard spectral edges and 1/x tails.  Pad u (which decays) until
    # every piece keeps its tails inside a third of the box; padding a piece
    # itself would put a jump at the old box edge.
    from .evolution import _physical_radius
    while True:
        padded = resample(u.in_space(PHYSICAL), pad * u.extent, pad * u.n)
        res = greedy_scale_decomposition(padded, delta / 3, greedy_spec(d, alpha), C1=C1)
        reach = max((_physical_radius(pc.field.to_physical(), PIECE_RADIUS_KEEP) for pc in res.raw), default=0.0)
        need = 3 * reach / padded.extent
        if need <= 1 or pad >= max_pad:
            break
        pad *= 2 ** math.ceil(math.log2(need))
        pad = min(pad, max_pad)
    raw = res.raw
    if not raw:
        raise ExtractionError("greedy step produced no pieces")
    floor = delta / (2 * len(raw))
    scored = []
    for i, piece in enumerate(raw):
        S = free_strichartz_norm(piece.field, p, tail_target=1e-2, radius_keep=PIECE_RADIUS_KEEP,
                                 per_efold=6).total
        mass = float(np.sum(np.abs(piece.field.values) ** 2))
        scored.append((S, mass, tuple(-np.asarray(piece.cube.k)), -piece.cube.j, i))
    ok = [t for t in scored if t[0] >= floor]
    if not ok:
        best = max(t[0] for t in scored)
        raise ExtractionError(f"no piece reaches the Strichartz floor {floor:.4g} (best {best:.4g}, "
                              f"{len(raw)} pieces)")
    S_best, _, _, _, i = max(ok)
    piece = raw[i]
    lam = piece.cube.side
    b = np.asarray(piece.cube.k, dtype=float)
    G = Deformation(m=piece.cube.j, b=tuple(lam * b))
    g = compact(apply(G, piece.field.to_physical(), alpha), tol=1e-12)
    mass, k, a = _local_strichartz(g, p, tiles)
    return APParams(lam, b, a, k, mass, S_best, floor, len(raw), piece.cube)


@dataclass(frozen=True)
class APTrack:
    times: np.ndarray
    N: np.ndarray
    y: np.ndarray
    z: np.ndarray
    residual: np.ndarray
    params: tuple[APParams, ...] = field(repr=False)

    def to_json(self) -> dict:
        return {"times": self.times, "N": self.N, "y": self.y, "z": self.z, "residual": self.residual}


def track_almost_periodicity(traj, delta: float, eta: float, C_eta: float, spec: MorreySpec,
                             every: int = 1, **kw) -> APTrack:
    """Concentration parameters and the compactness residual along a trajectory."""
    from .spaces import almost_periodicity_residual
    idx = list(range(0, len(traj), every))
    if idx[-1] != len(traj) - 1:
        idx.append(len(traj) - 1)
    params, res = [], []
    for i in idx:
        u = traj.fields[i]
        ap = almost_periodicity_params(u, delta, spec, **kw)
        params.append(ap)
        res.append(almost_periodicity_residual(u, ap.N, ap.y, ap.z, C_eta, spec))
    return APTrack(traj.times[idx], np.array([q.N for q in params]), np.array([q.y for q in params]),
                   np.array([q.z for q in params]), np.array(res), tuple(params))
