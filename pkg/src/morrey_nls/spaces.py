"""Morrey-type norms, the boost-infimum size function, and related diagnostics.

The Morrey norm of a physical field is

    ||f||_{M^p_{q,r}} = || |tau|^{1/p - 1/q} ||f||_{L^q(tau)} ||_{l^r(tau dyadic)}

and the hat-Morrey norm applies the same sum to ``F f`` with the dual
exponents ``(p', q')``.  Sums run over a finite scale window; the omitted
tail is computed in closed form and reported next to the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from . import _dyadic
from .errors import AssumptionViolation, ConfigurationError, ValidationError
from .grid import (FOURIER, PHYSICAL, DyadicCube, FrequencyWindow, GridField,
                   dyadic_exponent)


def conjugate(p: float) -> float:
    """Hoelder conjugate exponent."""
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def star(a: float) -> float:
    """``a^* = min(a, 2a/(a-2))`` (infinite slot when a <= 2)."""
    return a if a <= 2 else min(a, 2 * a / (a - 2))


def alpha_interval(d: int) -> tuple[float, float]:
    """Open interval of nonlinearity exponents with a hat-Morrey state space."""
    return (2.0 / d) / (1.0 + 2.0 / (d * (d + 3))), 2.0 / d


def r_interval(d: int, alpha: float) -> tuple[float, float]:
    """Open interval ``((d alpha)', ((d+2) alpha)^*)`` for the summability index."""
    return conjugate(d * alpha), star((d + 2) * alpha)


def default_state_space(d: int, alpha: float, **kw) -> "MorreySpec":
    """``M^{d alpha}_{2, r}`` with r at the midpoint of the admissible interval."""
    lo, hi = r_interval(d, alpha)
    if not lo < hi:
        raise AssumptionViolation(f"no admissible r for d={d}, alpha={alpha}")
    return MorreySpec.state_space(d, alpha, 0.5 * (lo + hi), **kw)


@dataclass(frozen=True)
class MorreySpec:
    """Exponent triple plus an optional fixed scale window.

    ``hat=False`` is Morrey mode (``q < p < r``); ``hat=True`` is hat mode,
    where the norm acts on ``F f`` with ``(p', q')`` and needs ``q' < p' < r``.
    """

    p: float
    q: float
    r: float
    hat: bool = False
    window: FrequencyWindow | None = None

    def __post_init__(self):
        p, q, r = self.p, self.q, self.r
        if min(p, q, r) < 1:
            raise ConfigurationError("exponents must be >= 1")
        if self.hat:
            if not (p <= q):
                raise ConfigurationError(f"hat mode needs p <= q, got p={p}, q={q}")
            pc, qc = conjugate(p), conjugate(q)
            if math.isinf(r):
                if not pc <= r:
                    raise AssumptionViolation(f"hat mode needs p' <= r (p'={pc}, r={r})")
            elif not (qc < pc < r):
                raise AssumptionViolation(f"hat mode needs q' < p' < r (q'={qc}, p'={pc}, r={r})")
        else:
            if not (q <= p <= r):
                raise ConfigurationError(f"Morrey mode needs q <= p <= r, got {(p, q, r)}")
            if not math.isinf(r) and not (q < p < r):
                raise AssumptionViolation(f"Morrey mode with finite r needs q < p < r, got {(p, q, r)}")

    @classmethod
    def state_space(cls, d: int, alpha: float, r: float, q: float = 2.0, **kw) -> "MorreySpec":
        """The hat-Morrey space ``M^{d alpha}_{q, r}``."""
        return cls(d * alpha, q, r, hat=True, **kw)

    def sample_exponents(self) -> tuple[float, float, float]:
        """Exponents applied to the sampled side: (P, Q, r)."""
        if self.hat:
            return conjugate(self.p), conjugate(self.q), self.r
        return self.p, self.q, self.r

    def with_window(self, window: FrequencyWindow | None) -> "MorreySpec":
        return MorreySpec(self.p, self.q, self.r, self.hat, window)

    def to_json(self) -> dict:
        def enc(v):
            return "inf" if math.isinf(v) else v
        out = {"p": enc(self.p), "q": enc(self.q), "r": enc(self.r), "hat": self.hat}
        if self.window is not None:
            out["window"] = self.window.to_json()
        return out


@dataclass(frozen=True)
class NormReport:
    norm: float
    tail_bound: float
    window: FrequencyWindow
    spec: MorreySpec

    def __float__(self) -> float:
        return self.norm

    def to_json(self) -> dict:
        return {"norm": self.norm, "tail_bound": self.tail_bound,
                "window": self.window.to_json(), "spec": self.spec.to_json()}


DEFAULT_TAIL_TOL = 1e-12


def _report(side: GridField, spec: MorreySpec, tail_tol: float) -> NormReport:
    prof = _dyadic.ScaleProfile.build(side, *spec.sample_exponents())
    window = spec.window or prof.window_for(tail_tol)
    return NormReport(prof.norm(window), prof.tail_bound(window), window, spec)


def morrey_norm_report(f: GridField, spec: MorreySpec, tail_tol: float = DEFAULT_TAIL_TOL) -> NormReport:
    if spec.hat:
        raise ConfigurationError("morrey_norm needs a Morrey-mode spec")
    if f.space != PHYSICAL:
        raise ConfigurationError("morrey_norm expects a physical-space field")
    return _report(f, spec, tail_tol)


def morrey_norm(f: GridField, spec: MorreySpec, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    return morrey_norm_report(f, spec, tail_tol).norm


def hat_morrey_norm_report(f: GridField, spec: MorreySpec,
                           tail_tol: float = DEFAULT_TAIL_TOL) -> NormReport:
    if not spec.hat:
        raise ConfigurationError("hat_morrey_norm needs a hat-mode spec")
    return _report(f.in_space(FOURIER), spec, tail_tol)


def hat_morrey_norm(f: GridField, spec: MorreySpec, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    return hat_morrey_norm_report(f, spec, tail_tol).norm


def hat_lebesgue_norm(f: GridField, p: float) -> float:
    """``||F f||_{L^{p'}}`` by cell quadrature."""
    if p < 1:
        raise ConfigurationError("p must be >= 1")
    fh = f.in_space(FOURIER)
    a = np.abs(fh.values)
    pc = conjugate(p)
    if math.isinf(pc):
        return float(a.max())
    return float((np.sum(a**pc) * fh.dxi**fh.dim) ** (1.0 / pc))


# -- size function ------------------------------------------------------------


def modulate(f: GridField, xi: Sequence[float]) -> GridField:
    """``e^{-i x.xi} f`` by exact multiplication in physical space."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    g = f.in_space(PHYSICAL)
    phase = sum(x * k for x, k in zip(g.mesh(), xi))
    return g.with_values(g.values * np.exp(-1j * phase))


@dataclass(frozen=True)
class SizeFunctionConfig:
    """Search settings for the boost infimum.

    ``xi_search_radius=None`` picks a radius from the spectral spread; the
    search box is centered on the spectral centroid unless ``center`` is given.
    """

    xi_search_radius: float | None = None
    coarse_grid_points: int = 17
    refine_iters: int = 2
    refine_tol: float = 1e-9
    center: tuple[float, ...] | None = None
    starts: int = 3

    def __post_init__(self):
        if self.xi_search_radius is not None and not self.xi_search_radius > 0:
            raise ConfigurationError("xi_search_radius must be positive")
        if not self.refine_tol > 0:
            raise ConfigurationError("refine_tol must be positive")
        if self.coarse_grid_points < 2:
            raise ConfigurationError("coarse_grid_points must be >= 2")


@dataclass(frozen=True)
class SizeFunctionResult:
    value: float
    xi_star: np.ndarray
    radius_warning: bool = False
    evaluations: int = 0

    def __float__(self) -> float:
        return self.value


def spectral_moments(f: GridField) -> tuple[np.ndarray, float, float]:
    """Centroid, RMS radius, and the radius holding all but 1e-8 of |F f|^2."""
    fh = f.in_space(FOURIER)
    w = np.abs(fh.values) ** 2
    tot = w.sum()
    if tot == 0:
        return np.zeros(f.dim), 0.0, 0.0
    mesh = fh.mesh()
    c = np.array([float((m * w).sum() / tot) for m in mesh])
    r2 = sum((m - ci) ** 2 for m, ci in zip(mesh, c))
    rms = float(np.sqrt((r2 * w).sum() / tot))
    order = np.argsort(r2, axis=None)
    cum = np.cumsum(w.ravel()[order])
    idx = np.searchsorted(cum, (1 - 1e-8) * tot)
    full = float(np.sqrt(r2.ravel()[order[min(idx, order.size - 1)]]))
    return c, rms, full


def size_function(f: GridField, spec: MorreySpec,
                  cfg: SizeFunctionConfig | None = None) -> SizeFunctionResult:
    """``inf_xi ||e^{-i x.xi} f||`` in a hat-Morrey space with q = 2."""
    if not spec.hat or spec.q != 2:
        raise ConfigurationError("size_function needs a hat-mode spec with q = 2")
    cfg = cfg or SizeFunctionConfig()
    d = f.dim
    g = f.in_space(PHYSICAL)
    if not np.any(g.values):
        return SizeFunctionResult(0.0, np.zeros(d))
    P, Q, r = spec.sample_exponents()
    centroid, rms, full = spectral_moments(g)
    center = np.asarray(cfg.center, dtype=float) if cfg.center is not None else centroid
    radius = cfg.xi_search_radius or (2.0 * rms + 2 * g.dxi)
    warn = radius < full
    mesh = g.mesh()
    axes = tuple(range(d))
    # |F f| is unchanged by the input-side ifftshift (a sign flip for even n)
    scale = (g.dx / math.sqrt(2 * math.pi)) ** d
    count = 0

    def objective(xi):
        nonlocal count
        count += 1
        phase = sum(x * k for x, k in zip(mesh, xi))
        mag = np.abs(np.fft.fftshift(np.fft.fftn(g.values * np.exp(-1j * phase), axes=axes), axes=axes))
        prof = _dyadic.ScaleProfile.from_abs(mag * scale, g.dxi, P, Q, r)
        window = spec.window or prof.window_for(DEFAULT_TAIL_TOL)
        return prof.norm(window)

    ticks = np.linspace(-radius, radius, cfg.coarse_grid_points)
    step = ticks[1] - ticks[0]
    cands = np.array(np.meshgrid(*([ticks] * d), indexing="ij")).reshape(d, -1).T + center
    vals = np.array([objective(c) for c in cands])
    best_x, best_v = np.zeros(d), objective(np.zeros(d))
    for i in np.argsort(vals, kind="stable")[: cfg.starts]:
        x = cands[i].copy()
        v = vals[i]
        for _ in range(cfg.refine_iters):
            for ax in range(d):
                def line(t, ax=ax, x=x):
                    y = x.copy()
                    y[ax] = t
                    return objective(y)
                res = optimize.minimize_scalar(line, bounds=(x[ax] - step, x[ax] + step),
                                               method="bounded",
                                               options={"xatol": cfg.refine_tol})
                if res.fun < v:
                    x[ax], v = res.x, float(res.fun)
        if v < best_v:
            best_x, best_v = x, v
    return SizeFunctionResult(float(best_v), best_x, bool(warn), count)


# -- duality ------------------------------------------------------------------


@dataclass(frozen=True)
class PairingCheck:
    lhs: float
    rhs: float
    passed: bool
    renormalized: int = 0


def duality_pairing_check(f: GridField, blocks: Sequence[tuple[complex, DyadicCube, GridField]],
                          spec: MorreySpec, support_tol: float = 1e-12) -> PairingCheck:
    """Check ``|int f g| <= ||f||_{M^p_{q,r}} ||lambda||_{l^{r'}}`` for a block sum g.

    Blocks sharing a cube are merged first (their sum is again a block up to
    the summed coefficient), so the bound is tested over distinct cubes.
    """
    if spec.hat:
        raise ConfigurationError("pairing check uses a Morrey-mode spec")
    f = f.in_space(PHYSICAL)
    pc, qc = conjugate(spec.p), conjugate(spec.q)
    merged: dict[DyadicCube, list] = {}
    renorm = 0
    for lam, cube, A in blocks:
        A = A.in_space(PHYSICAL)
        if not A.same_grid(f):
            raise ValidationError("block lives on a different grid")
        inside = cube.contains(A.mesh())
        amax = float(np.abs(A.values).max()) if A.values.size else 0.0
        if amax and float(np.abs(A.values[~inside]).max(initial=0.0)) > support_tol * amax:
            raise ValidationError(f"block leaks outside its cube {cube}")
        vals = np.where(inside, A.values, 0)
        if math.isinf(qc):
            an = float(np.abs(vals).max())
        else:
            an = float((np.sum(np.abs(vals) ** qc) * f.dx**f.dim) ** (1 / qc))
        cap = cube.volume ** ((0 if math.isinf(qc) else 1 / qc) - 1 / pc)
        if an > cap * (1 + 1e-12):
            vals = vals * (cap / an)
            renorm += 1
        if cube in merged:
            lam0, g0 = merged[cube]
            tot = abs(lam0) + abs(lam)
            if tot > 0:
                merged[cube] = [tot, (lam0 * g0 + lam * vals) / tot]
        else:
            merged[cube] = [lam, vals]
    g = sum((lam * vals for lam, vals in merged.values()), np.zeros_like(f.values))
    lhs = abs(complex(np.sum(f.values * g) * f.dx**f.dim))
    lam = np.abs([lam for lam, _ in merged.values()])
    rc = conjugate(spec.r)
    if lam.size == 0:
        lnorm = 0.0
    elif math.isinf(rc):
        lnorm = float(lam.max())
    else:
        lnorm = float(np.sum(lam**rc) ** (1 / rc))
    rhs = morrey_norm(f, spec) * lnorm
    return PairingCheck(lhs, rhs, lhs <= rhs * (1 + 1e-9), renorm)


# -- projection and moduli ----------------------------------------------------


def dyadic_average_projection(f: GridField, j0: int, j1: int) -> GridField:
    """Cell averages on the 2^{-j1} grid inside ``[-2^{-j0}, 2^{-j0})^d``."""
    if j1 < j0:
        raise ConfigurationError("need j1 >= j0")
    g = f.in_space(PHYSICAL)
    J = dyadic_exponent(g.dx)
    if J < j1:
        raise ConfigurationError(f"cells of side 2^-{j1} are finer than the grid spacing")
    half = 2.0 ** (-j0)
    if half > g.extent:
        raise ConfigurationError("projection box exceeds the grid extent")
    per = 2 ** (J - j1)                     # samples per cell edge
    span = int(round(half / g.dx))          # samples from 0 to the box face
    lo, hi = g.n // 2 - span, g.n // 2 + span
    d = g.dim
    sub = g.values[(slice(lo, hi),) * d]
    nb = (hi - lo) // per
    shaped = sub.reshape(sum(((nb, per) for _ in range(d)), ()))
    avg = shaped.mean(axis=tuple(range(1, 2 * d, 2)))
    for ax in range(d):
        avg = np.repeat(avg, per, axis=ax)
    out = np.zeros_like(g.values)
    out[(slice(lo, hi),) * d] = avg
    return g.with_values(out)


def _sample_directions(d: int) -> list[np.ndarray]:
    dirs = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        dirs += [e, -e]
    dirs.append(np.ones(d) / math.sqrt(d))
    return dirs


def sample_offsets(d: int, radius: float) -> list[np.ndarray]:
    """2d+1 directions times 4 magnitudes up to ``radius``."""
    return [m * radius * e for e in _sample_directions(d) for m in (0.25, 0.5, 0.75, 1.0)]


def translate(f: GridField, a: Sequence[float]) -> GridField:
    """``f(x - a)`` via the Fourier multiplier ``e^{-i a.xi}``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    fh = f.in_space(FOURIER)
    phase = sum(k * s for k, s in zip(fh.mesh(), a))
    return fh.with_values(fh.values * np.exp(-1j * phase)).in_space(f.space)


@dataclass(frozen=True)
class CompactnessModulus:
    tail: float
    shift_mod: float
    samples: tuple = field(default=(), repr=False)


def compactness_modulus(f: GridField, spec: MorreySpec, C: float) -> CompactnessModulus:
    """Spatial tail beyond |x| >= C and the sampled shift modulus over |z| <= 1/C.

    The shift term is a lower bound for the true supremum.
    """
    if not C > 0:
        raise ConfigurationError("C must be positive")
    g = f.in_space(PHYSICAL)
    tail = morrey_norm(g.with_values(np.where(g.radius() >= C, g.values, 0)), spec)
    samples = sample_offsets(g.dim, 1.0 / C)
    mod = max(morrey_norm(translate(g, z) - g, spec) for z in samples)
    return CompactnessModulus(tail, mod, tuple(tuple(z) for z in samples))


def almost_periodicity_residual(u: GridField, N: float, y: Sequence[float], z: Sequence[float],
                                C_eta: float, spec: MorreySpec) -> float:
    """Sampled ``sup_{|w| <= N/C} ||(e^{i w.(x-y)} - 1) u|| + ||F^{-1} 1_{|xi-z| >= C N} F u||``."""
    if not (N > 0 and C_eta > 0):
        raise ConfigurationError("N and C_eta must be positive")
    if not spec.hat:
        raise ConfigurationError("residual is measured in a hat-mode space")
    g = u.in_space(PHYSICAL)
    if not np.any(g.values):
        return 0.0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    mesh = g.mesh()
    first = 0.0
    for w in sample_offsets(g.dim, N / C_eta):
        phase = sum(w_i * (x - y_i) for w_i, x, y_i in zip(w, mesh, y))
        first = max(first, hat_morrey_norm(g.with_values((np.exp(1j * phase) - 1) * g.values), spec))
    fh = g.to_fourier()
    dist = np.sqrt(sum((k - z_i) ** 2 for k, z_i in zip(fh.mesh(), z)))
    far = fh.with_values(np.where(dist >= C_eta * N, fh.values, 0))
    second = hat_morrey_norm(far, spec) if np.any(far.values) else 0.0
    return first + second
