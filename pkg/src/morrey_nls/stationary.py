"""Ground states, the Aubin-Talenti profile, energies and Pohozaev identities.

Q is the positive radial solution of ``-Delta Q + Q = Q^{2 alpha + 1}``.  In
one dimension it is ``(alpha+1)^{1/(2 alpha)} sech^{1/alpha}(alpha x)``; in
higher dimensions it comes from radial shooting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, NumericalFailure
from .grid import FOURIER, PHYSICAL, GridField


@dataclass(frozen=True)
class GroundStateResult:
    field: GridField
    residual_Linf: float
    method: str
    alpha: float
    peak: float
    profile: Callable[[np.ndarray], np.ndarray] = field(repr=False, default=None)


def laplacian(f: GridField) -> GridField:
    """Spectral Laplacian on the periodic box."""
    fh = f.in_space(FOURIER)
    k2 = sum(k**2 for k in fh.mesh())
    return fh.with_values(-k2 * fh.values).in_space(f.space)


def gradient_norm_sq(f: GridField) -> float:
    """``||grad f||_2^2`` from Fourier samples."""
    fh = f.in_space(FOURIER)
    k2 = sum(k**2 for k in fh.mesh())
    return float(np.sum(k2 * np.abs(fh.values) ** 2) * fh.dxi**fh.dim)


def lp_norm_pow(f: GridField, p: float) -> float:
    """``int |f|^p dx`` by cell quadrature."""
    g = f.in_space(PHYSICAL)
    return float(np.sum(np.abs(g.values) ** p) * g.dx**g.dim)


def ground_state_residual(Q: GridField, alpha: float, lam: float = 1.0) -> float:
    """``max |-Delta Q + lam^2 Q - |Q|^{2 alpha} Q|``."""
    g = Q.in_space(PHYSICAL)
    res = -laplacian(g).values + lam**2 * g.values - np.abs(g.values) ** (2 * alpha) * g.values
    return float(np.abs(res).max())


def closed_form_q(x: np.ndarray, alpha: float) -> np.ndarray:
    return (alpha + 1) ** (1 / (2 * alpha)) / np.cosh(alpha * x) ** (1 / alpha)


# -- radial shooting --------------------------------------------------------------


def _shoot(c: float, d: int, alpha: float, r_max: float, dense: bool = False):
    """Integrate the radial ODE from the origin; classify the outcome.

    Returns ``(+1, sol)`` if Q crosses zero (c too large), ``(-1, sol)`` if Q
    turns upward while positive (c too small), ``(0, sol)`` if neither
    happened before ``r_max``.
    """
    p = 2 * alpha + 1
    r0 = 1e-4
    q2 = (c - c**p) / (2 * d)                      # Q ~ c + q2 r^2 near 0
    y0 = [c + q2 * r0**2, 2 * q2 * r0]

    def rhs(r, y):
        q, dq = y
        return [dq, -(d - 1) / r * dq + q - abs(q) ** (p - 1) * q]

    def crossed(r, y):
        return y[0]
    crossed.terminal = True
    crossed.direction = -1

    def turned(r, y):
        return y[1]
    turned.terminal = True
    turned.direction = 1

    sol = integrate.solve_ivp(rhs, (r0, r_max), y0, method="DOP853", rtol=1e-13, atol=1e-15,
                              events=(crossed, turned), dense_output=dense)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return 0, sol


def radial_ground_state(d: int, alpha: float, r_max: float = 40.0, tol: float = 1e-13):
    """Shooting with bisection on Q(0); returns ``(Q(0), callable profile)``.

    The profile follows the ODE solution up to the point where the bracketing
    trajectories separate and the linear decay ``rho^{-nu} K_nu(rho)`` beyond.
    """
    lo, hi = 1.0, 2.0
    while _shoot(hi, d, alpha, r_max)[0] != 1:
        hi *= 1.5
        if hi > 1e3:
            raise NumericalFailure("shooting failed to bracket Q(0) from above")
    while _shoot(lo, d, alpha, r_max)[0] != -1:
        lo /= 1.5
        if lo < 1e-6:
            raise NumericalFailure("shooting failed to bracket Q(0) from below")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        kind = _shoot(mid, d, alpha, r_max)[0]
        if kind == 1:
            hi = mid
        elif kind == -1:
            lo = mid
        else:
            lo = hi = mid
            break
    _, s_lo = _shoot(lo, d, alpha, r_max, dense=True)
    _, s_hi = _shoot(hi, d, alpha, r_max, dense=True)
    # trust the ODE while the bracketing trajectories agree and Q is positive
    r_end = min(s_lo.t[-1], s_hi.t[-1])
    rs = np.linspace(1e-4, r_end, 20001)
    qa, qb = s_lo.sol(rs)[0], s_hi.sol(rs)[0]
    ok = (np.abs(qa - qb) < 1e-9 * qa[0]) & (qa > 0)
    bad = np.nonzero(~ok)[0]
    i_match = (bad[0] if bad.size else rs.size) - 1
    r_m = float(rs[max(i_match - 200, 1)])
    q_m = float(0.5 * (s_lo.sol(r_m)[0] + s_hi.sol(r_m)[0]))
    nu = (d - 2) / 2

    def decay(r):
        return r ** (-nu) * special.kv(nu, r)
    amp = q_m / decay(r_m)
    c = 0.5 * (lo + hi)

    def profile(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inner = r <= r_m
        rr = np.maximum(r[inner], 1e-4)
        out[inner] = 0.5 * (s_lo.sol(rr)[0] + s_hi.sol(rr)[0])
        small = r[inner] < 1e-4
        if np.any(small):
            q2 = (c - c ** (2 * alpha + 1)) / (2 * d)
            tmp = out[inner]
            tmp[small] = c + q2 * r[inner][small] ** 2
            out[inner] = tmp
        ro = r[~inner]
        with np.errstate(under="ignore"):
            out[~inner] = amp * decay(np.maximum(ro, r_m))
        return out
    return c, profile


def ground_state(d: int, alpha: float, n: int = 1024, extent: float = 16 * math.pi,
                 method: str | None = None) -> GroundStateResult:
    """Sample Q on a grid.  ``method`` is 'closed-form-1d' or 'radial-shooting'."""
    if d < 1:
        raise ConfigurationError("dimension must be >= 1")
    if alpha <= 0 or (d > 2 and alpha >= 2 / (d - 2)):
        raise ConfigurationError(f"alpha={alpha} is not energy-subcritical in d={d}")
    method = method or ("closed-form-1d" if d == 1 else "radial-shooting")
    probe = GridField.zeros(d, n, extent)
    if method == "closed-form-1d":
        if d != 1:
            raise ConfigurationError("closed form only exists for d = 1")
        def prof(r):
            return closed_form_q(r, alpha)
        peak = (alpha + 1) ** (1 / (2 * alpha))
    elif method == "radial-shooting":
        peak, prof = radial_ground_state(d, alpha)
    else:
        raise ConfigurationError(f"unknown ground-state method {method!r}")
    Q = probe.with_values(prof(probe.radius()))
    return GroundStateResult(Q, ground_state_residual(Q, alpha), method, alpha, float(peak), prof)


def rescale(gs: GroundStateResult, lam: float) -> GridField:
    """``lam^{1/alpha} Q(lam x)`` on the same grid, from the radial profile."""
    f = gs.field
    return f.with_values(lam ** (1 / gs.alpha) * gs.profile(lam * f.radius()))


# -- energies and identities ----------------------------------------------------------


def energy(u: GridField, alpha: float) -> float:
    """``1/2 ||grad u||^2 - (2 alpha + 2)^{-1} ||u||^{2 alpha + 2}_{2 alpha + 2}``.

    With ``alpha = 2/(d-2)`` this is the energy-critical functional.
    """
    return 0.5 * gradient_norm_sq(u) - lp_norm_pow(u, 2 * alpha + 2) / (2 * alpha + 2)


def mass(u: GridField) -> float:
    return u.l2_norm() ** 2


def pohozaev_check(Q: GroundStateResult | GridField, alpha: float) -> tuple[float, float]:
    """Residuals of the two integral identities satisfied by Q."""
    f = Q.field if isinstance(Q, GroundStateResult) else Q
    d = f.dim
    G = gradient_norm_sq(f)
    M = mass(f)
    P = lp_norm_pow(f, 2 * alpha + 2)
    r1 = abs(G + M - P)
    r2 = abs((d - 2) / 2 * G + d / 2 * M - d / (2 * alpha + 2) * P)
    return r1, r2


# -- energy-critical profile ------------------------------------------------------------


def _w_const(d: int) -> float:
    return d * (d - 2.0)


def w_radial(r, d: int):
    return (1 + np.asarray(r, dtype=float) ** 2 / _w_const(d)) ** (-(d - 2) / 2)


def w_radial_derivative(r, d: int):
    c = _w_const(d)
    r = np.asarray(r, dtype=float)
    return -(d - 2) * r / c * (1 + r**2 / c) ** (-d / 2)


def aubin_talenti(d: int, n: int = 32, extent: float = 8.0) -> GridField:
    if d < 3:
        raise ConfigurationError("W needs d >= 3")
    probe = GridField.zeros(d, n, extent)
    return probe.with_values(w_radial(probe.radius(), d))


def aubin_talenti_residual(d: int, n: int = 64, extent: float = 8.0, interior: float = 0.25) -> float:
    """``max |-Delta W - W^{(d+2)/(d-2)}|`` over ``|x| <= interior * extent``.

    W decays only polynomially, so it is multiplied by a smooth window equal to
    one well inside the box before the spectral Laplacian is taken.
    """
    W = aubin_talenti(d, n, extent)
    rad = W.radius()
    edge, width = 0.65 * extent, 0.07 * extent
    win = 0.5 * special.erfc((rad - edge) / width)
    Ww = W.with_values(W.values * win)
    res = -laplacian(Ww).values - W.values ** ((d + 2) / (d - 2))
    mask = rad <= interior * extent
    return float(np.abs(res[mask]).max())


def sphere_area(d: int) -> float:
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def radial_integral(fn, d: int, r_cut: float = 50.0, nodes: int = 200) -> float:
    """``int_{R^d} fn(|x|) dx`` for W-type integrands.

    Composite Gauss-Legendre on ``[0, r_cut]`` after the substitution
    ``rho = sqrt(d(d-2)) tan(theta)``; the rest ``[r_cut, inf)`` maps to a finite
    theta interval and is integrated the same way, so no cutoff error remains.
    """
    c = math.sqrt(_w_const(d))
    x, w = np.polynomial.legendre.leggauss(nodes)
    th_cut = math.atan(r_cut / c)
    total = 0.0
    for a, b in ((0.0, th_cut), (th_cut, math.pi / 2)):
        th = 0.5 * (b - a) * x + 0.5 * (b + a)
        rho = c * np.tan(th)
        jac = c / np.cos(th) ** 2
        total += 0.5 * (b - a) * float(np.sum(w * fn(rho) * rho ** (d - 1) * jac))
    return sphere_area(d) * total


def w_hdot1_sq(d: int) -> float:
    """``||W||_{H^1-dot}^2``: quadrature on [0, R] plus the exact tail.

    Beyond R the integrand transforms to ``K sin^{d+1} cos^{d-3}`` in theta, whose
    integral is an incomplete beta function.
    """
    c = _w_const(d)
    R = 20.0
    x, w = np.polynomial.legendre.leggauss(120)
    edges = np.linspace(0.0, R, 41)
    head = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        r = 0.5 * (b - a) * x + 0.5 * (b + a)
        head += 0.5 * (b - a) * float(np.sum(w * w_radial_derivative(r, d) ** 2 * r ** (d - 1)))
    K = (d - 2) ** 2 * c ** ((d - 2) / 2)
    a_, b_ = (d + 2) / 2, (d - 2) / 2
    s2 = (R**2 / c) / (1 + R**2 / c)                 # sin^2 of arctan(R / sqrt(c))
    tail = K * 0.5 * special.beta(a_, b_) * special.betaincc(a_, b_, s2)
    return sphere_area(d) * (head + tail)


def critical_energy_w(d: int) -> float:
    """E[W] for the energy-critical functional, by radial quadrature."""
    grad = radial_integral(lambda r: w_radial_derivative(r, d) ** 2, d)
    pot = radial_integral(lambda r: w_radial(r, d) ** (2 * d / (d - 2)), d)
    return 0.5 * grad - (d - 2) / (2 * d) * pot


def critical_thresholds(d: int) -> tuple[float, float]:
    """``(E1, E2) = (sqrt(2/d) ||W||, ||W||)`` in the homogeneous H^1 norm."""
    if d < 3:
        raise ConfigurationError("thresholds need d >= 3")
    E2 = math.sqrt(w_hdot1_sq(d))
    return math.sqrt(2 / d) * E2, E2
