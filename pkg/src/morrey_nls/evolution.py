"""Free flow, the Strang split-step integrator, and space-time diagnostics.

The equation is ``i u_t + Delta u = -sigma |u|^{2 alpha} u`` with
``sigma = 1`` (focusing) by default, i.e. ``u_t = i Delta u + i sigma |u|^{2 alpha} u``.
The nonlinear sub-step leaves ``|u|`` unchanged, so it is an exact phase
rotation and the splitting error is purely the Strang commutator term.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .errors import (AssumptionViolation, ConfigurationError, NumericalFailure,
                     ValidationError)
from .grid import FOURIER, PHYSICAL, GridField, resample
from .spaces import (MorreySpec, SizeFunctionConfig, default_state_space,
                     hat_morrey_norm, size_function, spectral_moments)
from .stationary import gradient_norm_sq, lp_norm_pow

RUNNING = "running"
SCATTERED = "scattered-like"
SOLITON = "soliton-like"
BLOWUP = "blowup-like"
INCONCLUSIVE = "inconclusive"
STATUSES = (RUNNING, SCATTERED, SOLITON, BLOWUP, INCONCLUSIVE)


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping settings.

    ``nonlinear=False`` switches the power term off entirely (free flow);
    ``focusing=False`` flips its sign.
    """

    alpha: float
    dt: float = 1e-3
    t_end: float = 1.0
    splitting_order: int = 2
    snapshot_stride: int = 10
    blowup_amp_cap: float = 1e3
    scatter_S_plateau_tol: float = 0.05
    focusing: bool = True
    nonlinear: bool = True
    boundary_tol: float = 1e-8

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ConfigurationError(f"t_end must be non-negative, got {self.t_end}")
        if self.splitting_order != 2:
            raise ConfigurationError("only Strang splitting (order 2) is implemented")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ConfigurationError("snapshot_stride must be a positive integer")
        if not self.blowup_amp_cap > 0:
            raise ConfigurationError("blowup_amp_cap must be positive")
        if not self.scatter_S_plateau_tol > 0:
            raise ConfigurationError("scatter_S_plateau_tol must be positive")

    @property
    def sigma(self) -> float:
        if not self.nonlinear:
            return 0.0
        return 1.0 if self.focusing else -1.0

    @property
    def steps(self) -> int:
        n = round(self.t_end / self.dt)
        if abs(n * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ConfigurationError(f"t_end={self.t_end} is not a multiple of dt={self.dt}")
        return n

    def halved(self) -> "SolverConfig":
        """Same run with dt halved and the snapshot spacing halved along with it."""
        return SolverConfig(**{**asdict(self), "dt": self.dt / 2})

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    fields: tuple[GridField, ...] = field(repr=False)
    mass: np.ndarray
    energy: np.ndarray
    S_cumulative: np.ndarray
    status: str
    cfg: SolverConfig

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if len(t) != len(self.fields):
            raise ValidationError("times and fields differ in length")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("snapshot times must increase strictly")
        if self.status not in STATUSES:
            raise ValidationError(f"unknown status {self.status!r}")
        object.__setattr__(self, "times", t)

    @property
    def exponent(self) -> float:
        """Scattering-norm exponent ``(d+2) alpha``."""
        return (self.fields[0].dim + 2) * self.cfg.alpha

    def __len__(self) -> int:
        return len(self.times)

    def with_status(self, status: str) -> "Trajectory":
        return Trajectory(self.times, self.fields, self.mass, self.energy,
                          self.S_cumulative, status, self.cfg)

    def sup_norms(self) -> np.ndarray:
        return np.array([np.abs(f.in_space(PHYSICAL).values).max() for f in self.fields])


# -- linear flow ----------------------------------------------------------------------


def _k2_raw(f: GridField) -> np.ndarray:
    """``|xi|^2`` in unshifted FFT order."""
    k = 2 * np.pi * np.fft.fftfreq(f.n, d=f.dx)
    grids = np.meshgrid(*([k] * f.dim), indexing="ij", sparse=True)
    return sum(g**2 for g in grids)


def free_propagate(f: GridField, s: float) -> GridField:
    """``e^{i s Delta} f``: the multiplier ``e^{-i s |xi|^2}``."""
    if s == 0:
        return f
    fh = f.in_space(FOURIER)
    k2 = sum(k**2 for k in fh.mesh())
    return fh.with_values(fh.values * np.exp(-1j * s * k2)).in_space(f.space)


# -- nonlinear flow -------------------------------------------------------------------


def hamiltonian(u: GridField, cfg: SolverConfig) -> float:
    """Conserved energy for the configured sign of the power term."""
    kin = 0.5 * gradient_norm_sq(u)
    if cfg.sigma == 0:
        return kin
    p = 2 * cfg.alpha + 2
    return kin - cfg.sigma * lp_norm_pow(u, p) / p


def _space_time_density(u: GridField, p: float) -> float:
    return lp_norm_pow(u, p)


def _cumulative(times: np.ndarray, dens: np.ndarray, p: float) -> np.ndarray:
    if len(times) == 1:
        return np.zeros(1)
    inc = 0.5 * (dens[1:] + dens[:-1]) * np.diff(times)
    return np.concatenate([[0.0], np.cumsum(inc)]) ** (1.0 / p)


def evolve(u0: GridField, cfg: SolverConfig) -> Trajectory:
    """Strang split-step run from ``u0`` over ``[0, cfg.t_end]``.

    Snapshots are kept every ``snapshot_stride`` steps plus the final step.
    Stops early with status ``blowup-like`` when ``max |u|`` exceeds the cap.
    """
    u0 = u0.in_space(PHYSICAL)
    if u0.boundary_max() > cfg.boundary_tol:
        raise ValidationError(
            f"initial data is {u0.boundary_max():.2e} at the box boundary (limit {cfg.boundary_tol:.0e})")
    steps = cfg.steps
    d, dt, sig, a2 = u0.dim, cfg.dt, cfg.sigma, cfg.alpha
    lin = np.exp(-1j * dt * _k2_raw(u0))
    axes = tuple(range(d))

    def kick(v, tau):
        if sig == 0:
            return v
        return v * np.exp(1j * sig * tau * np.abs(v) ** (2 * a2))

    p = (d + 2) * cfg.alpha
    v = np.array(u0.values)
    times, snaps = [0.0], [u0]
    status = RUNNING
    v = kick(v, dt / 2)
    for step in range(1, steps + 1):
        v = np.fft.ifftn(lin * np.fft.fftn(v, axes=axes), axes=axes)
        record = step % cfg.snapshot_stride == 0 or step == steps
        if record:
            v = kick(v, dt / 2)
            amp = np.abs(v).max()
            if not np.isfinite(amp):
                raise NumericalFailure(f"non-finite field at t = {step * dt:.6g}")
            times.append(step * dt)
            snaps.append(u0.with_values(v))
            if amp > cfg.blowup_amp_cap:
                status = BLOWUP
                break
            if step < steps:
                v = kick(v, dt / 2)
        else:
            v = kick(v, dt)
    t = np.array(times)
    masses = np.array([s.l2_norm() ** 2 for s in snaps])
    energies = np.array([hamiltonian(s, cfg) for s in snaps])
    dens = np.array([_space_time_density(s, p) for s in snaps])
    return Trajectory(t, tuple(snaps), masses, energies, _cumulative(t, dens, p), status, cfg)


def free_trajectory(u0: GridField, times: Sequence[float], alpha: float) -> Trajectory:
    """Trajectory of the free flow sampled at ``times`` (exact multiplier)."""
    cfg = SolverConfig(alpha=alpha, nonlinear=False, t_end=float(times[-1]) if len(times) else 0.0)
    t = np.asarray(times, dtype=float)
    snaps = tuple(free_propagate(u0.in_space(PHYSICAL), s) for s in t)
    p = (u0.dim + 2) * alpha
    dens = np.array([_space_time_density(s, p) for s in snaps])
    masses = np.array([s.l2_norm() ** 2 for s in snaps])
    energies = np.array([hamiltonian(s, cfg) for s in snaps])
    return Trajectory(t, snaps, masses, energies, _cumulative(t, dens, p), RUNNING, cfg)


def reverse(u: GridField) -> GridField:
    """Time reversal ``u -> conj(u)`` in physical space."""
    g = u.in_space(PHYSICAL)
    return g.with_values(np.conj(g.values))


# -- space-time quantities ------------------------------------------------------------


def _window(traj: Trajectory, t0: float, t1: float) -> np.ndarray:
    t = traj.times
    tol = 1e-9 * max(1.0, abs(t[-1]))
    if not (t0 <= t1):
        raise ValidationError(f"empty interval [{t0}, {t1}]")
    if t0 < t[0] - tol or t1 > t[-1] + tol:
        raise ValidationError(f"[{t0}, {t1}] is outside the trajectory [{t[0]}, {t[-1]}]")
    return np.flatnonzero((t >= t0 - tol) & (t <= t1 + tol))


def scattering_norm(traj: Trajectory, t0: float, t1: float) -> float:
    """``||u||_{L^{(d+2) alpha}_{t,x}([t0, t1] x R^d)}`` by trapezoid in time."""
    idx = _window(traj, t0, t1)
    p = traj.exponent
    t = traj.times
    dens = np.array([_space_time_density(traj.fields[i], p) for i in idx])
    nodes, vals = t[idx], dens
    # interpolate the integrand at endpoints that fall between snapshots
    all_dens = None
    if len(nodes) == 0 or nodes[0] > t0 or nodes[-1] < t1:
        all_dens = np.array([_space_time_density(f, p) for f in traj.fields])
    if len(nodes) == 0 or nodes[0] > t0:
        nodes = np.concatenate([[t0], nodes])
        vals = np.concatenate([[np.interp(t0, t, all_dens)], vals])
    if nodes[-1] < t1:
        nodes = np.concatenate([nodes, [t1]])
        vals = np.concatenate([vals, [np.interp(t1, t, all_dens)]])
    if len(nodes) < 2:
        return 0.0
    total = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(nodes)))
    return total ** (1.0 / p)


def duhamel_residual(traj: Trajectory, t0: float, t1: float) -> float:
    """L^2 defect of the integral equation between two snapshot times.

    The time integral is a trapezoid over the snapshots in ``[t0, t1]``; both
    endpoints must be snapshot times.
    """
    idx = _window(traj, t0, t1)
    if len(idx) < 8:
        raise ValidationError(f"need at least 8 snapshots in [{t0}, {t1}], found {len(idx)}")
    t = traj.times[idx]
    tol = 1e-9 * max(1.0, abs(traj.times[-1]))
    if abs(t[0] - t0) > tol or abs(t[-1] - t1) > tol:
        raise ValidationError("interval endpoints must coincide with snapshot times")
    cfg = traj.cfg
    us = [traj.fields[i].in_space(FOURIER) for i in idx]
    k2 = sum(k**2 for k in us[0].mesh())
    # sum_k w_k e^{i s_k |xi|^2} F(u(s_k))^ , then apply e^{-i t1 |xi|^2}
    w = np.zeros(len(t))
    w[1:] += 0.5 * np.diff(t)
    w[:-1] += 0.5 * np.diff(t)
    acc = np.zeros_like(us[0].values)
    if cfg.sigma != 0:
        for wk, sk, i in zip(w, t, idx):
            g = traj.fields[i].in_space(PHYSICAL)
            F = g.with_values(np.abs(g.values) ** (2 * cfg.alpha) * g.values).to_fourier()
            acc += wk * np.exp(1j * sk * k2) * F.values
    integral = np.exp(-1j * t1 * k2) * acc
    lin = np.exp(-1j * (t1 - t0) * k2) * us[0].values
    res = us[-1].values - lin - 1j * cfg.sigma * integral
    return float(np.sqrt(np.sum(np.abs(res) ** 2) * us[0].dxi ** us[0].dim))


# -- classification -------------------------------------------------------------------


def _band(values: np.ndarray, width: float) -> bool:
    ref = values[0]
    return bool(ref > 0 and np.all(np.abs(values - ref) <= width * ref))


def classify(traj: Trajectory, cfg: SolverConfig | None = None,
             spec: MorreySpec | None = None, samples: int = 9) -> str:
    """Heuristic end-state label; never a proof.

    * ``blowup-like`` when the run hit the amplitude cap;
    * ``scattered-like`` when ``S`` grew by less than the plateau tolerance
      over the last third and ``max |u|`` fell to half its start value
      without rising again over the last third;
    * ``soliton-like`` when ``max |u|`` and the size function stay within 5%;
    * ``inconclusive`` otherwise.
    """
    cfg = cfg or traj.cfg
    if traj.status == BLOWUP:
        return BLOWUP
    sup = traj.sup_norms()
    if len(traj) < 3 or sup[0] == 0:
        return INCONCLUSIVE
    third = len(traj) - max(2, len(traj) // 3)
    S = traj.S_cumulative
    plateau = S[-1] > 0 and (S[-1] - S[third]) / S[-1] < cfg.scatter_S_plateau_tol
    tail = sup[third:]
    decays = sup[-1] <= 0.5 * sup[0] and np.all(np.diff(tail) <= 1e-9 * sup[0])
    if plateau and decays:
        return SCATTERED
    if _band(sup, 0.05):
        if spec is None:
            try:
                spec = default_state_space(traj.fields[0].dim, cfg.alpha)
            except AssumptionViolation:
                return INCONCLUSIVE
        pick = np.unique(np.linspace(0, len(traj) - 1, min(samples, len(traj))).round().astype(int))
        sf = SizeFunctionConfig(coarse_grid_points=9, refine_iters=1)
        ell = np.array([size_function(traj.fields[i], spec, sf).value for i in pick])
        if _band(ell, 0.05):
            return SOLITON
    return INCONCLUSIVE


# -- free Strichartz norm -------------------------------------------------------------


@dataclass(frozen=True)
class StrichartzEstimate:
    """``||e^{it Delta} f||_{L^p_{t,x}([-T, T])}`` plus the analytic tail beyond ``|t| = T``."""

    value: float
    tail: float
    T: float
    exponent: float
    t_switch: float
    grid: tuple[float, int]

    @property
    def tail_fraction(self) -> float:
        """Relative growth of the norm if the tail were included."""
        if self.value == 0:
            return 0.0
        return ((self.value**self.exponent + self.tail) ** (1 / self.exponent)) / self.value - 1.0

    @property
    def total(self) -> float:
        return (self.value**self.exponent + self.tail) ** (1 / self.exponent)

    def to_json(self) -> dict:
        return {"value": self.value, "tail": self.tail, "T": self.T, "exponent": self.exponent,
                "t_switch": self.t_switch, "tail_fraction": self.tail_fraction,
                "grid": list(self.grid)}


def _physical_radius(g: GridField, keep: float = 1 - 1e-12) -> float:
    w = np.abs(g.values) ** 2
    r = g.radius()
    order = np.argsort(r, axis=None)
    cum = np.cumsum(w.ravel()[order])
    i = np.searchsorted(cum, keep * cum[-1])
    return float(r.ravel()[order[min(i, order.size - 1)]])


def _prepare(f: GridField, max_points: int, keep: float = 1 - 1e-12) -> tuple[GridField, float, float]:
    """Refine/enlarge the grid until the near- and far-field regimes overlap."""
    g = f.in_space(PHYSICAL)
    while True:
        _, _, xi_r = spectral_moments(g)
        x_r = _physical_radius(g, keep)
        if xi_r <= g.nyquist / 3 and x_r <= g.extent / 3:
            return g, xi_r, x_r
        if g.n ** g.dim * 2**g.dim > max_points:
            raise NumericalFailure("field too spread out to resolve its free evolution")
        if xi_r > g.nyquist / 3:
            g = resample(g, g.extent, 2 * g.n)
        else:
            g = resample(g, 2 * g.extent, 2 * g.n)


def _simpson(y: np.ndarray, x: np.ndarray) -> float:
    from scipy.integrate import simpson
    return float(simpson(y, x=x))


def free_strichartz_norm(f: GridField, p: float, T: float | None = None,
                         tail_target: float = 1e-3, max_points: int = 2**22,
                         radius_keep: float = 1 - 1e-12, per_efold: int = 24) -> StrichartzEstimate:
    """Space-time ``L^p`` norm of the free evolution over ``[-T, T]``.

    Near ``t = 0`` the flow is computed on the grid.  Past the switch time the
    far-field identity ``|e^{it Delta} f(x)| = (2|t|)^{-d/2} |F[e^{i|y|^2/4t} f](x/2t)|``
    is used on a logarithmic time grid, so large ``T`` costs nothing extra.
    The integrand beyond ``T`` decays like ``t^{-gamma}``, ``gamma = d(p/2 - 1)``,
    and its integral is returned as ``tail``.  ``T=None`` picks ``T`` so the
    tail is below ``tail_target`` relative to the integral.  ``radius_keep``
    is the mass fraction that must sit inside a third of the box; lower it for
    fields with slowly decaying tails (sharp spectral cut-offs).  ``per_efold``
    sets the far-field nodes per unit of ``log t``.
    """
    g = f.in_space(PHYSICAL)
    d = g.dim
    gamma = d * (p / 2 - 1)
    if not gamma > 1:
        raise AssumptionViolation(f"p = {p} gives a divergent time integral in d = {d}")
    if not np.any(g.values):
        return StrichartzEstimate(0.0, 0.0, T or 0.0, p, 0.0, (g.extent, g.n))
    g, xi_r, _ = _prepare(g, max_points, radius_keep)
    L = g.extent
    t_sw = L / (2 * (g.nyquist - xi_r))
    k2 = _k2_raw(g)
    axes = tuple(range(d))
    r2 = g.radius() ** 2
    cell = g.dx**d

    def near(v, t):
        w = np.fft.ifftn(np.exp(-1j * t * k2) * np.fft.fftn(v, axes=axes), axes=axes)
        return float(np.sum(np.abs(w) ** p) * cell)

    def far(v, t):
        ch = g.with_values(np.exp(1j * r2 / (4 * t)) * v).to_fourier()
        return (2 * t) ** (d - d * p / 2) * float(np.sum(np.abs(ch.values) ** p) * ch.dxi**d)

    # pick the near-field resolution from the spectral time scale
    m = int(max(64, math.ceil(8 * t_sw * max(xi_r, 1.0) ** 2)))
    m += m % 2
    tn = np.linspace(0.0, t_sw, m + 1)

    fhat_p = float(np.sum(np.abs(g.to_fourier().values) ** p) * g.dxi**d)
    half_tail_coef = fhat_p * 2.0 ** (-gamma) / (gamma - 1)

    total = 0.0
    tail = 0.0
    T_used = T
    for v in (g.values, np.conj(g.values)):
        near_part = _simpson(np.array([near(v, t) for t in tn]), tn)
        if T_used is None:
            # pick T from the limiting profile so the tail meets the target
            ref = 2 * near_part + 1e-300
            T_used = max(2 * t_sw, (tail_target * ref / half_tail_coef) ** (1 / (1 - gamma)))
            T_used = min(T_used, 1e15)
        if T_used <= t_sw:
            tt = np.linspace(0.0, T_used, m + 1)
            part = _simpson(np.array([near(v, t) for t in tt]), tt)
            total += part
            tail += (near_part - part) + _far_tail(far, v, t_sw, gamma)
            continue
        span = math.log(T_used / t_sw)
        k = int(math.ceil(per_efold * max(span, 8 / 3)))
        k += k % 2
        us = np.linspace(math.log(t_sw), math.log(T_used), k + 1)
        ts = np.exp(us)
        far_part = _simpson(np.array([far(v, t) * t for t in ts]), us)
        total += near_part + far_part
        tail += _far_tail(far, v, T_used, gamma)
    return StrichartzEstimate(total ** (1 / p), tail, float(T_used), p, t_sw, (g.extent, g.n))


def _far_tail(far, v, T: float, gamma: float) -> float:
    """``int_T^infty`` of the far-field integrand, frozen profile beyond T."""
    return far(v, T) * T / (gamma - 1)


@dataclass(frozen=True)
class StrichartzRatio:
    ratio: float
    strichartz: float
    norm: float
    tail_fraction: float
    flagged: bool
    reason: str = ""

    def __float__(self) -> float:
        return self.ratio

    def to_json(self) -> dict:
        return asdict(self)


def strichartz_ratio(f: GridField, spec: MorreySpec, T: float | None = None, alpha: float | None = None,
                     stats_path: str | os.PathLike | None = None, tail_limit: float = 0.01) -> StrichartzRatio:
    """``S_{[-T,T]}(e^{it Delta} f) / ||f||`` with the space-time exponent ``(d+2) alpha``.

    ``alpha`` defaults to ``spec.p / d``.  The tail beyond ``T`` is estimated
    and the result is flagged when it would move the numerator by more than
    ``tail_limit``.  With ``stats_path`` the result is appended as a JSON line.
    """
    d = f.dim
    alpha = alpha if alpha is not None else spec.p / d
    p = (d + 2) * alpha
    norm = hat_morrey_norm(f, spec) if np.any(f.values) else 0.0
    if norm == 0:
        out = StrichartzRatio(0.0, 0.0, 0.0, 0.0, True, "zero field")
    else:
        est = free_strichartz_norm(f, p, T)
        flagged = est.tail_fraction > tail_limit
        out = StrichartzRatio(est.value / norm, est.value, norm, est.tail_fraction, flagged,
                              "tail not converged" if flagged else "")
    if stats_path is not None:
        with open(stats_path, "a") as fh:
            fh.write(json.dumps(out.to_json(), sort_keys=True) + "\n")
    return out


# -- archive --------------------------------------------------------------------------


def save_trajectory(traj: Trajectory, directory: str | os.PathLike) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for i, f in enumerate(traj.fields):
        name = f"snap_{i:05d}.gfld"
        io.write_field(out / name, f)
        names.append(name)
    manifest = {"times": traj.times, "mass": traj.mass, "energy": traj.energy,
                "S_cumulative": traj.S_cumulative, "status": traj.status,
                "cfg": traj.cfg.to_json(), "files": names}
    io.write_json(out / "manifest.json", manifest)
    return out


def load_trajectory(directory: str | os.PathLike) -> Trajectory:
    src = Path(directory)
    try:
        man = json.loads((src / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{src}: unreadable manifest ({exc})") from exc
    fields = tuple(io.read_field(src / name) for name in man["files"])
    return Trajectory(np.array(man["times"]), fields, np.array(man["mass"]), np.array(man["energy"]),
                      np.array(man["S_cumulative"]), man["status"], SolverConfig(**man["cfg"]))
