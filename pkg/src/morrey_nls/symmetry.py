"""The deformation group ``e^{i theta} D(h) P(b) U(s) T(a)``.

Operators::

    D(h) f = h^{1/alpha} f(h x)      h = 2^m
    P(b) f = e^{-i x.b} f
    U(s)   = e^{i s Delta}           multiplier e^{-i s |xi|^2}
    T(a) f = f(x - a)

Normal form composes right to left: T first, the phase last.  ``D(h)`` is
applied by shrinking the box extent by ``h`` so it is sample-exact; pass a
target grid to :func:`apply` when the result must live on a fixed grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, ValidationError
from .grid import FOURIER, PHYSICAL, GridField, resample

TWO_PI = 2.0 * math.pi


def _vec(v, d: int | None = None) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if d is not None and arr.size == 1 and d > 1:
        arr = np.full(d, float(arr[0]))
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class Deformation:
    """Normal-form parameters; ``h = 2^m`` is stored through its exponent."""

    theta: float = 0.0
    m: int = 0
    b: tuple[float, ...] = (0.0,)
    s: float = 0.0
    a: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if int(self.m) != self.m:
            raise ConfigurationError(f"scale exponent must be an integer, got {self.m}")
        b, a = _vec(self.b), _vec(self.a)
        if len(b) != len(a):
            if len(b) == 1:
                b = b * len(a)
            elif len(a) == 1:
                a = a * len(b)
            else:
                raise ConfigurationError("b and a have different dimensions")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)

    @classmethod
    def identity(cls, d: int = 1) -> "Deformation":
        return cls(0.0, 0, (0.0,) * d, 0.0, (0.0,) * d)

    @classmethod
    def from_h(cls, h: float = 1.0, **kw) -> "Deformation":
        m = math.log2(h)
        if m != round(m):
            raise ConfigurationError(f"h = {h} is not a power of two")
        return cls(m=int(round(m)), **kw)

    @property
    def dim(self) -> int:
        return len(self.b)

    @property
    def h(self) -> float:
        return 2.0**self.m

    @property
    def bv(self) -> np.ndarray:
        return np.asarray(self.b)

    @property
    def av(self) -> np.ndarray:
        return np.asarray(self.a)

    def normalized(self) -> "Deformation":
        """Phase reduced to ``[0, 2 pi)``."""
        return Deformation(math.fmod(self.theta, TWO_PI) % TWO_PI, self.m, self.b, self.s, self.a)

    def magnitude(self) -> float:
        """``|log h| + |b| + |s| + |a|``."""
        return abs(self.m) * math.log(2) + float(np.linalg.norm(self.bv)) + abs(self.s) \
            + float(np.linalg.norm(self.av))

    def distance(self, other: "Deformation", modulo_phase: bool = True) -> float:
        """Largest parameter difference, phase compared on the circle."""
        dth = math.remainder(self.theta - other.theta, TWO_PI)
        parts = [abs(self.m - other.m), abs(self.s - other.s),
                 float(np.abs(self.bv - other.bv).max()), float(np.abs(self.av - other.av).max())]
        if not modulo_phase:
            parts.append(abs(dth))
        return max(parts)

    def to_json(self) -> dict:
        return {"theta": self.theta, "m": self.m, "b": list(self.b), "s": self.s, "a": list(self.a)}

    @classmethod
    def from_json(cls, obj: dict) -> "Deformation":
        return cls(obj["theta"], obj["m"], tuple(obj["b"]), obj["s"], tuple(obj["a"]))


def compose(G1: Deformation, G2: Deformation) -> Deformation:
    """Normal form of ``G1 G2`` (apply G2 first)."""
    h2 = G2.h
    b1, a1, b2, a2 = G1.bv, G1.av, G2.bv, G2.av
    theta = G1.theta + G2.theta + h2 * float(a1 @ b2) - h2**2 * G1.s * float(b2 @ b2)
    return Deformation(
        theta=theta,
        m=G1.m + G2.m,
        b=tuple(b1 / h2 + b2),
        s=h2**2 * G1.s + G2.s,
        a=tuple(h2 * a1 - 2 * h2**2 * G1.s * b2 + a2),
    )


def invert(G: Deformation) -> Deformation:
    h, b, a, s = G.h, G.bv, G.av, G.s
    return Deformation(
        theta=-G.theta + float(a @ b) + s * float(b @ b),
        m=-G.m,
        b=tuple(-h * b),
        s=-s / h**2,
        a=tuple(-(a + 2 * s * b) / h),
    )


# -- action on fields ---------------------------------------------------------


def dilate(f: GridField, m: int, alpha: float) -> GridField:
    """``D(2^m)`` by rescaling the box; sample values only pick up the amplitude."""
    h = 2.0**m
    if f.space == PHYSICAL:
        amp = h ** (1.0 / alpha)
    else:
        amp = h ** (1.0 / alpha - f.dim)
    return GridField(f.values * amp, f.extent / h, f.space)


def boost(f: GridField, b: Sequence[float]) -> GridField:
    """``P(b) f = e^{-i x.b} f`` by exact multiplication in physical space."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if not np.any(b):
        return f
    g = f.in_space(PHYSICAL)
    phase = sum(x * bi for x, bi in zip(g.mesh(), b))
    return g.with_values(g.values * np.exp(-1j * phase)).in_space(f.space)


def shift_and_flow(f: GridField, a: Sequence[float], s: float) -> GridField:
    """``U(s) T(a) f`` as one Fourier multiplier."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if s == 0 and not np.any(a):
        return f
    fh = f.in_space(FOURIER)
    mesh = fh.mesh()
    phase = s * sum(k**2 for k in mesh) + sum(k * ai for k, ai in zip(mesh, a))
    return fh.with_values(fh.values * np.exp(-1j * phase)).in_space(f.space)


def apply(G: Deformation, f: GridField, alpha: float,
          grid: tuple[float, int] | None = None, tol: float = 1e-9) -> GridField:
    """Act with ``G`` on ``f``.

    Without ``grid`` the result lives on ``(f.extent / h, f.n)``.  With
    ``grid = (extent, n)`` the input is first resampled to
    ``(extent * h, n)`` so the dilation lands exactly on the target grid;
    resampling raises :class:`BandOverflowError` if data would be lost.
    """
    if G.dim != f.dim:
        raise ConfigurationError(f"deformation is {G.dim}-dimensional, field is {f.dim}-dimensional")
    if grid is not None:
        f = resample(f, grid[0] * G.h, grid[1], tol=tol)
    g = shift_and_flow(f, G.a, G.s)
    g = boost(g, G.b)
    if G.m:
        g = dilate(g, G.m, alpha)
    if G.theta:
        g = g * complex(np.exp(1j * G.theta))
    return g


# -- orthogonality ------------------------------------------------------------


@dataclass(frozen=True)
class FamilyDivergence:
    scale_gap: float
    boost_gap: float
    time_gap: float
    shift_gap: float

    @property
    def total(self) -> float:
        return self.scale_gap + self.boost_gap + self.time_gap + self.shift_gap

    def components(self) -> np.ndarray:
        return np.array([self.scale_gap, self.boost_gap, self.time_gap, self.shift_gap])

    def to_json(self) -> dict:
        return {"scale_gap": self.scale_gap, "boost_gap": self.boost_gap,
                "time_gap": self.time_gap, "shift_gap": self.shift_gap, "total": self.total}


def orthogonality_divergence(G1: Deformation, G2: Deformation) -> FamilyDivergence:
    """Relative parameter sizes of ``G2^{-1} G1``."""
    h1, h2 = G1.h, G2.h
    ratio = h1 / h2
    db = G1.bv - G2.bv / ratio
    shift = G1.av - ratio * G2.av + 2 * ratio**2 * G2.s * db
    return FamilyDivergence(
        scale_gap=abs(G1.m - G2.m) * math.log(2),
        boost_gap=float(np.linalg.norm(db)),
        time_gap=abs(G1.s - ratio**2 * G2.s),
        shift_gap=float(np.linalg.norm(shift)),
    )


def is_vanishing_trajectory(params: Sequence[Deformation], ratio: float = 10.0,
                            growth: float = 10.0) -> bool:
    """Finite-data guess at ``|log h_n| + |b_n| + |s_n| + |a_n| -> infinity``.

    True when the magnitude increases strictly over the last third and the
    final value either exceeds ``ratio`` times the median or has grown by at
    least ``growth`` since the first entry.  Diagnostics only.
    """
    if len(params) < 3:
        raise ValidationError("need at least 3 deformations")
    mags = np.array([G.magnitude() for G in params])
    tail = mags[-max(2, len(mags) // 3):]
    if not np.all(np.diff(tail) > 0):
        return False
    return bool(mags[-1] > ratio * np.median(mags) or mags[-1] - mags[0] >= growth)
