"""Sampled fields on a periodic box and dyadic cube geometry.

A field on ``[-L, L)^d`` with ``n`` samples per axis sits at ``x_m = -L + m dx``
with ``dx = 2L/n``.  Its Fourier representation holds samples of the unitary
continuous transform

    F f(xi) = (2 pi)^{-d/2} int e^{-i x.xi} f(x) dx

at ``xi_k = (k - n/2) dxi`` with ``dxi = pi/L``.  With this scaling the
discrete Parseval identity ``sum |f|^2 dx^d = sum |F f|^2 dxi^d`` is exact.

Samples are read as cell values on half-open cells ``[x_m, x_m + dx)^d``; that
is the model every dyadic norm in :mod:`morrey_nls.spaces` integrates.  When
the spacing is an exact power of two the cells nest inside dyadic cubes, so the
norms become finite sums plus geometric tails with closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import BandOverflowError, ConfigurationError

PHYSICAL = "physical"
FOURIER = "fourier"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class GridField:
    """Complex samples on ``[-L, L)^d`` in either physical or Fourier space."""

    values: np.ndarray
    extent: float
    space: str = PHYSICAL

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex, order="C")
        if vals.ndim < 1:
            raise ConfigurationError("field needs at least one axis")
        n = vals.shape[0]
        if any(s != n for s in vals.shape):
            raise ConfigurationError(f"axes must have equal length, got {vals.shape}")
        if not _is_power_of_two(n) or n < 2:
            raise ConfigurationError(f"n_per_axis must be a power of two, got {n}")
        if not (self.extent > 0 and math.isfinite(self.extent)):
            raise ConfigurationError(f"extent must be positive, got {self.extent}")
        if self.space not in (PHYSICAL, FOURIER):
            raise ConfigurationError(f"unknown space flag {self.space!r}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "extent", float(self.extent))

    # -- geometry ---------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dx(self) -> float:
        return 2.0 * self.extent / self.n

    @property
    def dxi(self) -> float:
        return math.pi / self.extent

    @property
    def spacing(self) -> float:
        """Sample spacing in the space the values currently live in."""
        return self.dx if self.space == PHYSICAL else self.dxi

    @property
    def nyquist(self) -> float:
        return self.n * self.dxi / 2

    def axis(self, space: str | None = None) -> np.ndarray:
        space = space or self.space
        idx = np.arange(self.n) - self.n // 2
        return idx * (self.dx if space == PHYSICAL else self.dxi)

    def mesh(self, space: str | None = None) -> list[np.ndarray]:
        ax = self.axis(space)
        return list(np.meshgrid(*([ax] * self.dim), indexing="ij"))

    def radius(self, space: str | None = None) -> np.ndarray:
        return np.sqrt(sum(c**2 for c in self.mesh(space)))

    def same_grid(self, other: "GridField") -> bool:
        return self.dim == other.dim and self.n == other.n and self.extent == other.extent

    # -- construction -----------------------------------------------------

    @classmethod
    def from_function(cls, fn: Callable[..., np.ndarray], dim: int, n: int, extent: float,
                      space: str = PHYSICAL) -> "GridField":
        """Sample ``fn(x_1, ..., x_d)`` on the grid (``space`` picks x or xi)."""
        probe = cls(np.zeros((n,) * dim), extent, space)
        return probe.with_values(fn(*probe.mesh()))

    @classmethod
    def zeros(cls, dim: int, n: int, extent: float, space: str = PHYSICAL) -> "GridField":
        return cls(np.zeros((n,) * dim, dtype=complex), extent, space)

    def with_values(self, values: np.ndarray, space: str | None = None) -> "GridField":
        vals = np.asarray(values, dtype=complex)
        if vals.shape != self.values.shape:
            vals = np.broadcast_to(vals, self.values.shape)
        return GridField(vals, self.extent, space or self.space)

    # -- transforms -------------------------------------------------------

    def to_fourier(self) -> "GridField":
        return to_fourier(self)

    def to_physical(self) -> "GridField":
        return to_physical(self)

    def in_space(self, space: str) -> "GridField":
        return self if self.space == space else (self.to_fourier() if space == FOURIER else self.to_physical())

    def physical_values(self) -> np.ndarray:
        return self.in_space(PHYSICAL).values

    def fourier_values(self) -> np.ndarray:
        return self.in_space(FOURIER).values

    # -- arithmetic -------------------------------------------------------

    def _check_compatible(self, other: "GridField"):
        if not self.same_grid(other):
            raise ConfigurationError("fields live on different grids")

    def __add__(self, other: "GridField") -> "GridField":
        self._check_compatible(other)
        return self.with_values(self.values + other.in_space(self.space).values)

    def __sub__(self, other: "GridField") -> "GridField":
        self._check_compatible(other)
        return self.with_values(self.values - other.in_space(self.space).values)

    def __mul__(self, c: complex) -> "GridField":
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "GridField":
        return self.with_values(-self.values)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.spacing**self.dim))

    def inner(self, other: "GridField") -> complex:
        """``int f conj(g)``, evaluated in this field's space."""
        self._check_compatible(other)
        g = other.in_space(self.space)
        return complex(np.vdot(g.values, self.values) * self.spacing**self.dim)

    def boundary_max(self, width: int = 1) -> float:
        """Largest physical |f| within ``width`` samples of the box faces."""
        vals = np.abs(self.physical_values())
        out = 0.0
        for ax in range(self.dim):
            lo = np.take(vals, range(width), axis=ax)
            hi = np.take(vals, range(self.n - width, self.n), axis=ax)
            out = max(out, float(lo.max()), float(hi.max()))
        return out

    def __repr__(self) -> str:
        return f"GridField(dim={self.dim}, n={self.n}, extent={self.extent!r}, space={self.space!r})"


def to_fourier(f: GridField) -> GridField:
    if f.space != PHYSICAL:
        raise ConfigurationError("to_fourier expects a physical-space field")
    axes = tuple(range(f.dim))
    vals = np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(f.values, axes=axes), axes=axes), axes=axes)
    vals *= (f.dx / math.sqrt(2 * math.pi)) ** f.dim
    return GridField(vals, f.extent, FOURIER)


def to_physical(f: GridField) -> GridField:
    if f.space != FOURIER:
        raise ConfigurationError("to_physical expects a Fourier-space field")
    axes = tuple(range(f.dim))
    vals = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(f.values, axes=axes), axes=axes), axes=axes)
    vals *= (math.sqrt(2 * math.pi) / f.dx) ** f.dim
    return GridField(vals, f.extent, PHYSICAL)


# -- dyadic cubes -----------------------------------------------------------


@dataclass(frozen=True, order=True)
class DyadicCube:
    """``2^{-j}([0,1)^d + k)``."""

    j: int
    k: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "j", int(self.j))
        object.__setattr__(self, "k", tuple(int(v) for v in np.atleast_1d(self.k)))

    @property
    def dim(self) -> int:
        return len(self.k)

    @property
    def side(self) -> float:
        return 2.0 ** (-self.j)

    @property
    def volume(self) -> float:
        return self.side**self.dim

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.k, dtype=float) * self.side

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.k, dtype=float) + 0.5) * self.side

    def children(self) -> list["DyadicCube"]:
        offsets = np.array(np.meshgrid(*([[0, 1]] * self.dim), indexing="ij")).reshape(self.dim, -1).T
        return [DyadicCube(self.j + 1, tuple(2 * np.asarray(self.k) + o)) for o in offsets]

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.j - 1, tuple(np.floor_divide(self.k, 2)))

    def contains(self, points: Sequence[np.ndarray]) -> np.ndarray:
        """Half-open membership test for broadcastable coordinate arrays."""
        lo, s = self.lower, self.side
        mask = np.ones(np.broadcast(*points).shape, dtype=bool)
        for c, l in zip(points, lo):
            mask &= (c >= l) & (c < l + s)
        return mask

    def to_json(self) -> dict:
        return {"j": self.j, "k": list(self.k)}


def restrict_to_cube(fhat: GridField, cube: DyadicCube) -> GridField:
    """Zero every Fourier sample outside the half-open cube."""
    if fhat.space != FOURIER:
        raise ConfigurationError("restrict_to_cube expects a Fourier-space field")
    if cube.dim != fhat.dim:
        raise ConfigurationError("cube dimension does not match field")
    ax = fhat.axis()
    masks = [(ax >= lo) & (ax < lo + cube.side) for lo in cube.lower]
    mask = masks[0]
    for m in masks[1:]:
        mask = np.multiply.outer(mask, m)
    return fhat.with_values(np.where(mask, fhat.values, 0))


@dataclass(frozen=True)
class FrequencyWindow:
    """Inclusive scale range ``j_min <= j <= j_max`` kept in a dyadic sum."""

    j_min: int
    j_max: int
    k_bound: int = 0

    def __post_init__(self):
        if self.j_min > self.j_max:
            raise ConfigurationError(f"empty window [{self.j_min}, {self.j_max}]")

    def scales(self) -> Iterator[int]:
        return iter(range(self.j_min, self.j_max + 1))

    def to_json(self) -> dict:
        return {"j_min": self.j_min, "j_max": self.j_max}


def dyadic_exponent(spacing: float) -> int:
    """Return J with ``spacing == 2^{-J}`` exactly, else raise."""
    m, e = math.frexp(spacing)
    if m != 0.5:
        raise ConfigurationError(
            f"grid spacing {spacing!r} is not a power of two; dyadic cubes would cut through "
            "sample cells (choose extent = pi * 2^m for Fourier norms, 2^m for physical ones)")
    return 1 - e


def default_window(f: GridField, tail_tol: float, spec) -> FrequencyWindow:
    """Smallest scale window whose omitted tail is below ``tail_tol``.

    ``spec`` is a :class:`morrey_nls.spaces.MorreySpec`; the tail is measured on
    the norm itself (not its r-th power).
    """
    from . import _dyadic

    if not tail_tol > 0:
        raise ConfigurationError("tail_tol must be positive")
    side = f.in_space(FOURIER if spec.hat else PHYSICAL)
    prof = _dyadic.ScaleProfile.build(side, *spec.sample_exponents())
    return prof.window_for(tail_tol)


# -- resampling ---------------------------------------------------------------


def _pow2_ratio(a: float, b: float, what: str) -> int:
    r = a / b
    k = round(math.log2(r))
    if not math.isclose(r, 2.0**k, rel_tol=1e-12):
        raise ConfigurationError(f"{what} ratio {r!r} is not a power of two")
    return k


def _embed_center(vals: np.ndarray, n_new: int) -> np.ndarray:
    """Pad or crop symmetrically so index n/2 stays at the center."""
    n = vals.shape[0]
    if n_new == n:
        return vals
    d = vals.ndim
    if n_new > n:
        off = (n_new - n) // 2
        out = np.zeros((n_new,) * d, dtype=complex)
        out[(slice(off, off + n),) * d] = vals
        return out
    off = (n - n_new) // 2
    return vals[(slice(off, off + n_new),) * d]


def _discarded_fraction(vals: np.ndarray, n_new: int) -> float:
    total = float(np.sum(np.abs(vals) ** 2))
    if total == 0.0:
        return 0.0
    # sum the discarded samples directly: total - kept would leave a sqrt(eps) floor
    n, d = vals.shape[0], vals.ndim
    if n_new >= n:
        return 0.0
    off = (n - n_new) // 2
    keep = np.zeros(vals.shape, dtype=bool)
    keep[(slice(off, off + n_new),) * d] = True
    return math.sqrt(float(np.sum(np.abs(vals[~keep]) ** 2)) / total)


def resample(f: GridField, extent: float, n: int, tol: float = 1e-9) -> GridField:
    """Move ``f`` onto the grid ``(extent, n)``.

    Both grids must differ by powers of two in extent and spacing.  Refining
    the spacing pads the spectrum with zeros; enlarging the box pads the field
    with zeros.  Either crop raises :class:`BandOverflowError` when it would
    discard more than ``tol`` of the L2 norm.
    """
    if extent == f.extent and n == f.n:
        return f
    dx_new = 2.0 * extent / n
    _pow2_ratio(f.dx, dx_new, "spacing")
    _pow2_ratio(extent, f.extent, "extent")

    # spacing change at the source extent
    n_mid = int(round(2 * f.extent / dx_new))
    fh = f.in_space(FOURIER)
    if n_mid != f.n:
        lost = _discarded_fraction(fh.values, n_mid)
        if lost > tol:
            raise BandOverflowError(f"resample would drop {lost:.2e} of the spectrum")
        fh = GridField(_embed_center(fh.values, n_mid), f.extent, FOURIER)
    g = fh.to_physical()
    if n != g.n:
        lost = _discarded_fraction(g.values, n)
        if lost > tol:
            raise BandOverflowError(f"resample would drop {lost:.2e} of the field outside the box")
        g = GridField(_embed_center(g.values, n), extent, PHYSICAL)
    return g if f.space == PHYSICAL else g.to_fourier()
