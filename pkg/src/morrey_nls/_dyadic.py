"""Exact dyadic sums for piecewise-constant cell data.

Cells of side ``h = 2^{-J}`` are aligned with dyadic cubes and the band
``[-n h/2, n h/2)^d`` splits into ``2^d`` orthants.  Every cube then falls in
one of three regimes:

* sub-cell cubes (``j > J``) see a constant, so each scale contributes
  ``A 2^{-(j-J) beta}`` with ``beta = d (r/P - 1)``;
* cubes between the cell and the orthant scale are unions of cells and are
  summed explicitly;
* cubes beyond the orthant scale contain at most one orthant each and
  contribute ``B 2^{-(j_o-j) gamma}`` with ``gamma = d r (1/Q - 1/P)``.

The weighted cube value is ``|tau|^{1/P - 1/Q} ||c||_{L^Q(tau)}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import AssumptionViolation
from .grid import FrequencyWindow, GridField, dyadic_exponent


def block_reduce(arr: np.ndarray, op=np.add) -> np.ndarray:
    """Combine each 2x...x2 block of a d-dimensional array."""
    d = arr.ndim
    n = arr.shape[0]
    shaped = arr.reshape(sum(((n // 2, 2) for _ in range(d)), ()))
    return op.reduce(shaped, axis=tuple(range(1, 2 * d, 2)))


def iter_block_masses(absvals: np.ndarray, h: float, Q: float) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(m, masses)`` for cube sides ``2^m h`` up to the orthant scale.

    ``masses`` is ``||c||_{L^Q(tau)}^Q`` per cube (the max when Q is infinite).
    """
    d = absvals.ndim
    if math.isinf(Q):
        mass, op = absvals.astype(float), np.maximum
    else:
        mass, op = absvals.astype(float) ** Q * h**d, np.add
    m = 0
    while True:
        yield m, mass
        if mass.shape[0] <= 2:
            return
        mass = block_reduce(mass, op)
        m += 1


def cube_index(m: int, flat_block: np.ndarray | int, n: int, d: int) -> tuple[int, ...]:
    """Lattice index k of a block at level m (blocks counted from the band edge)."""
    nb = n >> m
    idx = np.unravel_index(flat_block, (nb,) * d)
    return tuple(int(i) - nb // 2 for i in idx)


@dataclass
class ScaleProfile:
    """Per-scale contributions of a weighted dyadic l^r sum."""

    J: int
    j_orth: int
    d: int
    P: float
    Q: float
    r: float
    explicit: dict = field(default_factory=dict)
    A: float = 0.0
    B: float = 0.0

    @classmethod
    def build(cls, f: GridField, P: float, Q: float, r: float) -> "ScaleProfile":
        return cls.from_abs(np.abs(f.values), f.spacing, P, Q, r)

    @classmethod
    def from_abs(cls, absvals: np.ndarray, h: float, P: float, Q: float, r: float) -> "ScaleProfile":
        """Same as :meth:`build` from ``|values|`` and the cell side ``h``."""
        if not (Q < P or (math.isinf(r) and Q <= P)):
            raise AssumptionViolation(f"need Q < P for a convergent coarse tail (P={P}, Q={Q})")
        if not (r > P):
            raise AssumptionViolation(f"need r > P for a convergent fine tail (P={P}, r={r})")
        J = dyadic_exponent(h)
        d, n = absvals.ndim, absvals.shape[0]
        w = 1.0 / P - (0.0 if math.isinf(Q) else 1.0 / Q)
        prof = cls(J=J, j_orth=J - (n.bit_length() - 2), d=d, P=P, Q=Q, r=r)
        for m, mass in iter_block_masses(absvals, h, Q):
            s = 2.0**m * h
            if math.isinf(r):
                norm = mass if math.isinf(Q) else mass ** (1.0 / Q)
                prof.explicit[J - m] = float(s ** (d * w) * norm.max())
            else:
                # sum_tau (s^{dw} ||c||_Q)^r with the weight pulled out of the sum
                powed = mass**r if math.isinf(Q) else mass ** (r / Q)
                prof.explicit[J - m] = float(s ** (d * w * r) * powed.sum())
        prof.A = prof.explicit[J]
        prof.B = prof.explicit[prof.j_orth]
        return prof

    @property
    def beta(self) -> float:
        return self.d * (self.r / self.P - 1.0)

    @property
    def gamma(self) -> float:
        return self.d * self.r * ((0.0 if math.isinf(self.Q) else 1.0 / self.Q) - 1.0 / self.P)

    def contribution(self, j: int) -> float:
        if j in self.explicit:
            return self.explicit[j]
        if math.isinf(self.r):
            if j > self.J:
                return self.A * 2.0 ** (-(j - self.J) * self.d / self.P)
            w = 1.0 / self.P - (0.0 if math.isinf(self.Q) else 1.0 / self.Q)
            return self.B * 2.0 ** ((self.j_orth - j) * self.d * w)
        if j > self.J:
            return self.A * 2.0 ** (-(j - self.J) * self.beta)
        return self.B * 2.0 ** (-(self.j_orth - j) * self.gamma)

    def _fine_tail(self, j_max: int) -> float:
        """Sum of contributions with ``j > j_max``."""
        start = max(j_max + 1, self.J + 1)
        total = sum(v for j, v in self.explicit.items() if j > j_max)
        total += self.A * 2.0 ** (-(start - self.J) * self.beta) / (1.0 - 2.0 ** (-self.beta))
        return total

    def _coarse_tail(self, j_min: int) -> float:
        """Sum of contributions with ``j < j_min``."""
        start = min(j_min - 1, self.j_orth - 1)
        total = sum(v for j, v in self.explicit.items() if j < j_min)
        total += self.B * 2.0 ** (-(self.j_orth - start) * self.gamma) / (1.0 - 2.0 ** (-self.gamma))
        return total

    def power_sum(self, window: FrequencyWindow) -> float:
        """r-th power of the windowed norm (the max when r is infinite)."""
        js = range(window.j_min, window.j_max + 1)
        if math.isinf(self.r):
            return max((self.contribution(j) for j in js), default=0.0)
        inner = [self.explicit[j] for j in js if j in self.explicit]
        total = float(np.sum(inner)) if inner else 0.0
        # geometric pieces inside the window but outside the explicit range
        if window.j_max > self.J:
            lo = max(window.j_min, self.J + 1)
            if lo <= window.j_max:
                total += self._fine_tail(lo - 1) - self._fine_tail(window.j_max)
        if window.j_min < self.j_orth:
            hi = min(window.j_max, self.j_orth - 1)
            if hi >= window.j_min:
                total += self._coarse_tail(hi + 1) - self._coarse_tail(window.j_min)
        return total

    def norm(self, window: FrequencyWindow) -> float:
        s = self.power_sum(window)
        return s if math.isinf(self.r) else s ** (1.0 / self.r)

    def omitted(self, window: FrequencyWindow) -> float:
        if math.isinf(self.r):
            out = [v for j, v in self.explicit.items() if not window.j_min <= j <= window.j_max]
            return max(out, default=0.0)
        return self._fine_tail(window.j_max) + self._coarse_tail(window.j_min)

    def tail_bound(self, window: FrequencyWindow) -> float:
        """How much the norm would grow if every omitted scale were added."""
        s, t = self.power_sum(window), self.omitted(window)
        if math.isinf(self.r):
            return max(0.0, t - s)
        return (s + t) ** (1.0 / self.r) - s ** (1.0 / self.r)

    def explicit_window(self) -> FrequencyWindow:
        return FrequencyWindow(self.j_orth, self.J, k_bound=2 ** (self.J - self.j_orth))

    def window_for(self, tail_tol: float) -> FrequencyWindow:
        base = self.explicit_window()
        if math.isinf(self.r):
            return base
        s0 = sum(self.explicit.values())
        if s0 == 0.0:
            return FrequencyWindow(self.J, self.J, k_bound=0)
        # (s+t)^{1/r} - s^{1/r} <= t / (r s^{1-1/r}) by concavity
        budget = 0.5 * tail_tol * self.r * s0 ** (1.0 - 1.0 / self.r)
        t_fine = 0
        if self.A > 0:
            need = math.log2(self.A / ((1.0 - 2.0 ** (-self.beta)) * budget)) / self.beta - 1.0
            t_fine = max(0, math.ceil(need))
        u_coarse = 0
        if self.B > 0:
            need = math.log2(self.B / ((1.0 - 2.0 ** (-self.gamma)) * budget)) / self.gamma - 1.0
            u_coarse = max(0, math.ceil(need))
        return FrequencyWindow(self.j_orth - u_coarse, self.J + t_fine, k_bound=base.k_bound)
