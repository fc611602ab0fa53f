"""Experiment configuration files.

The format is INI (``configparser``): an ``[experiment]`` section with the
core keys, plus optional sections for the grid, the solver and each
experiment kind.  Exponents may be written as fractions (``alpha = 3/2``) and
are validated against the admissible ranges with exact rational arithmetic.

Example::

    [experiment]
    kind = soliton-orbit
    d = 1
    alpha = 3/2
    seed = 0
    output_dir = runs/soliton

    [grid]
    n = 1024
    extent = 16 pi

    [solver]
    dt = 1e-4
    t_end = 1
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ConfigurationError
from .io import digest, dumps

KINDS = ("norm-suite", "soliton-orbit", "threshold-scan", "critical-numbers",
         "profile-synthetic", "almost-periodicity", "strichartz-sweep")

# kinds that do not touch the hat-Morrey state space
NO_STATE_SPACE = ("critical-numbers",)

CORE_KEYS = {"kind", "d", "alpha", "r", "seed", "output_dir", "hat_diagnostics"}


def parse_fraction(text: str, key: str) -> Fraction:
    """``3/2``, ``1.5`` or ``1.5e0`` as an exact fraction."""
    try:
        return Fraction(text.strip().replace(" ", ""))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"{key}: cannot read {text!r} as an exact number") from exc


_PI = re.compile(r"^\s*([-+0-9.eE/]*)\s*\*?\s*pi\s*$")


def parse_real(text: str, key: str) -> float:
    """A float, a fraction, or a multiple of pi such as ``16 pi``."""
    m = _PI.match(text)
    try:
        if m:
            coef = m.group(1)
            return float(Fraction(coef)) * math.pi if coef else math.pi
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"{key}: cannot read {text!r} as a number") from exc


def parse_list(text: str, key: str) -> list[float]:
    items = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    if not items:
        raise ConfigurationError(f"{key}: empty list")
    return [parse_real(t, key) for t in items]


# -- exact admissibility ------------------------------------------------------------


def conjugate_q(p: Fraction) -> Fraction:
    if p <= 1:
        raise ConfigurationError(f"conjugate of {p} is not finite")
    return p / (p - 1)


def star_q(a: Fraction) -> Fraction:
    return a if a <= 2 else min(a, 2 * a / (a - 2))


def alpha_bounds(d: int) -> tuple[Fraction, Fraction]:
    two_d = Fraction(2, d)
    return two_d / (1 + Fraction(2, d * (d + 3))), two_d


def r_bounds(d: int, alpha: Fraction) -> tuple[Fraction, Fraction]:
    return conjugate_q(d * alpha), star_q((d + 2) * alpha)


def check_exponents(d: int, alpha: Fraction, r: Fraction | None) -> Fraction:
    """Validate ``(d, alpha, r)``; returns r (the interval midpoint when None)."""
    lo, hi = alpha_bounds(d)
    if not alpha > lo:
        raise ConfigurationError(f"alpha = {alpha} violates alpha > (2/d)/(1 + 2/(d(d+3))) = {lo} (d = {d})")
    if not alpha < hi:
        raise ConfigurationError(f"alpha = {alpha} violates alpha < 2/d = {hi}; the mass-critical "
                                 f"endpoint is excluded (d = {d})")
    rlo, rhi = r_bounds(d, alpha)
    if r is None:
        return (rlo + rhi) / 2
    if not r > rlo:
        raise ConfigurationError(f"r = {r} violates r > (d alpha)' = {rlo}")
    if not r < rhi:
        raise ConfigurationError(f"r = {r} violates r < ((d+2) alpha)^* = {rhi}; the endpoint is excluded")
    return r


# -- the config object ---------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    d: int
    alpha: Fraction
    r: Fraction | None
    seed: int = 0
    output_dir: str = "runs/out"
    hat_diagnostics: bool = True
    sections: dict = field(default_factory=dict)
    source: str = ""

    @property
    def alpha_f(self) -> float:
        return float(self.alpha)

    @property
    def r_f(self) -> float:
        return float(self.r)

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def get_real(self, name: str, key: str, default: float) -> float:
        raw = self.section(name).get(key)
        return default if raw is None else parse_real(raw, f"{name}.{key}")

    def get_int(self, name: str, key: str, default: int) -> int:
        raw = self.section(name).get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigurationError(f"{name}.{key}: {raw!r} is not an integer") from exc

    def get_list(self, name: str, key: str, default: list[float]) -> list[float]:
        raw = self.section(name).get(key)
        return list(default) if raw is None else parse_list(raw, f"{name}.{key}")

    def get_bool(self, name: str, key: str, default: bool) -> bool:
        raw = self.section(name).get(key)
        if raw is None:
            return default
        return _parse_bool(raw, f"{name}.{key}")

    def to_json(self) -> dict:
        return {"kind": self.kind, "d": self.d, "alpha": str(self.alpha),
                "r": None if self.r is None else str(self.r), "seed": self.seed,
                "output_dir": self.output_dir, "hat_diagnostics": self.hat_diagnostics,
                "sections": self.sections}

    def hash(self) -> str:
        """Digest of the parsed configuration (independent of file layout)."""
        return digest(dumps(self.to_json()))


def _parse_bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"{key}: {raw!r} is not a boolean")


def parse_config(text: str) -> ExperimentConfig:
    if not text.strip():
        raise ConfigurationError("empty configuration")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from exc
    if not cp.has_section("experiment"):
        raise ConfigurationError("missing [experiment] section")
    core = dict(cp["experiment"])
    unknown = set(core) - CORE_KEYS
    if unknown:
        raise ConfigurationError(f"unknown keys in [experiment]: {sorted(unknown)}")
    kind = core.get("kind", "").strip()
    if kind not in KINDS:
        raise ConfigurationError(f"kind must be one of {', '.join(KINDS)}; got {kind!r}")
    try:
        d = int(core.get("d", "1"))
    except ValueError as exc:
        raise ConfigurationError(f"d: {core['d']!r} is not an integer") from exc
    if d < 1:
        raise ConfigurationError("d must be >= 1")
    hat = _parse_bool(core.get("hat_diagnostics", "true"), "hat_diagnostics") and kind not in NO_STATE_SPACE
    alpha = parse_fraction(core["alpha"], "alpha") if "alpha" in core else None
    r = parse_fraction(core["r"], "r") if "r" in core else None
    if hat:
        if alpha is None:
            raise ConfigurationError("alpha is required")
        r = check_exponents(d, alpha, r)
    elif alpha is None:
        alpha = Fraction(4, max(d - 2, 1)) / 2 if d > 2 else Fraction(1)
    try:
        seed = int(core.get("seed", "0"))
    except ValueError as exc:
        raise ConfigurationError(f"seed: {core['seed']!r} is not an integer") from exc
    sections = {name: dict(cp[name]) for name in cp.sections() if name != "experiment"}
    return ExperimentConfig(kind, d, alpha, r, seed, core.get("output_dir", f"runs/{kind}"), hat,
                            sections, text)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    return parse_config(text)
