"""Regime parameters and the sampled traveling-wave profile container."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvariantError

FLAG_SMOOTH = "smooth"
FLAG_KINK_LEFT = "kink_left"
FLAG_KINK_RIGHT = "kink_right"
FLAGS = (FLAG_SMOOTH, FLAG_KINK_LEFT, FLAG_KINK_RIGHT)


class Regime(str, enum.Enum):
    G0_D0 = "G0_D0"
    G0_DPOS = "G0_Dpos"
    GPOS_D0 = "Gpos_D0"
    GPOS_DPOS = "Gpos_Dpos"


@dataclass(frozen=True)
class RegimeParams:
    """Gravity number G, surface diffusion D and far-field height H* (wave speed fixed to 1)."""

    G: float
    D: float
    H_star: float
    wave_speed: float = field(default=1.0, init=False)

    def __post_init__(self):
        for name in ("G", "D", "H_star"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.G < 0.0:
            raise DomainError(f"G must be non-negative, got {self.G}")
        if self.D < 0.0:
            raise DomainError(f"D must be non-negative, got {self.D}")
        if self.H_star <= 0.0:
            raise DomainError(f"H_star must be positive, got {self.H_star}")

    @property
    def regime(self) -> Regime:
        if self.G > 0.0:
            return Regime.GPOS_DPOS if self.D > 0.0 else Regime.GPOS_D0
        return Regime.G0_DPOS if self.D > 0.0 else Regime.G0_D0


def _meta_text(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, enum.Enum):
        return str(value.value)
    return str(value)


@dataclass
class Profile:
    """Sampled profile (xi, H, Gamma) with one-sided derivatives at kinks.

    A kink is stored as two rows with the same xi, flagged ``kink_left`` and
    ``kink_right``, carrying the left and right limits respectively.
    """

    xi: np.ndarray
    H: np.ndarray
    Gamma: np.ndarray
    dH: np.ndarray
    dGamma: np.ndarray
    flags: list[str]
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("xi", "H", "Gamma", "dH", "dGamma"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.flags = list(self.flags)
        self.meta = {str(k): _meta_text(v) for k, v in self.meta.items()}

    def __len__(self):
        return self.xi.size

    @property
    def kink_locations(self) -> list[float]:
        return [float(self.xi[i]) for i, f in enumerate(self.flags) if f == FLAG_KINK_LEFT]

    def pieces(self) -> list[slice]:
        """Index ranges of the smooth pieces between stored kinks."""
        cuts = [i + 1 for i, f in enumerate(self.flags) if f == FLAG_KINK_LEFT]
        bounds = [0, *cuts, len(self)]
        return [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]

    def validate(self):
        n = self.xi.size
        arrays = {"xi": self.xi, "H": self.H, "Gamma": self.Gamma, "dH": self.dH, "dGamma": self.dGamma}
        for name, arr in arrays.items():
            if arr.shape != (n,):
                raise InvariantError("shape", f"{name} has shape {arr.shape}, expected ({n},)")
        if len(self.flags) != n:
            raise InvariantError("shape", "flags length differs from xi")
        if n < 2:
            raise InvariantError("size", "a profile needs at least two samples")
        for name, arr in arrays.items():
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise InvariantError("finite", f"{name}[{bad[0]}] is not finite")
        unknown = [f for f in self.flags if f not in FLAGS]
        if unknown:
            raise InvariantError("flag", f"unknown flag {unknown[0]!r}")
        steps = np.diff(self.xi)
        for i in np.flatnonzero(steps <= 0.0):
            if steps[i] < 0.0:
                raise InvariantError("xi_increasing", f"xi decreases at row {i + 1}")
            if not (self.flags[i] == FLAG_KINK_LEFT and self.flags[i + 1] == FLAG_KINK_RIGHT):
                raise InvariantError("xi_increasing", f"duplicate xi={self.xi[i]} is not a kink pair")
        for i, f in enumerate(self.flags):
            if f == FLAG_KINK_LEFT and (i + 1 >= n or self.flags[i + 1] != FLAG_KINK_RIGHT
                                        or self.xi[i + 1] != self.xi[i]):
                raise InvariantError("kink_pair", f"kink_left at row {i} lacks a matching kink_right")
            if f == FLAG_KINK_RIGHT and (i == 0 or self.flags[i - 1] != FLAG_KINK_LEFT):
                raise InvariantError("kink_pair", f"kink_right at row {i} lacks a preceding kink_left")
        bad = np.flatnonzero(self.H <= 0.0)
        if bad.size:
            raise InvariantError("H_positive", f"H[{bad[0]}] = {self.H[bad[0]]} is not positive")
        bad = np.flatnonzero((self.Gamma < 0.0) | (self.Gamma >= 1.0))
        if bad.size:
            raise InvariantError("Gamma_range", f"Gamma[{bad[0]}] = {self.Gamma[bad[0]]} is outside [0, 1)")
        bad = np.flatnonzero(np.diff(self.Gamma) > 0.0)
        if bad.size:
            raise InvariantError("Gamma_nonincreasing", f"Gamma increases at row {bad[0] + 1}")
        return self

    def equals(self, other: "Profile") -> bool:
        return (
            all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("xi", "H", "Gamma", "dH", "dGamma"))
            and self.flags == other.flags
            and self.meta == other.meta
        )


def constant_profile(H_star: float, xi_min: float = -30.0, xi_max: float = 30.0, samples: int = 601) -> Profile:
    """The trivial solution (H, Gamma) = (H*, 0)."""
    xi = np.linspace(xi_min, xi_max, samples)
    zeros = np.zeros_like(xi)
    return Profile(xi, np.full_like(xi, H_star), zeros, zeros.copy(), zeros.copy(),
                   [FLAG_SMOOTH] * samples, {"anchor": "none (constant state)"})
