"""Surface-tension isotherms sigma(gamma) and the derived quantity rho = -1/sigma'.

Four families are supported:

* ``linear``       sigma0 * (1 - gamma)
* ``sheludko``     sigma0 * beta * (((1 + theta) / (1 + theta * gamma))**3 - 1)
* ``szyszkowski``  sigma0 + a * log(1 - gamma)
* ``frumkin``      sigma0 + a * log(1 - gamma) + b * gamma**2   (b < 2a)

Only the logarithmic families blow up at gamma = 1, which is what the
traveling-wave construction relies on; the bounded-derivative families are
kept for comparison and are reported as non-compliant.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ComplianceError, DomainError


class IsothermKind(str, enum.Enum):
    LINEAR = "linear"
    SHELUDKO = "sheludko"
    SZYSZKOWSKI = "szyszkowski"
    FRUMKIN = "frumkin"


_SPEC_ARITY = {
    IsothermKind.LINEAR: ("sigma0",),
    IsothermKind.SHELUDKO: ("sigma0", "beta"),
    IsothermKind.SZYSZKOWSKI: ("sigma0", "a"),
    IsothermKind.FRUMKIN: ("sigma0", "a", "b"),
}


@dataclass(frozen=True)
class ComplianceReport:
    satisfies_i3: bool
    satisfies_assumrho: bool
    notes: str = ""

    @property
    def compliant(self) -> bool:
        return self.satisfies_i3 and self.satisfies_assumrho


def _check_gamma(gamma, upper_closed=False):
    g = np.asarray(gamma, dtype=float)
    bad = ~np.isfinite(g) | (g < 0.0) | ((g > 1.0) if upper_closed else (g >= 1.0))
    if np.any(bad):
        interval = "[0, 1]" if upper_closed else "[0, 1)"
        raise DomainError(f"gamma must lie in {interval}, got {gamma!r}")
    return g


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


@dataclass(frozen=True)
class SurfaceTension:
    """Immutable isotherm with exact first and second derivatives.

    Evaluation methods accept scalars or numpy arrays. The ``*_raw`` variants
    skip domain checks and are what the ODE right-hand sides call; they are
    plain arithmetic so they stay cheap on Python floats.
    """

    kind: IsothermKind
    sigma0: float
    a: float = 0.0
    b: float = 0.0
    beta: float = 1.0
    theta: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", IsothermKind(self.kind))
        for name in ("sigma0", "a", "b", "beta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.sigma0 <= 0.0:
            raise DomainError("sigma0 must be positive")
        if self.kind in (IsothermKind.SZYSZKOWSKI, IsothermKind.FRUMKIN) and self.a <= 0.0:
            raise DomainError("a must be positive")
        if self.kind is IsothermKind.FRUMKIN:
            if self.b < 0.0:
                raise DomainError("b must be non-negative")
            if not self.b < 2.0 * self.a:
                raise DomainError(f"Frumkin isotherm requires b < 2a (got a={self.a}, b={self.b})")
        if self.kind is IsothermKind.SHELUDKO and self.beta <= 0.0:
            raise DomainError("beta must be positive")
        theta = ((self.beta + 1.0) / self.beta) ** (1.0 / 3.0) - 1.0
        object.__setattr__(self, "theta", theta)

    # -- constructors -----------------------------------------------------

    @classmethod
    def linear(cls, sigma0=1.0):
        return cls(IsothermKind.LINEAR, sigma0)

    @classmethod
    def sheludko(cls, sigma0=1.0, beta=1.0):
        return cls(IsothermKind.SHELUDKO, sigma0, beta=beta)

    @classmethod
    def szyszkowski(cls, sigma0=1.0, a=1.0):
        return cls(IsothermKind.SZYSZKOWSKI, sigma0, a=a)

    @classmethod
    def frumkin(cls, sigma0=1.0, a=1.0, b=0.0):
        return cls(IsothermKind.FRUMKIN, sigma0, a=a, b=b)

    @property
    def spec(self) -> str:
        """CLI spec string, e.g. ``szyszkowski:1.0:1.0``."""
        values = [repr(getattr(self, name)) for name in _SPEC_ARITY[self.kind]]
        return ":".join([self.kind.value, *values])

    # -- raw formulas (no domain checks) ----------------------------------

    def sigma_raw(self, g):
        k = self.kind
        if k is IsothermKind.LINEAR:
            return self.sigma0 * (1.0 - g)
        if k is IsothermKind.SHELUDKO:
            t = self.theta
            return self.sigma0 * self.beta * (((1.0 + t) / (1.0 + t * g)) ** 3 - 1.0)
        log_term = self.a * np.log1p(-np.asarray(g, dtype=float))
        if k is IsothermKind.SZYSZKOWSKI:
            return self.sigma0 + log_term
        return self.sigma0 + log_term + self.b * g * g

    def dsigma_raw(self, g):
        k = self.kind
        if k is IsothermKind.LINEAR:
            return -self.sigma0 + 0.0 * g
        if k is IsothermKind.SHELUDKO:
            t = self.theta
            return -3.0 * self.sigma0 * self.beta * t * (1.0 + t) ** 3 / (1.0 + t * g) ** 4
        if k is IsothermKind.SZYSZKOWSKI:
            return -self.a / (1.0 - g)
        return -self.a / (1.0 - g) + 2.0 * self.b * g

    def d2sigma_raw(self, g):
        k = self.kind
        if k is IsothermKind.LINEAR:
            return 0.0 * g
        if k is IsothermKind.SHELUDKO:
            t = self.theta
            return 12.0 * self.sigma0 * self.beta * t * t * (1.0 + t) ** 3 / (1.0 + t * g) ** 5
        if k is IsothermKind.SZYSZKOWSKI:
            return -self.a / ((1.0 - g) * (1.0 - g))
        return -self.a / ((1.0 - g) * (1.0 - g)) + 2.0 * self.b

    def rho_raw(self, g):
        k = self.kind
        if k is IsothermKind.LINEAR:
            return 1.0 / self.sigma0 + 0.0 * g
        if k is IsothermKind.SHELUDKO:
            t = self.theta
            return (1.0 + t * g) ** 4 / (3.0 * self.sigma0 * self.beta * t * (1.0 + t) ** 3)
        if k is IsothermKind.SZYSZKOWSKI:
            return (1.0 - g) / self.a
        w = 1.0 - g
        return w / (self.a - 2.0 * self.b * g * w)

    def rho_complement(self, w):
        """rho(1 - w), accurate when w = 1 - gamma is tiny."""
        k = self.kind
        if k is IsothermKind.LINEAR:
            return 1.0 / self.sigma0 + 0.0 * w
        if k is IsothermKind.SHELUDKO:
            t = self.theta
            return (1.0 + t - t * w) ** 4 / (3.0 * self.sigma0 * self.beta * t * (1.0 + t) ** 3)
        if k is IsothermKind.SZYSZKOWSKI:
            return w / self.a
        return w / (self.a - 2.0 * self.b * w * (1.0 - w))

    def dsigma_complement(self, w):
        """sigma'(1 - w), accurate when w = 1 - gamma is tiny."""
        k = self.kind
        if k is IsothermKind.LINEAR:
            return -self.sigma0 + 0.0 * w
        if k is IsothermKind.SHELUDKO:
            t = self.theta
            return -3.0 * self.sigma0 * self.beta * t * (1.0 + t) ** 3 / (1.0 + t - t * w) ** 4
        if k is IsothermKind.SZYSZKOWSKI:
            return -self.a / w
        return -self.a / w + 2.0 * self.b * (1.0 - w)

    # -- checked evaluation ------------------------------------------------

    def sigma(self, gamma):
        g = _check_gamma(gamma)
        return _out(self.sigma_raw(g), gamma)

    def dsigma(self, gamma):
        g = _check_gamma(gamma)
        return _out(self.dsigma_raw(g), gamma)

    def d2sigma(self, gamma):
        g = _check_gamma(gamma)
        return _out(self.d2sigma_raw(g), gamma)

    def rho(self, gamma):
        """-1/sigma'(gamma) on [0, 1); at gamma = 1 the continuous extension."""
        g = _check_gamma(gamma, upper_closed=True)
        if np.any(g == 1.0) and not self.compliance().satisfies_i3:
            raise ComplianceError(f"{self.kind.value}: rho(1) is only defined (as 0) for compliant isotherms")
        return _out(self.rho_raw(g), gamma)

    # -- inverse ------------------------------------------------------------

    def inverse(self, s):
        """gamma in [0, 1) with sigma(gamma) = s, for s <= sigma0."""
        self.require_compliant()
        s_arr = np.asarray(s, dtype=float)
        if np.any(~np.isfinite(s_arr)) or np.any(s_arr > self.sigma0):
            raise DomainError(f"sigma_inverse needs s <= sigma0 = {self.sigma0}, got {s!r}")
        if self.kind is IsothermKind.SZYSZKOWSKI:
            out = -np.expm1((s_arr - self.sigma0) / self.a)
        else:
            out = np.vectorize(self._inverse_bisect, otypes=[float])(s_arr)
        out = np.minimum(out, np.nextafter(1.0, 0.0))
        return _out(out, s)

    def _inverse_bisect(self, s):
        # work in t = log(1 - gamma) so the bracket resolves gamma near 1
        def residual(t):
            return self.sigma_raw(-math.expm1(t)) - s

        if residual(0.0) <= 0.0:
            return 0.0
        lo = -1.0
        while residual(lo) > 0.0:
            lo *= 2.0
            if lo < -1e4:
                return np.nextafter(1.0, 0.0)
        hi = 0.0
        # residual(lo) <= 0 < residual(hi): sigma increases with t
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if residual(mid) > 0.0:
                hi = mid
            else:
                lo = mid
        t = lo if abs(residual(lo)) <= abs(residual(hi)) else hi
        return -math.expm1(t)

    # -- hypotheses --------------------------------------------------------

    def compliance(self) -> ComplianceReport:
        if self.kind in (IsothermKind.LINEAR, IsothermKind.SHELUDKO):
            return ComplianceReport(
                False, True,
                f"{self.kind.value}: sigma' is bounded on [0,1), so sigma' is integrable and "
                "sigma does not map [0,1) onto (-inf, sigma0]",
            )
        return ComplianceReport(True, True, f"{self.kind.value}: logarithmic singularity at gamma=1")

    def require_compliant(self):
        report = self.compliance()
        if not report.compliant:
            raise ComplianceError(report.notes)

    def rho_sup(self) -> float:
        """R_rho, the supremum of rho over [0, 1]."""
        if self.kind is IsothermKind.SZYSZKOWSKI:
            return 1.0 / self.a
        grid = np.linspace(0.0, 1.0, 10001)
        values = self.rho_raw(grid)
        i = int(np.argmax(values))
        best = float(values[i])
        if 0 < i < len(grid) - 1:
            res = minimize_scalar(lambda g: -self.rho_raw(g), bounds=(grid[i - 1], grid[i + 1]),
                                  method="bounded", options={"xatol": 1e-12})
            best = max(best, -float(res.fun))
        return best


def parse_model_spec(text: str) -> SurfaceTension:
    """Parse ``linear:s0``, ``sheludko:s0:beta``, ``szyszkowski:s0:a``, ``frumkin:s0:a:b``."""
    parts = text.strip().split(":")
    try:
        kind = IsothermKind(parts[0].lower())
    except ValueError:
        raise DomainError(f"unknown isotherm {parts[0]!r}") from None
    names = _SPEC_ARITY[kind]
    if len(parts) - 1 != len(names):
        raise DomainError(f"{kind.value} expects {len(names)} parameter(s): {':'.join(names)}")
    try:
        values = {name: float(p) for name, p in zip(names, parts[1:])}
    except ValueError:
        raise DomainError(f"malformed number in model spec {text!r}") from None
    return SurfaceTension(kind, **values)


# Functional aliases matching the operation names used elsewhere.

def sigma_eval(model: SurfaceTension, gamma):
    return model.sigma(gamma)


def sigma_prime(model: SurfaceTension, gamma):
    return model.dsigma(gamma)


def rho_eval(model: SurfaceTension, gamma):
    return model.rho(gamma)


def sigma_inverse(model: SurfaceTension, s):
    return model.inverse(s)


def check_compliance(model: SurfaceTension) -> ComplianceReport:
    """Analytic classification plus a sampled strict-decrease sanity check."""
    report = model.compliance()
    grid = np.linspace(0.0, 1.0, 10001)[:-1]
    values = model.sigma_raw(grid)
    if not np.all(np.diff(values) < 0.0):
        return ComplianceReport(False, False, report.notes + "; sampled sigma is not strictly decreasing")
    return report
