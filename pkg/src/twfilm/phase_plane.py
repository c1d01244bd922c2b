"""Vector field, nullcline geometry and quadrant decomposition for G > 0, D > 0.

The first-order system reads H' = f1(H, Gamma), Gamma' = f2(H, Gamma) on the
rectangle [H*, 2H*] x (0, 1), with critical points (2H*, 1) and (H*, 0).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, TwfilmError
from .numerics import bisect
from .profile import RegimeParams
from .surface_tension import SurfaceTension

GAMMA_BAR_GRID = 4096
FD_STEP_RHO = 1e-6


class Quadrant(str, enum.Enum):
    Q1 = "Q1"
    Q2 = "Q2"
    Q3 = "Q3"
    Q4 = "Q4"


class SelectionError(TwfilmError):
    """No grid point satisfies the splitting-point conditions."""


def _check_state(H, Gamma):
    H = np.asarray(H, dtype=float)
    Gamma = np.asarray(Gamma, dtype=float)
    if np.any(~(H > 0.0)) or np.any(~((Gamma > 0.0) & (Gamma < 1.0))):
        raise DomainError(f"need H > 0 and 0 < Gamma < 1, got H={H!r}, Gamma={Gamma!r}")
    return H, Gamma


def _scalar_or_array(value, *inputs):
    return float(value) if all(np.ndim(x) == 0 for x in inputs) else value


def _require_gd(params: RegimeParams):
    if params.G <= 0.0 or params.D <= 0.0:
        raise DomainError("the phase-plane system needs G > 0 and D > 0")


def f1(model: SurfaceTension, params: RegimeParams, H, Gamma):
    """H' of the first-order system."""
    _require_gd(params)
    h, g = _check_state(H, Gamma)
    G, D, Hs = params.G, params.D, params.H_star
    rho = model.rho_raw(g)
    num = 6.0 * g * h * (2.0 * Hs - h) - 12.0 * D * (h - Hs) * rho
    return _scalar_or_array(num / (G * h ** 3 * (g * h + 4.0 * D * rho)), H, Gamma)


def f2(model: SurfaceTension, params: RegimeParams, H, Gamma):
    """Gamma' of the first-order system."""
    _require_gd(params)
    h, g = _check_state(H, Gamma)
    D, Hs = params.D, params.H_star
    rho = model.rho_raw(g)
    return _scalar_or_array(2.0 * g * (h - 3.0 * Hs) * rho / (h * (g * h + 4.0 * D * rho)), H, Gamma)


def phi_eval(params: RegimeParams, H):
    """phi(H) = H(2H* - H) / (2D(H - H*)), decreasing from +inf to 0 on (H*, 2H*)."""
    if params.D <= 0.0:
        raise DomainError("phi needs D > 0")
    h = np.asarray(H, dtype=float)
    Hs = params.H_star
    if np.any(~((h > Hs) & (h < 2.0 * Hs))):
        raise DomainError(f"phi needs H* < H < 2H*, got {H!r}")
    return _scalar_or_array(h * (2.0 * Hs - h) / (2.0 * params.D * (h - Hs)), H)


def g_eval(model: SurfaceTension, Gamma):
    """rho(Gamma) / Gamma."""
    g = np.asarray(Gamma, dtype=float)
    if np.any(~((g > 0.0) & (g < 1.0))):
        raise DomainError(f"g needs 0 < Gamma < 1, got {Gamma!r}")
    return _scalar_or_array(model.rho_raw(g) / g, Gamma)


def critical_height(model: SurfaceTension, params: RegimeParams, Gamma: float, rel_tol: float = 1e-12) -> float:
    """The unique H_c in (H*, 2H*) with phi(H_c) = g(Gamma), i.e. f1(H_c, Gamma) = 0.

    Bisection runs on the cleared numerator H(2H* - H) - 2D(H - H*) g(Gamma),
    which has the same sign as phi - g but no pole at H*.
    """
    if params.D <= 0.0:
        raise DomainError("critical_height needs D > 0")
    gv = g_eval(model, Gamma)
    Hs, D = params.H_star, params.D

    def cleared(h):
        return h * (2.0 * Hs - h) - 2.0 * D * (h - Hs) * gv

    return bisect(cleared, Hs, 2.0 * Hs, tol=rel_tol * Hs)


def mu_lower_bound(model: SurfaceTension, params: RegimeParams, grid: int = GAMMA_BAR_GRID) -> float:
    """Positive lower bound of Gamma H + 4 D rho(Gamma) over [H*, 2H*] x [0, 1].

    The H-minimum sits at H = H*; over Gamma the grid minimum is polished by a
    bounded scalar minimisation inside the neighbouring cells.
    """
    model.require_compliant()
    Hs, D = params.H_star, params.D

    def k(gamma):
        return gamma * Hs + 4.0 * D * model.rho_raw(gamma)

    gam = np.linspace(0.0, 1.0, grid)
    vals = k(gam)
    i = int(np.argmin(vals))
    best = float(vals[i])
    lo, hi = gam[max(i - 1, 0)], gam[min(i + 1, grid - 1)]
    res = minimize_scalar(lambda x: float(k(x)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
    if res.success:
        best = min(best, float(res.fun))
    return best


@dataclass(frozen=True)
class PhaseGeometry:
    gamma_bar: float
    H_bar: float
    mu: float
    model: SurfaceTension
    params: RegimeParams

    @property
    def H_star(self) -> float:
        return self.params.H_star


def _gamma_bar_conditions(model: SurfaceTension, grid: int = GAMMA_BAR_GRID):
    """Grid candidates on (0, 1/2] with the three admissibility masks (a), (b), (c)."""
    full = np.arange(1, 2 * grid) / (2.0 * grid)  # (0, 1), candidates are the first `grid`
    gv = model.rho_raw(full) / full
    cand = full[:grid]
    # (a) strictly decreasing on the prefix (0, cand_i]
    steps_ok = np.diff(gv[:grid]) < 0.0
    first_bad = int(np.argmin(steps_ok)) if not steps_ok.all() else grid - 1
    cond_a = np.arange(grid) <= first_bad
    # (b) g(Gamma) < g(cand_i) for every sampled Gamma beyond cand_i
    suffix_max = np.maximum.accumulate(gv[::-1])[::-1]
    beyond = np.append(suffix_max[1:], -np.inf)[:grid]
    cond_b = beyond < gv[:grid]
    # (c) Gamma rho'(Gamma) - rho(Gamma) < 0 with a centred difference
    h = FD_STEP_RHO
    drho = (model.rho_raw(cand + h) - model.rho_raw(cand - h)) / (2.0 * h)
    cond_c = cand * drho - model.rho_raw(cand) < 0.0
    return cand, cond_a, cond_b, cond_c


def select_gamma_bar(model: SurfaceTension, params: RegimeParams, grid: int = GAMMA_BAR_GRID) -> PhaseGeometry:
    """Largest grid value gamma_bar <= 1/2 meeting the splitting-point conditions."""
    _require_gd(params)
    model.require_compliant()
    cand, a, b, c = _gamma_bar_conditions(model, grid)
    ok = np.flatnonzero(a & b & c)
    if ok.size == 0:
        failing = [name for name, mask in (("(a) g decreasing", a), ("(b) g separation", b),
                                           ("(c) rho derivative", c)) if not mask.any()]
        raise SelectionError("no admissible gamma_bar on the grid; failing: " + (", ".join(failing) or "joint"))
    gamma_bar = float(cand[ok[-1]])
    H_bar = critical_height(model, params, gamma_bar)
    return PhaseGeometry(gamma_bar, H_bar, mu_lower_bound(model, params), model, params)


def classify_quadrant(geometry: PhaseGeometry, H: float, Gamma: float) -> Quadrant:
    Hs = geometry.H_star
    if not (Hs <= H <= 2.0 * Hs and 0.0 < Gamma < 1.0):
        raise DomainError(f"({H}, {Gamma}) lies outside [H*, 2H*] x (0, 1)")
    low_h = H <= geometry.H_bar
    low_g = Gamma <= geometry.gamma_bar
    if low_h:
        return Quadrant.Q1 if low_g else Quadrant.Q2
    return Quadrant.Q4 if low_g else Quadrant.Q3


def critical_height_closed(model: SurfaceTension, params: RegimeParams, Gamma: float) -> float:
    """Positive root of H^2 + (2Dg - 2H*)H - 2Dg H* = 0 (reference for the bisection)."""
    gv = g_eval(model, Gamma)
    b = 2.0 * params.D * gv - 2.0 * params.H_star
    c = -2.0 * params.D * gv * params.H_star
    disc = math.sqrt(b * b - 4.0 * c)
    # stable form of the larger root
    return (disc - b) / 2.0 if b <= 0 else -2.0 * c / (b + disc)
