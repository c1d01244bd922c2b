"""Profiles for the three regimes with (semi-)explicit solutions.

* G = 0, D = 0: piecewise closed form, H jumps from 2H* to H* at xi = 0.
* G = 0, D > 0: H is an algebraic function of Gamma, and xi(Gamma) is an
  explicit integral that is inverted numerically.
* G > 0, D = 0: closed form for xi < 0, a scalar relaxation ODE for H on xi > 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from . import __version__
from .errors import DomainError
from .numerics import Direction, EventSpec, OrbitTrace, TerminationKind, integrate_adaptive, quad_adaptive
from .profile import FLAG_KINK_LEFT, FLAG_KINK_RIGHT, FLAG_SMOOTH, Profile, Regime, RegimeParams
from .surface_tension import SurfaceTension

_GL_X, _GL_W = leggauss(16)
_ONE_MINUS = np.nextafter(1.0, 0.0)


def base_meta(model: SurfaceTension, params: RegimeParams, **extra) -> dict:
    meta = {
        "model": model.spec,
        "G": params.G,
        "D": params.D,
        "H_star": params.H_star,
        "regime": params.regime.value,
        "tool_version": __version__,
    }
    meta.update(extra)
    return meta


def _require_regime(params: RegimeParams, regime: Regime):
    if params.regime is not regime:
        raise DomainError(f"expected regime {regime.value}, got {params.regime.value}")


def _grid(xi_min, xi_max, samples):
    if not xi_min < xi_max:
        raise DomainError("xi_min must be smaller than xi_max")
    if samples < 5:
        raise DomainError("need at least 5 samples")
    return np.linspace(xi_min, xi_max, samples)


def _split_at_zero(xi):
    left = xi[xi < 0.0]
    right = xi[xi > 0.0]
    return left, right


def _with_kink(xi_left, left_cols, kink_left, kink_right, xi_right, right_cols):
    """Concatenate left piece, a kink pair at xi = 0, and the right piece."""
    n_left, n_right = xi_left.size, xi_right.size
    xi = np.concatenate([xi_left, [0.0, 0.0], xi_right])
    cols = [np.concatenate([l, [kl, kr], r]) for l, kl, kr, r in zip(left_cols, kink_left, kink_right, right_cols)]
    flags = [FLAG_SMOOTH] * n_left + [FLAG_KINK_LEFT, FLAG_KINK_RIGHT] + [FLAG_SMOOTH] * n_right
    return xi, cols, flags


def _left_front(model: SurfaceTension, H_star: float, xi):
    """Gamma = sigma^{-1}(sigma0 + xi / (2H*)) and its derivative, for xi <= 0."""
    gamma = np.asarray(model.inverse(model.sigma0 + xi / (2.0 * H_star)), dtype=float)
    dgamma = 1.0 / (2.0 * H_star * model.dsigma_raw(gamma))
    return gamma, dgamma


def solve_G0_D0(model: SurfaceTension, params: RegimeParams, xi_min=-40.0, xi_max=40.0, samples=4001) -> Profile:
    """Closed-form front without gravity and diffusion, kink anchored at xi = 0."""
    _require_regime(params, Regime.G0_D0)
    model.require_compliant()
    if not xi_min < 0.0 < xi_max:
        raise DomainError("need xi_min < 0 < xi_max")
    Hs = params.H_star
    xl, xr = _split_at_zero(_grid(xi_min, xi_max, samples))
    gl, dgl = _left_front(model, Hs, xl)
    g0, dg0 = _left_front(model, Hs, np.array([0.0]))
    xi, (H, Gamma, dH, dGamma), flags = _with_kink(
        xl, [np.full_like(xl, 2 * Hs), gl, np.zeros_like(xl), dgl],
        [2 * Hs, g0[0], 0.0, dg0[0]], [Hs, 0.0, 0.0, 0.0],
        xr, [np.full_like(xr, Hs), np.zeros_like(xr), np.zeros_like(xr), np.zeros_like(xr)],
    )
    meta = base_meta(model, params, anchor="kink at xi=0 (Gamma vanishes for xi>=0)")
    return Profile(xi, H, Gamma, dH, dGamma, flags, meta).validate()


# -- G = 0, D > 0 ---------------------------------------------------------------


def height_from_gamma(model: SurfaceTension, params: RegimeParams, gamma):
    """Unique positive root H of the quadratic height relation, H* < H < 2H*.

    Written as H = H* - s H*^2 / (D + R), s = gamma sigma'(gamma),
    R = sqrt(D^2 + (s H*)^2), which is algebraically the same root but stays
    accurate when s -> 0.
    """
    if params.D <= 0.0:
        raise DomainError("height_from_gamma needs D > 0")
    g = np.asarray(gamma, dtype=float)
    if np.any(~np.isfinite(g)) or np.any(g < 0.0) or np.any(g >= 1.0):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    H = _height(model, params, g)
    return float(H) if np.ndim(gamma) == 0 else H


def _height(model, params, g):
    D, Hs = params.D, params.H_star
    s = g * model.dsigma_raw(g)
    R = np.hypot(D, s * Hs)
    return Hs - s * Hs * Hs / (D + R)


def _q(model, params, g):
    """q = s H* - sqrt(D^2 + (s H*)^2); Gamma'/Gamma = 1/q along the profile."""
    s = g * model.dsigma_raw(g) * params.H_star
    return s - np.hypot(params.D, s)


def _dxi_du(model, params, u):
    # lower branch, u = log(Gamma)
    return _q(model, params, np.exp(u))


def _dxi_dv(model, params, v):
    # upper branch, v = log(1 - Gamma)
    w = np.exp(v)
    g = -np.expm1(v)
    s = g * model.dsigma_complement(w) * params.H_star
    return -w * (s - np.hypot(params.D, s)) / g


def _gl_integral(fn, lo, hi):
    """16-point Gauss-Legendre integral of fn over [lo, hi] (arrays broadcast)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[..., None] + half[..., None] * _GL_X
    return half * (fn(pts) @ _GL_W)


@dataclass(frozen=True)
class _Branch:
    """Node table t_k -> xi_k for one side of the anchor (t = log Gamma or log(1 - Gamma))."""

    t: np.ndarray
    xi: np.ndarray


def _build_branch(deriv, t0, xi_target, step, t_floor, n_nodes, quad_tol):
    # march until the branch covers xi_target (or the float range ends)
    sign = math.copysign(1.0, xi_target) if xi_target != 0.0 else 1.0
    t_end, xi_end = t0, 0.0
    while t_end == t0 or (sign * xi_end < sign * xi_target and t_end > t_floor):
        t_next = max(t_end - step, t_floor)
        xi_end += float(_gl_integral(deriv, t_end, t_next))
        t_end = t_next
    t_nodes = np.linspace(t0, t_end, n_nodes + 1)
    xi_nodes = np.zeros_like(t_nodes)
    for k in range(n_nodes):
        lo, hi = t_nodes[k + 1], t_nodes[k]
        value, _ = integrate.quad(deriv, lo, hi, epsabs=quad_tol, epsrel=1e-14, limit=200)
        xi_nodes[k + 1] = xi_nodes[k] - value
    return _Branch(t_nodes, xi_nodes)


def _invert_branch(branch: _Branch, deriv, xi_targets):
    """t with xi(t) = target inside the branch's node range (Newton, bracket-safeguarded)."""
    sign = 1.0 if branch.xi[-1] >= 0.0 else -1.0
    k = np.searchsorted(sign * branch.xi, sign * xi_targets, side="right") - 1
    k = np.clip(k, 0, branch.t.size - 2)
    t_a, t_b = branch.t[k], branch.t[k + 1]
    x_a, x_b = branch.xi[k], branch.xi[k + 1]
    frac = np.clip((xi_targets - x_a) / (x_b - x_a), 0.0, 1.0)
    t = t_a + frac * (t_b - t_a)
    lo, hi = np.minimum(t_a, t_b), np.maximum(t_a, t_b)
    for _ in range(30):
        resid = x_a + _gl_integral(deriv, t_a, t) - xi_targets
        t_new = np.clip(t - resid / deriv(t), lo, hi)
        done = np.abs(t_new - t) <= 1e-15 * np.maximum(1.0, np.abs(t))
        t = t_new
        if np.all(done):
            break
    return t


def solve_G0_Dpos(model: SurfaceTension, params: RegimeParams, gamma_anchor=0.5, xi_min=-40.0, xi_max=40.0,
                  samples=4001, n_nodes=512, quad_tol=1e-13) -> Profile:
    """Smooth front without gravity: invert xi(Gamma) = int_{anchor}^{Gamma} q(z)/z dz.

    The node table is built by adaptive Gauss-Kronrod quadrature on a Gamma grid that is
    geometric toward both 0 and 1 (uniform in log Gamma and log(1 - Gamma)).
    Samples are placed by Newton iteration inside their node interval, so the
    profile is exact to quadrature accuracy rather than interpolation accuracy.
    """
    _require_regime(params, Regime.G0_DPOS)
    model.require_compliant()
    if not 0.0 < gamma_anchor < 1.0:
        raise DomainError("gamma_anchor must lie in (0, 1)")
    xi = _grid(xi_min, xi_max, samples)
    D = params.D

    def du(u):
        return _dxi_du(model, params, u)

    def dv(v):
        return _dxi_dv(model, params, v)

    half = max(n_nodes // 2, 1)
    lower = _build_branch(du, math.log(gamma_anchor), max(xi_max, 0.0), 1.0, -700.0, half, quad_tol)
    upper = _build_branch(dv, math.log1p(-gamma_anchor), min(xi_min, 0.0), 1.0, -36.0, half, quad_tol)

    Gamma = np.empty_like(xi)
    pos = xi > 0.0
    neg = xi < 0.0
    Gamma[xi == 0.0] = gamma_anchor

    x_pos = xi[pos]
    inside = x_pos <= lower.xi[-1]
    u = np.empty_like(x_pos)
    if np.any(inside):
        u[inside] = _invert_branch(lower, du, x_pos[inside])
    # beyond the node table Gamma < 1e-300 and q = -D to machine precision
    u[~inside] = lower.t[-1] - (x_pos[~inside] - lower.xi[-1]) / D
    Gamma[pos] = np.exp(u)

    x_neg = xi[neg]
    inside = x_neg >= upper.xi[-1]
    v = np.full_like(x_neg, upper.t[-1])
    if np.any(inside):
        v[inside] = _invert_branch(upper, dv, x_neg[inside])
    clamped = int(np.count_nonzero(~inside))
    Gamma[neg] = np.minimum(-np.expm1(v), _ONE_MINUS)

    Gamma = np.minimum.accumulate(Gamma)
    H = _height(model, params, Gamma)
    q = _q(model, params, Gamma)
    dGamma = Gamma / q
    s = Gamma * model.dsigma_raw(Gamma)
    R = np.hypot(D, s * params.H_star)
    dH_ds = -D * params.H_star ** 2 / (R * (D + R))
    dH = dH_ds * (model.dsigma_raw(Gamma) + Gamma * model.d2sigma_raw(Gamma)) * dGamma

    meta = base_meta(model, params, anchor=f"Gamma(0) = {gamma_anchor!r}", gamma_anchor=float(gamma_anchor),
                     quad_tol=float(quad_tol), n_nodes=n_nodes)
    if clamped:
        meta["gamma_clamped_samples"] = clamped
    return Profile(xi, H, Gamma, dH, dGamma, [FLAG_SMOOTH] * xi.size, meta).validate()


def xi_of_gamma(model: SurfaceTension, params: RegimeParams, gamma, gamma_anchor=0.5, tol=1e-12) -> float:
    """Direct adaptive quadrature of the implicit relation xi(Gamma) (reference route)."""
    Hs, D = params.H_star, params.D

    def F(z):
        s = z * float(model.dsigma_raw(z)) * Hs
        return (s - math.hypot(D, s)) / z

    if gamma == gamma_anchor:
        return 0.0
    if gamma < gamma_anchor:
        return -quad_adaptive(F, gamma, gamma_anchor, tol)
    return quad_adaptive(F, gamma_anchor, gamma, tol)


# -- G > 0, D = 0 ---------------------------------------------------------------


def solve_Gpos_D0(model: SurfaceTension, params: RegimeParams, xi_min=-40.0, xi_max=40.0, samples=4001,
                  rel_tol=1e-10, abs_tol=1e-14) -> Profile:
    """Front with gravity and no diffusion.

    For xi < 0 the film is flat at 2H* with the same surfactant front as the
    G = 0 case; for xi > 0 Gamma = 0 and H relaxes from 2H* to H* through
    H' = 3(H* - H) / (G H^3), integrated for the log of the deviation H - H*
    so that H > H* holds by construction.
    """
    _require_regime(params, Regime.GPOS_D0)
    model.require_compliant()
    if not xi_min < 0.0 < xi_max:
        raise DomainError("need xi_min < 0 < xi_max")
    G, Hs = params.G, params.H_star
    xl, xr = _split_at_zero(_grid(xi_min, xi_max, samples))
    gl, dgl = _left_front(model, Hs, xl)
    g0, dg0 = _left_front(model, Hs, np.array([0.0]))

    def tail(_, y):
        h = Hs + math.exp(y[0])
        return (-3.0 / (G * h * h * h),)

    trace = integrate_adaptive(tail, (0.0, [math.log(Hs)]), xi_max, rel_tol=rel_tol, abs_tol=abs_tol)
    if trace.termination.kind is not TerminationKind.SPAN_EXHAUSTED:
        raise DomainError(f"tail integration stopped early: {trace.termination}")
    dev = np.exp(trace.evaluate(xr)[:, 0]) if xr.size else np.zeros(0)
    Hr = Hs + dev
    dHr = -3.0 * dev / (G * Hr ** 3)
    dH0 = -3.0 * Hs / (G * (2 * Hs) ** 3)
    xi, (H, Gamma, dH, dGamma), flags = _with_kink(
        xl, [np.full_like(xl, 2 * Hs), gl, np.zeros_like(xl), dgl],
        [2 * Hs, g0[0], 0.0, dg0[0]], [2 * Hs, 0.0, dH0, 0.0],
        xr, [Hr, np.zeros_like(xr), dHr, np.zeros_like(xr)],
    )
    meta = base_meta(model, params, anchor="kink at xi=0 (Gamma vanishes for xi>=0)",
                     rel_tol=float(rel_tol), abs_tol=float(abs_tol))
    return Profile(xi, H, Gamma, dH, dGamma, flags, meta).validate()


# -- auxiliary system (G > 0, D = 0) --------------------------------------------------


class Course(str, enum.Enum):
    CASE_I = "CaseI"
    CASE_II = "CaseII"
    CASE_III = "CaseIII"


class AuxEvent(enum.IntEnum):
    H_VANISHES = 1
    H_CROSSES_2HSTAR = 2
    GAMMA_VANISHES = 3
    GAMMA_SATURATES = 4


@dataclass
class AuxiliaryOrbit:
    course: Course
    forward: OrbitTrace
    backward: OrbitTrace

    @property
    def xi_omega(self) -> float:
        return self.forward.termination.xi

    @property
    def xi_alpha(self) -> float:
        return -self.backward.termination.xi


def auxiliary_orbit(model: SurfaceTension, params: RegimeParams, H0: float, Gamma0: float, span: float = 1e3,
                    rel_tol=1e-10, abs_tol=1e-12, h_floor=1e-2, gamma_ceiling_gap=1e-9) -> AuxiliaryOrbit:
    """Integrate H^3 H' = 6(2H* - H)/G, H^2 sigma'(Gamma) Gamma' = 2(3H* - H) both ways from (H0, Gamma0).

    Terminal events: H falls to ``h_floor * H*``, H crosses 2H* (never expected
    off the constant solution), Gamma reaches 0, Gamma reaches 1 - gap.
    """
    if params.G <= 0.0:
        raise DomainError("auxiliary_orbit needs G > 0")
    model.require_compliant()
    if H0 <= 0.0 or not 0.0 < Gamma0 < 1.0:
        raise DomainError("need H0 > 0 and Gamma0 in (0, 1)")
    G, Hs = params.G, params.H_star
    rho = model.rho_raw

    def field_fn(_, y):
        H, g = y[0], y[1]
        return (6.0 * (2.0 * Hs - H) / (G * H ** 3), -2.0 * (3.0 * Hs - H) * rho(g) / (H * H))

    if abs(H0 - 2.0 * Hs) <= 1e-12 * max(1.0, Hs):
        course = Course.CASE_I
        H0 = 2.0 * Hs
    elif H0 < 2.0 * Hs:
        course = Course.CASE_II
    else:
        course = Course.CASE_III

    events = [
        EventSpec(AuxEvent.H_VANISHES, lambda x, y: y[0] - h_floor * Hs, Direction.FALLING),
        EventSpec(AuxEvent.GAMMA_VANISHES, lambda x, y: y[1], Direction.FALLING),
        EventSpec(AuxEvent.GAMMA_SATURATES, lambda x, y: y[1] - (1.0 - gamma_ceiling_gap), Direction.RISING),
    ]
    if course is not Course.CASE_I:
        events.append(EventSpec(AuxEvent.H_CROSSES_2HSTAR, lambda x, y: y[0] - 2.0 * Hs))
    fwd = integrate_adaptive(field_fn, (0.0, [H0, Gamma0]), span, events, rel_tol, abs_tol)
    bwd = integrate_adaptive(field_fn, (0.0, [H0, Gamma0]), -span, events, rel_tol, abs_tol)
    return AuxiliaryOrbit(course, fwd, bwd)


def monotone_interpolant(x, y):
    """Shape-preserving cubic (PCHIP) interpolant; shared with the verifier."""
    return PchipInterpolator(x, y, extrapolate=False)
