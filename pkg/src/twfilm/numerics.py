"""Numerical kernels: embedded Runge-Kutta integration with events, bisection, quadrature."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Continuous extension of order 4 (Shampine): y(x0 + s h) = y0 + h K^T P [s, s^2, s^3, s^4].
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


class Direction(enum.IntEnum):
    ANY = 0
    RISING = 1
    FALLING = -1


@dataclass(frozen=True)
class EventSpec:
    """Scalar event g(xi, state) = 0.

    ``direction`` is judged along the integration: RISING fires when g goes
    from negative to non-negative as the integrator advances (for backward
    integration that means with decreasing xi). A start exactly on g = 0 does
    not count as a crossing.
    """

    id: int
    function: Callable[[float, np.ndarray], float]
    direction: Direction = Direction.ANY


class TerminationKind(str, enum.Enum):
    EVENT = "event"
    SPAN_EXHAUSTED = "span_exhausted"
    STEP_UNDERFLOW = "step_underflow"
    STATE_INVALID = "state_invalid"


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    xi: float
    event_id: int | None = None

    def __str__(self):
        if self.kind is TerminationKind.EVENT:
            return f"event {self.event_id} at xi={self.xi:.12g}"
        return f"{self.kind.value} at xi={self.xi:.12g}"


@dataclass
class OrbitTrace:
    """Accepted integration points plus the dense interpolant between them."""

    xi: np.ndarray
    states: np.ndarray
    termination: Termination
    direction: int
    _segments: list = field(default_factory=list, repr=False)

    @property
    def final(self):
        return self.xi[-1], self.states[-1]

    def evaluate(self, xi):
        """Dense-output state(s) at xi (scalar or array inside the traced range)."""
        xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
        lo, hi = min(self.xi[0], self.xi[-1]), max(self.xi[0], self.xi[-1])
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(xi_arr < lo - tol) or np.any(xi_arr > hi + tol):
            raise DomainError(f"xi outside traced range [{lo}, {hi}]")
        out = np.empty((xi_arr.size, self.states.shape[1]))
        if not self._segments:
            out[:] = self.states[0]
            return out[0] if np.ndim(xi) == 0 else out
        # segment k spans between self.xi[k] and self.xi[k + 1]
        order = self.direction * xi_arr
        keys = self.direction * self.xi[:-1]
        idx = np.clip(np.searchsorted(keys, order, side="right") - 1, 0, len(self._segments) - 1)
        for k in np.unique(idx):
            mask = idx == k
            x0, h, y0, Q = self._segments[k]
            s = (xi_arr[mask] - x0) / h
            powers = np.vstack([s, s * s, s ** 3, s ** 4])
            out[mask] = y0 + h * (Q @ powers).T
        return out[0] if np.ndim(xi) == 0 else out


def _rms_norm(x):
    return math.sqrt(float(np.dot(x, x)) / x.size)


def _initial_step(field_fn, x0, y0, f0, direction, rtol, atol, max_step):
    scale = atol + np.abs(y0) * rtol
    d0 = _rms_norm(y0 / scale)
    d1 = _rms_norm(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    y1 = y0 + direction * h0 * f0
    f1 = np.asarray(field_fn(x0 + direction * h0, y1), dtype=float)
    if not np.all(np.isfinite(f1)):
        return h0 * 1e-3
    d2 = _rms_norm((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, max_step)


def _crossed(g_old, g_new, direction):
    if direction >= 0 and g_old < 0.0 <= g_new:
        return True
    if direction <= 0 and g_old > 0.0 >= g_new:
        return True
    return False


def integrate_adaptive(
    field_fn: Callable[[float, np.ndarray], Sequence[float]],
    initial: tuple[float, Sequence[float]],
    span: float,
    events: Sequence[EventSpec] = (),
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    first_step: float | None = None,
    max_step: float = math.inf,
    max_steps: int = 1_000_000,
) -> OrbitTrace:
    """Integrate y' = field(xi, y) from ``initial`` over the signed ``span``.

    Dormand-Prince 5(4) with a PI step controller. Events are checked at step
    ends; a sign change is refined by bisection on the dense output to
    1e-12 * max(1, |xi|) and terminates the trace.
    """
    if not (0.0 < rel_tol <= 1e-2 and 0.0 < abs_tol <= 1e-2):
        raise DomainError("rel_tol and abs_tol must lie in (0, 1e-2]")
    x0 = float(initial[0])
    y = np.array(initial[1], dtype=float).ravel()
    direction = 1 if span >= 0 else -1
    x_end = x0 + span
    n = y.size

    xs = [x0]
    ys = [y.copy()]
    segments = []

    def finish(kind, xi, event_id=None):
        return OrbitTrace(np.array(xs), np.array(ys), Termination(kind, xi, event_id), direction, segments)

    if not np.all(np.isfinite(y)):
        return finish(TerminationKind.STATE_INVALID, x0)
    f = np.asarray(field_fn(x0, y), dtype=float)
    if not np.all(np.isfinite(f)):
        return finish(TerminationKind.STATE_INVALID, x0)
    if span == 0.0:
        return finish(TerminationKind.SPAN_EXHAUSTED, x0)

    g_old = [float(ev.function(x0, y)) for ev in events]
    h = first_step if first_step is not None else _initial_step(
        field_fn, x0, y, f, direction, rel_tol, abs_tol, max_step)
    h = min(abs(h), max_step, abs(span))
    K = np.empty((7, n))
    err_prev = 1e-4
    x = x0
    last_reject_invalid = False

    for _ in range(max_steps):
        h_min = 1e-14 * max(1.0, abs(x))
        if h < h_min:
            kind = TerminationKind.STATE_INVALID if last_reject_invalid else TerminationKind.STEP_UNDERFLOW
            return finish(kind, x)
        remaining = abs(x_end - x)
        last = h >= remaining
        if last:
            h = remaining
        hs = direction * h
        K[0] = f
        valid = True
        for i in range(1, 6):
            yi = y + hs * (_A[i] @ K[:i])
            ki = np.asarray(field_fn(x + _C[i] * hs, yi), dtype=float)
            if not np.all(np.isfinite(ki)):
                valid = False
                break
            K[i] = ki
        if valid:
            y_new = y + hs * (_B @ K[:6])
            x_new = x_end if last else x + hs
            f_new = np.asarray(field_fn(x_new, y_new), dtype=float)
            valid = bool(np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new)))
        if not valid:
            last_reject_invalid = True
            h *= 0.25
            continue
        K[6] = f_new
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms_norm(hs * (_E @ K) / scale)
        if err > 1.0:
            last_reject_invalid = False
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-1 / 5))
            continue
        last_reject_invalid = False
        Q = K.T @ _P
        segment = (x, hs, y.copy(), Q)
        segments.append(segment)

        hit = None
        g_new = [float(ev.function(x_new, y_new)) for ev in events]
        for ev, go, gn in zip(events, g_old, g_new):
            if _crossed(go, gn, ev.direction):
                xe = _locate_event(ev, segment, go)
                if hit is None or direction * (xe - hit[1]) < 0:
                    hit = (ev.id, xe)
        if hit is not None:
            ye = _eval_segment(segment, hit[1])
            xs.append(hit[1])
            ys.append(ye)
            return finish(TerminationKind.EVENT, hit[1], hit[0])

        xs.append(x_new)
        ys.append(y_new.copy())
        x, y, f, g_old = x_new, y_new, f_new, g_new
        if last:
            return finish(TerminationKind.SPAN_EXHAUSTED, x)
        factor = _SAFETY * max(err, 1e-10) ** (-_ALPHA) * err_prev ** _BETA
        err_prev = max(err, 1e-4)
        h = min(h * min(_MAX_FACTOR, max(_MIN_FACTOR, factor)), max_step)
    raise ConvergenceError(f"integrate_adaptive exceeded {max_steps} steps")


def _eval_segment(segment, xi):
    x0, h, y0, Q = segment
    s = (xi - x0) / h
    return y0 + h * (Q @ np.array([s, s * s, s ** 3, s ** 4]))


def _locate_event(ev, segment, g_start):
    x0, h, _, _ = segment
    lo, hi = 0.0, 1.0
    sign_lo = g_start > 0.0
    while True:
        tol = 1e-12 * max(1.0, abs(x0 + hi * h))
        if abs((hi - lo) * h) <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        xm = x0 + mid * h
        gm = float(ev.function(xm, _eval_segment(segment, xm)))
        if (gm > 0.0) == sign_lo and gm != 0.0:
            lo = mid
        else:
            hi = mid
    return x0 + hi * h


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12, max_iter: int = 2000) -> float:
    """Root of f in [lo, hi] to bracket width ``tol``; requires a sign change."""
    if not lo < hi:
        raise DomainError("bisect needs lo < hi")
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0.0) == (f_hi > 0.0):
        raise ConvergenceError(f"no sign change on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quad_adaptive(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10, max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature of f over [a, b].

    The interval is first mapped through the quintic smoothstep
    x = a + (b - a) s(t), s(t) = 10t^3 - 15t^4 + 6t^5, whose Jacobian vanishes
    to second order at both ends. Integrable endpoint singularities such as
    log(x) or x^(-1/2) become removable, so f is never evaluated at a or b.
    A non-integrable singularity exhausts the recursion depth and raises.
    """
    if not a < b:
        raise DomainError("quad_adaptive needs a < b")
    width = b - a

    def g(t):
        if t <= 0.0 or t >= 1.0:
            return 0.0
        u = 1.0 - t
        jac = 30.0 * t * t * u * u * width
        if t <= 0.5:
            x = a + width * t ** 3 * (10.0 - 15.0 * t + 6.0 * t * t)
        else:
            x = b - width * u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)
        return f(x) * jac

    eps = np.finfo(float).eps

    def simpson(l, r, fl, fm, fr):
        return (r - l) / 6.0 * (fl + 4.0 * fm + fr)

    def recurse(l, r, fl, fm, fr, whole, tol_local, depth):
        m = 0.5 * (l + r)
        lm, rm = 0.5 * (l + m), 0.5 * (m + r)
        flm, frm = g(lm), g(rm)
        left = simpson(l, m, fl, flm, fm)
        right = simpson(m, r, fm, frm, fr)
        delta = left + right - whole
        if not math.isfinite(delta):
            raise ConvergenceError(f"non-finite integrand near x={a + width * m}")
        if abs(delta) <= 15.0 * tol_local or abs(delta) <= 64.0 * eps * abs(left + right):
            return left + right + delta / 15.0
        if depth >= max_depth:
            raise ConvergenceError("quadrature recursion depth exhausted (non-integrable singularity?)")
        return (recurse(l, m, fl, flm, fm, left, 0.5 * tol_local, depth + 1)
                + recurse(m, r, fm, frm, fr, right, 0.5 * tol_local, depth + 1))

    f0, fm, f1 = g(0.0), g(0.5), g(1.0)
    return recurse(0.0, 1.0, f0, fm, f1, simpson(0.0, 1.0, f0, fm, f1), tol, 0)
