"""Heteroclinic orbit from (2H*, 1) to (H*, 0) for G > 0, D > 0 by backward shooting.

Trial ordinates gamma on the cross-section H = H_bar are integrated backward in
xi. Orbits that are too high fall out through H = H* ("left" family), orbits
that are too low leave through H = 2H* ("right" family); bisection between
the two families pins down the ordinate of the connecting orbit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ConvergenceError, DomainError
from .numerics import Direction, EventSpec, OrbitTrace, TerminationKind, integrate_adaptive
from .phase_plane import PhaseGeometry, f1, f2, select_gamma_bar
from .profile import FLAG_SMOOTH, Profile, RegimeParams
from .surface_tension import SurfaceTension

SCAN_POINTS = 64
_ONE_MINUS = float(np.nextafter(1.0, 0.0))


class NoCrossingType:
    """Sentinel: the forward course never crosses H = H_bar below gamma_bar."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NoCrossing"

    def __bool__(self):
        return False


NoCrossing = NoCrossingType()


class ExitSide(str, enum.Enum):
    LEFT = "left"    # backward orbit reaches H = H*: trial ordinate too high
    RIGHT = "right"  # backward orbit reaches H = 2H*: trial ordinate too low


class LeftCourse(str, enum.Enum):
    L2 = "L2"
    L3 = "L3"


def vector_field(model: SurfaceTension, params: RegimeParams, state):
    """(H', Gamma') at state = (H, Gamma)."""
    H, Gamma = state
    return f1(model, params, H, Gamma), f2(model, params, H, Gamma)


def _field_hg(model, params):
    """Fast float-only field in (H, Gamma) coordinates."""
    G, D, Hs = params.G, params.D, params.H_star
    rho = model.rho_raw

    def fn(_, y):
        H, g = float(y[0]), float(y[1])
        r = float(rho(g))
        den = g * H + 4.0 * D * r
        return ((6.0 * g * H * (2.0 * Hs - H) - 12.0 * D * (H - Hs) * r) / (G * H ** 3 * den),
                2.0 * g * (H - 3.0 * Hs) * r / (H * den))

    return fn


def _field_log_w(model, params):
    """Field in (H, v = log(1 - Gamma)), accurate and sign-preserving near Gamma = 1."""
    G, D, Hs = params.G, params.D, params.H_star
    rho_c = model.rho_complement

    def fn(_, y):
        H, v = float(y[0]), float(y[1])
        w = math.exp(v)
        g = -math.expm1(v)
        r = float(rho_c(w))
        den = g * H + 4.0 * D * r
        return ((6.0 * g * H * (2.0 * Hs - H) - 12.0 * D * (H - Hs) * r) / (G * H ** 3 * den),
                -2.0 * g * (H - 3.0 * Hs) * (r / w) / (H * den))

    return fn


def _field_log_excess(model, params):
    """Field in (z = log(H - H*), u = log Gamma); keeps H > H* and Gamma > 0 near the sink."""
    G, D, Hs = params.G, params.D, params.H_star
    rho = model.rho_raw

    def fn(_, y):
        e, g = math.exp(float(y[0])), math.exp(float(y[1]))
        H = Hs + e
        r = float(rho(g))
        den = g * H + 4.0 * D * r
        return ((6.0 * g * H * (2.0 * Hs - H) / e - 12.0 * D * r) / (G * H ** 3 * den),
                2.0 * (H - 3.0 * Hs) * r / (H * den))

    return fn


def _prepare(model, params, geometry):
    if params.G <= 0.0 or params.D <= 0.0:
        raise DomainError("shooting needs G > 0 and D > 0")
    model.require_compliant()
    return geometry if geometry is not None else select_gamma_bar(model, params)


# -- forward courses used to validate the bracket --------------------------------------


def crossing_ordinate_left(model: SurfaceTension, params: RegimeParams, geometry: PhaseGeometry | None,
                           Gamma0: float, span: float = 200.0, rel_tol=1e-10, abs_tol=1e-12):
    """Gamma where the forward orbit from (H*, Gamma0) crosses H = H_bar downward below gamma_bar."""
    geo = _prepare(model, params, geometry)
    if not 0.0 < Gamma0 < 1.0:
        raise DomainError("Gamma0 must lie in (0, 1)")
    fn = _field_hg(model, params)
    Hb, gb = geo.H_bar, geo.gamma_bar
    down = EventSpec("H_bar", lambda x, y: y[0] - Hb, Direction.FALLING)
    below = EventSpec("gamma_bar", lambda x, y: y[1] - gb, Direction.FALLING)
    x, y = 0.0, np.array([params.H_star, Gamma0])
    events = [down, below] if Gamma0 > gb else [down]
    while span - x > 0.0:
        trace = integrate_adaptive(fn, (x, y), span - x, events, rel_tol, abs_tol)
        term = trace.termination
        if term.kind is TerminationKind.SPAN_EXHAUSTED:
            return NoCrossing
        if term.kind is not TerminationKind.EVENT:
            raise ConvergenceError(f"left course integration failed: {term}")
        x, y = term.xi, trace.states[-1]
        if term.event_id == "gamma_bar":
            if y[0] <= Hb:
                return NoCrossing  # entered Q1 directly (courses L1/L2)
            events = [down]  # now in Q4; wait for the downward crossing
            continue
        if y[1] < gb:
            return float(y[1])
        events = [down, below]
    return NoCrossing


def crossing_ordinate_right(model: SurfaceTension, params: RegimeParams, geometry: PhaseGeometry | None,
                            Gamma0: float, span: float = 200.0, rel_tol=1e-10, abs_tol=1e-12) -> float:
    """Gamma where the forward orbit from (2H*, Gamma0) first crosses H = H_bar into Q1."""
    geo = _prepare(model, params, geometry)
    if not 0.0 < Gamma0 < 1.0:
        raise DomainError("Gamma0 must lie in (0, 1)")
    fn = _field_hg(model, params)
    Hb = geo.H_bar
    down = EventSpec("H_bar", lambda x, y: y[0] - Hb, Direction.FALLING)
    trace = integrate_adaptive(fn, (0.0, [2.0 * params.H_star, Gamma0]), span, [down], rel_tol, abs_tol)
    if trace.termination.kind is not TerminationKind.EVENT:
        raise ConvergenceError(f"right course did not reach H = H_bar: {trace.termination}")
    return float(trace.states[-1][1])


def classify_left_course(model, params, geometry, Gamma0, span=200.0, rel_tol=1e-10, abs_tol=1e-12) -> LeftCourse:
    """L2 if the orbit from (H*, Gamma0) drops below gamma_bar before H reaches H_bar, else L3."""
    geo = _prepare(model, params, geometry)
    fn = _field_hg(model, params)
    Hb, gb = geo.H_bar, geo.gamma_bar
    events = [EventSpec(LeftCourse.L3, lambda x, y: y[0] - Hb, Direction.RISING),
              EventSpec(LeftCourse.L2, lambda x, y: y[1] - gb, Direction.FALLING)]
    trace = integrate_adaptive(fn, (0.0, [params.H_star, Gamma0]), span, events, rel_tol, abs_tol)
    if trace.termination.kind is not TerminationKind.EVENT:
        raise ConvergenceError(f"course from Gamma0={Gamma0!r} not classified: {trace.termination}")
    return LeftCourse(trace.termination.event_id)


def gamma_0s(model: SurfaceTension, params: RegimeParams, geometry: PhaseGeometry | None = None,
             tol: float = 1e-10) -> float:
    """Separatrix ordinate on H = H* between courses L2 (below) and L3 (above)."""
    geo = _prepare(model, params, geometry)
    lo, hi = geo.gamma_bar, 1.0 - 1e-9
    if classify_left_course(model, params, geo, hi) is not LeftCourse.L3:
        raise ConvergenceError("course from near Gamma = 1 is not L3")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if mid > geo.gamma_bar and classify_left_course(model, params, geo, mid) is LeftCourse.L3:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# -- heteroclinic ---------------------------------------------------------------------


@dataclass
class ShootingDiagnostics:
    iterations: int
    log: list[tuple[float, ExitSide]]
    backward_termination: str
    forward_termination: str
    distance_left: float
    distance_right: float
    xi_alpha: float
    xi_omega: float
    degenerate: bool = False
    scan_monotone: bool = True
    notes: list[str] = field(default_factory=list)


@dataclass
class ShootingOutcome:
    gamma_star: float
    bracket: tuple[float, float]
    profile: Profile
    geometry: PhaseGeometry
    diagnostics: ShootingDiagnostics


class _Shooter:
    def __init__(self, model, params, geometry, xi_span_max, rel_tol, abs_tol):
        self.model, self.params, self.geo = model, params, geometry
        self.span = xi_span_max
        self.rel_tol, self.abs_tol = rel_tol, abs_tol
        self.fn_back = _field_log_w(model, params)
        self.fn_fwd = _field_log_excess(model, params)
        Hs = params.H_star
        self.exits = [
            EventSpec(ExitSide.LEFT, lambda x, y: y[0] - Hs, Direction.FALLING),
            EventSpec(ExitSide.RIGHT, lambda x, y: y[0] - 2.0 * Hs, Direction.RISING),
        ]

    def backward(self, gamma, events):
        start = (0.0, [self.geo.H_bar, math.log1p(-gamma)])
        return integrate_adaptive(self.fn_back, start, -self.span, events, self.rel_tol, self.abs_tol)

    def classify(self, gamma, max_extensions: int = 10) -> ExitSide:
        # near-critical trials can linger at the saddle longer than one span
        trace = self.backward(gamma, self.exits)
        for _ in range(max_extensions):
            term = trace.termination
            if term.kind is not TerminationKind.SPAN_EXHAUSTED:
                break
            trace = integrate_adaptive(self.fn_back, (term.xi, trace.states[-1]), -self.span, self.exits,
                                       self.rel_tol, self.abs_tol)
        term = trace.termination
        if term.kind is not TerminationKind.EVENT:
            raise ConvergenceError(f"backward orbit from gamma={gamma!r} inconclusive: {term}")
        return ExitSide(term.event_id)


def _box_distance_saddle(Hs, eps):
    def fn(x, y):
        return max(abs(y[0] - 2.0 * Hs), math.exp(y[1])) - 0.5 * eps
    return fn


def _box_distance_sink(Hs, eps):
    def fn(x, y):
        return max(math.exp(y[0]), math.exp(y[1])) - 0.5 * eps
    return fn


def _run_to_box(fn, start, span, box_fn, extent, exits, stops, rel_tol, abs_tol):
    """Integrate until the box is entered, then on to |xi| = extent unless the orbit leaves the box.

    ``stops`` end the continuation early, where the distance to the end state
    is no longer representable next to the state itself.

    Returns (traces, entry_xi, end_xi, termination text).
    """
    sign = math.copysign(1.0, span)
    enter = EventSpec("enter", box_fn, Direction.FALLING)
    first = integrate_adaptive(fn, start, span, [enter, *exits], rel_tol, abs_tol)
    term = first.termination
    if term.kind is not TerminationKind.EVENT or term.event_id != "enter":
        raise ConvergenceError(f"orbit did not reach the end-state box: {term}")
    entry = term.xi
    remaining = sign * extent - entry
    if sign * remaining <= 0.0:
        return [first], entry, entry, "box reached beyond the requested extent"
    leave = EventSpec("leave", box_fn, Direction.RISING)
    second = integrate_adaptive(fn, (entry, first.states[-1]), remaining, [leave, *exits, *stops], rel_tol, abs_tol)
    t2 = second.termination
    if t2.kind is TerminationKind.EVENT:
        # back off one ulp-scale step so no sample sits on the exit boundary
        end = t2.xi - sign * 1e-9 * max(1.0, abs(t2.xi))
        return [first, second], entry, end, f"stopped at xi={t2.xi:.6g} ({t2.event_id})"
    if t2.kind is not TerminationKind.SPAN_EXHAUSTED:
        raise ConvergenceError(f"integration inside the box failed: {t2}")
    return [first, second], entry, t2.xi, "stayed in the box to the requested extent"


def _sample(traces: list[OrbitTrace], xi):
    """Evaluate a chain of traces (ordered along integration) at the sample points."""
    out = np.empty((xi.size, traces[0].states.shape[1]))
    done = np.zeros(xi.size, dtype=bool)
    for trace in traces:
        lo, hi = min(trace.xi[0], trace.xi[-1]), max(trace.xi[0], trace.xi[-1])
        mask = (~done) & (xi >= lo) & (xi <= hi)
        if np.any(mask):
            out[mask] = trace.evaluate(xi[mask])
            done |= mask
    if not done.all():
        raise ConvergenceError("sample grid extends beyond the integrated orbit")
    return out


def _field_hw_plain(model, params):
    G, D, Hs = params.G, params.D, params.H_star

    def fn(H, w):
        g = 1.0 - w
        r = float(model.rho_complement(w))
        den = g * H + 4.0 * D * r
        return np.array([(6.0 * g * H * (2.0 * Hs - H) - 12.0 * D * (H - Hs) * r) / (G * H ** 3 * den),
                         -2.0 * g * (H - 3.0 * Hs) * r / (H * den)])

    return fn


def saddle_unstable_direction(model: SurfaceTension, params: RegimeParams):
    """Positive eigenvalue and eigenvector (H, 1 - Gamma components) of the linearisation at (2H*, 1).

    The eigenvector is oriented into the rectangle (1 - Gamma increasing).
    """
    fn = _field_hw_plain(model, params)
    Hs = params.H_star
    hH, hw = 1e-6 * Hs, 1e-6
    J = np.column_stack([(fn(2 * Hs + hH, 0.0) - fn(2 * Hs - hH, 0.0)) / (2 * hH),
                         (fn(2 * Hs, hw) - fn(2 * Hs, -hw)) / (2 * hw)])
    values, vectors = np.linalg.eig(J)
    k = int(np.argmax(values.real))
    lam, vec = float(values[k].real), vectors[:, k].real
    if lam <= 0.0 or vec[1] == 0.0:
        raise ConvergenceError("saddle linearisation has no usable unstable direction")
    vec = vec / np.max(np.abs(vec))
    return lam, vec if vec[1] > 0.0 else -vec


class _ManifoldBranch:
    """Unstable manifold of the saddle integrated forward up to the cross-section H = H_bar.

    Before the first integrated point the orbit is continued with the linear
    solution, whose error is quadratic in the (tiny) starting offset.
    """

    def __init__(self, shooter: _Shooter, offset: float = 1e-9):
        model, params, geo = shooter.model, shooter.params, shooter.geo
        self.Hs = params.H_star
        self.lam, self.vec = saddle_unstable_direction(model, params)
        self.offset = offset
        start = [2.0 * self.Hs + offset * self.vec[0], math.log(offset * self.vec[1])]
        cross = EventSpec("cross", lambda x, y: y[0] - geo.H_bar, Direction.FALLING)
        self.trace = integrate_adaptive(shooter.fn_back, (0.0, start), shooter.span, [cross, shooter.exits[0]],
                                        shooter.rel_tol, shooter.abs_tol)
        term = self.trace.termination
        if term.kind is not TerminationKind.EVENT or term.event_id != "cross":
            raise ConvergenceError(f"unstable manifold did not reach H = H_bar: {term}")
        self.shift = term.xi
        self.gamma_cross = float(-math.expm1(self.trace.states[-1][1]))

    def xi_floor(self, floor: float) -> float:
        """Smallest xi at which both offsets from the saddle are still representable."""
        need = floor / (self.offset * self.vec[1])
        if self.vec[0] != 0.0:
            need = max(need, floor * 2.0 * self.Hs / (self.offset * abs(self.vec[0])))
        return -self.shift + max(math.log(need), 0.0) / self.lam

    def box_exit(self, eps: float) -> float:
        dist = np.maximum(np.abs(self.trace.states[:, 0] - 2.0 * self.Hs), np.exp(self.trace.states[:, 1]))
        i = int(np.argmax(dist > 0.5 * eps))
        return float(self.trace.xi[i] - self.shift)

    def __call__(self, xi):
        s = xi + self.shift
        out = np.empty((xi.size, 2))
        lin = s < 0.0
        if np.any(lin):
            growth = self.offset * np.exp(self.lam * s[lin])
            out[lin, 0] = 2.0 * self.Hs + growth * self.vec[0]
            out[lin, 1] = math.log(self.offset * self.vec[1]) + self.lam * s[lin]
        if np.any(~lin):
            out[~lin] = self.trace.evaluate(np.minimum(s[~lin], self.trace.xi[-1]))
        return out


def _scan(shooter: _Shooter, gamma_bar: float, points: int):
    trial = np.linspace(1e-4 * gamma_bar, gamma_bar - 1e-4 * gamma_bar, points)
    return [(float(g), shooter.classify(float(g))) for g in trial]


def heteroclinic(model: SurfaceTension, params: RegimeParams, tol_bisect: float = 1e-12, eps_saddle: float = 1e-3,
                 xi_span_max: float = 200.0, xi_min: float = -40.0, xi_max: float = 40.0, spacing: float = 0.01,
                 rel_tol: float = 1e-10, abs_tol: float = 1e-12,
                 geometry: PhaseGeometry | None = None) -> ShootingOutcome:
    """Shoot backward from H = H_bar and bisect on the exit side, then assemble the profile.

    The profile is anchored with xi = 0 at (H_bar, gamma_star) and sampled with
    the given spacing. Each end is integrated until the orbit enters the
    eps_saddle box around its end state, then continued to xi_min (left) or
    xi_max (right) while it stays inside the box.
    """
    if not (tol_bisect > 0.0 and eps_saddle > 0.0 and xi_span_max > 0.0 and spacing > 0.0):
        raise DomainError("tolerances, span and spacing must be positive")
    if not xi_min < 0.0 < xi_max:
        raise DomainError("need xi_min < 0 < xi_max")
    geo = _prepare(model, params, geometry)
    shooter = _Shooter(model, params, geo, xi_span_max, rel_tol, abs_tol)

    scan = _scan(shooter, geo.gamma_bar, SCAN_POINTS)
    sides = [s for _, s in scan]
    if ExitSide.RIGHT not in sides or ExitSide.LEFT not in sides:
        raise ConvergenceError(f"no exit-side change over the scan of (0, gamma_bar): all {sides[0].value}")
    first_left = sides.index(ExitSide.LEFT)
    monotone = all(s is ExitSide.RIGHT for s in sides[:first_left]) and all(
        s is ExitSide.LEFT for s in sides[first_left:])
    if first_left == 0:
        raise ConvergenceError("lowest trial ordinate already exits on the left")
    lo, hi = scan[first_left - 1][0], scan[first_left][0]
    log = list(scan)

    iterations = 0
    degenerate = False
    while hi - lo > tol_bisect:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            degenerate = True
            break
        side = shooter.classify(mid)
        log.append((mid, side))
        iterations += 1
        if side is ExitSide.LEFT:
            hi = mid
        else:
            lo = mid
    if hi - lo < 1e-14:
        degenerate = True
    gamma_star = 0.5 * (lo + hi)

    Hs = params.H_star
    floor = 64.0 * np.finfo(float).eps
    back_stops = [
        EventSpec("precision", lambda x, y: y[0] - 2.0 * Hs * (1.0 - floor), Direction.RISING),
        EventSpec("precision", lambda x, y: y[1] - math.log(floor), Direction.FALLING),
    ]
    fwd_stops = [EventSpec("precision", lambda x, y: y[0] - math.log(floor * Hs), Direction.FALLING)]
    notes = []
    try:
        back_traces, xi_alpha, xi_lo, back_note = _run_to_box(
            shooter.fn_back, (0.0, [geo.H_bar, math.log1p(-gamma_star)]), -xi_span_max,
            _box_distance_saddle(Hs, eps_saddle), -xi_min, shooter.exits, back_stops, rel_tol, abs_tol)

        def left_branch(x):
            return _sample(back_traces, x[::-1])[::-1]
    except ConvergenceError as exc:
        # the bracket cannot resolve the saddle approach in double precision;
        # take the xi < 0 half from the unstable manifold instead
        manifold = _ManifoldBranch(shooter)
        left_branch = manifold
        xi_alpha = manifold.box_exit(eps_saddle)
        xi_lo = max(xi_min, manifold.xi_floor(floor))
        back_note = f"unstable-manifold branch (backward shot failed: {exc})"
        notes.append(f"manifold crosses H_bar at Gamma={manifold.gamma_cross!r}, "
                     f"offset from gamma_star {abs(manifold.gamma_cross - gamma_star):.3e}")
    fwd_traces, xi_omega, xi_hi, fwd_note = _run_to_box(
        shooter.fn_fwd, (0.0, [math.log(geo.H_bar - Hs), math.log(gamma_star)]), xi_span_max,
        _box_distance_sink(Hs, eps_saddle), xi_max, [], fwd_stops, rel_tol, abs_tol)

    k_lo = math.ceil(xi_lo / spacing - 1e-9)
    k_hi = math.floor(xi_hi / spacing + 1e-9)
    xi = np.arange(k_lo, k_hi + 1) * spacing
    xi = xi[(xi >= xi_lo) & (xi <= xi_hi)]
    left, right = xi[xi < 0.0], xi[xi >= 0.0]
    back = left_branch(left) if left.size else np.zeros((0, 2))
    fwd = _sample(fwd_traces, right)
    H = np.concatenate([back[:, 0], Hs + np.exp(fwd[:, 0])])
    w = np.concatenate([np.exp(back[:, 1]), -np.expm1(fwd[:, 1])])
    Gamma = np.concatenate([-np.expm1(back[:, 1]), np.exp(fwd[:, 1])])
    if right.size and right[0] == 0.0:
        H[left.size], Gamma[left.size], w[left.size] = geo.H_bar, gamma_star, 1.0 - gamma_star
    clamped = int(np.count_nonzero(Gamma >= 1.0))
    Gamma = np.minimum(Gamma, _ONE_MINUS)

    D, G = params.D, params.G
    r = np.where(w < 0.5, model.rho_complement(w), model.rho_raw(Gamma))
    den = Gamma * H + 4.0 * D * r
    dH = (6.0 * Gamma * H * (2.0 * Hs - H) - 12.0 * D * (H - Hs) * r) / (G * H ** 3 * den)
    dGamma = 2.0 * Gamma * (H - 3.0 * Hs) * r / (H * den)

    dist_left = abs(H[0] - 2.0 * Hs) + abs(w[0])
    dist_right = abs(H[-1] - Hs) + abs(Gamma[-1])
    notes = [f"backward: {back_note}", f"forward: {fwd_note}", *notes]
    if clamped:
        notes.append(f"{clamped} samples with Gamma rounded to 1 were clamped below 1")
    if not monotone:
        notes.append("initial scan exit sides were not monotone; first left exit used")
    diagnostics = ShootingDiagnostics(
        iterations=iterations, log=log,
        backward_termination=back_note, forward_termination=fwd_note,
        distance_left=float(dist_left), distance_right=float(dist_right),
        xi_alpha=float(xi_alpha), xi_omega=float(xi_omega),
        degenerate=degenerate, scan_monotone=monotone, notes=notes,
    )
    meta = {
        "model": model.spec, "G": G, "D": D, "H_star": Hs, "regime": params.regime.value,
        "tool_version": __version__,
        "gamma_bar": geo.gamma_bar, "H_bar": geo.H_bar, "mu": geo.mu,
        "gamma_star": gamma_star, "bracket_lo": lo, "bracket_hi": hi,
        "bisection_iterations": iterations, "degenerate_bracket": degenerate,
        "tol_bisect": tol_bisect, "eps_saddle": eps_saddle, "xi_span_max": xi_span_max,
        "rel_tol": rel_tol, "abs_tol": abs_tol,
        "anchor": "xi=0 at (H_bar, gamma_star)",
    }
    flags = [FLAG_SMOOTH] * xi.size
    profile = Profile(xi, H, Gamma, dH, dGamma, flags, meta).validate()
    return ShootingOutcome(gamma_star, (lo, hi), profile, geo, diagnostics)
