"""Regime dispatch: one call that returns a profile for any (G, D, H*)."""

from __future__ import annotations

from dataclasses import dataclass

from . import closed_form, shooting
from .profile import Profile, Regime, RegimeParams
from .surface_tension import SurfaceTension


@dataclass(frozen=True)
class SolveSettings:
    xi_min: float = -30.0
    xi_max: float = 30.0
    samples: int = 6001
    gamma_anchor: float = 0.5
    tol_bisect: float = 1e-12
    eps_saddle: float = 1e-3

    @property
    def spacing(self) -> float:
        return (self.xi_max - self.xi_min) / (self.samples - 1)


def solve_profile(model: SurfaceTension, params: RegimeParams,
                  settings: SolveSettings = SolveSettings()) -> tuple[Profile, shooting.ShootingOutcome | None]:
    """Solve in the regime selected by ``params``; the shooting outcome is returned when G > 0 and D > 0."""
    s = settings
    regime = params.regime
    if regime is Regime.G0_D0:
        return closed_form.solve_G0_D0(model, params, s.xi_min, s.xi_max, s.samples), None
    if regime is Regime.G0_DPOS:
        return closed_form.solve_G0_Dpos(model, params, s.gamma_anchor, s.xi_min, s.xi_max, s.samples), None
    if regime is Regime.GPOS_D0:
        return closed_form.solve_Gpos_D0(model, params, s.xi_min, s.xi_max, s.samples), None
    if s.samples < 5:
        raise closed_form.DomainError("need at least 5 samples")
    outcome = shooting.heteroclinic(model, params, tol_bisect=s.tol_bisect, eps_saddle=s.eps_saddle,
                                    xi_min=s.xi_min, xi_max=s.xi_max, spacing=s.spacing)
    return outcome.profile, outcome
