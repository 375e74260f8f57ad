from functools import lru_cache
from typing import Optional, Tuple
import logging
import math
import numpy as np
from scipy.linalg import expm

from mstransport.config import get_settings
from mstransport.exceptions import InvalidArgumentError, StepFailureError
from mstransport.models.grid import Grid1D, SpeciesState
from mstransport.models.results import InvariantAudit
from mstransport.models.scenario import DiffusionIntegrator, ScenarioConfig
from mstransport.models.transport import DiffusionCoefficients, ReactionMatrix
from mstransport.services.flux_service import FluxService
from mstransport.services.grid_service import GridService

logger = logging.getLogger(__name__)


def enforce_bounds(xi: np.ndarray, time: float, strict: bool = True) -> Tuple[np.ndarray, float]:
    """
    Clipping policy for mole fractions.

    Values within clip_tolerance below 0 or above 1 are clamped. With `strict`,
    anything further out raises StepFailureError; otherwise it is left as is.
    Returns the clamped array and the largest overshoot seen.
    """
    tol = get_settings().clip_tolerance
    low = -xi
    high = xi - 1.0
    violation = float(max(low.max(), high.max(), 0.0))
    if violation == 0.0:
        return xi, 0.0

    if strict and violation > tol:
        worst = np.maximum(low, high)
        species, cell = np.unravel_index(int(np.argmax(worst)), xi.shape)
        raise StepFailureError(
            "mole fraction left the admissible band [0, 1]",
            cell_index=int(cell),
            species=int(species),
            value=float(xi[species, cell]),
            time=time,
        )

    clamped = xi.copy()
    clamped[(clamped < 0.0) & (clamped > -tol)] = 0.0
    clamped[(clamped > 1.0) & (clamped < 1.0 + tol)] = 1.0
    return clamped, violation


def substep_count(duration: float, bound: float) -> int:
    """Number of equal sub-steps needed to keep each one within `bound`"""
    if math.isinf(bound):
        return 1
    return max(1, math.ceil(duration / bound - 1e-9))


def diffusion_rate(
    xi: np.ndarray,
    diff: DiffusionCoefficients,
    dx: float,
    composition: Optional[np.ndarray] = None,
    audit: Optional[InvariantAudit] = None,
) -> np.ndarray:
    """Finite-volume divergence -(N[j+1/2] - N[j-1/2]) / dx with no-flux edges"""
    n = FluxService.face_fluxes(xi, diff, dx, composition)
    if audit is not None:
        audit.record_closure(float(np.max(np.abs(n.sum(axis=0)))))
    return -(n[:, 1:] - n[:, :-1]) / dx


def convection_rate(xi: np.ndarray, velocity: float, dx: float) -> np.ndarray:
    """
    Upwind discretisation of v * d(xi)/dx.
    For v > 0 information travels leftward and the forward difference is used;
    edge cells use zero-gradient extrapolation.
    """
    rate = np.zeros_like(xi)
    if velocity > 0.0:
        rate[:, :-1] = velocity * (xi[:, 1:] - xi[:, :-1]) / dx
    elif velocity < 0.0:
        rate[:, 1:] = velocity * (xi[:, 1:] - xi[:, :-1]) / dx
    return rate


@lru_cache(maxsize=64)
def _propagator(entries: Tuple[float, ...], dt: float) -> np.ndarray:
    lam = np.array(entries).reshape(3, 3)
    return expm(lam * dt)


def reaction_propagator(reactions: ReactionMatrix, dt: float) -> np.ndarray:
    """exp(Lambda * dt) by Pade scaling-and-squaring"""
    return _propagator(tuple(reactions.matrix.ravel()), float(dt))


def _diffuse(
    state: SpeciesState,
    diff: DiffusionCoefficients,
    grid: Grid1D,
    dt: float,
    integrator: DiffusionIntegrator,
    composition: Optional[np.ndarray],
    audit: Optional[InvariantAudit],
) -> Tuple[SpeciesState, float]:
    xi = state.xi
    stage = xi + dt * diffusion_rate(xi, diff, grid.dx, composition, audit)
    if integrator == DiffusionIntegrator.HEUN:
        stage_rate = diffusion_rate(stage, diff, grid.dx, composition, audit)
        stage = 0.5 * (xi + stage + dt * stage_rate)

    time = state.time + dt
    stage, violation = enforce_bounds(stage, time)
    return state.evolve(stage, time), violation


def _convect(state: SpeciesState, velocity: float, grid: Grid1D, dt: float) -> Tuple[SpeciesState, float]:
    courant = abs(velocity) * dt / grid.dx
    if courant > 1.0 + 1e-12:
        raise InvalidArgumentError(f"CFL violated: |v| dt / dx = {courant:.6g} > 1")
    time = state.time + dt
    if velocity == 0.0:
        return state.evolve(state.xi, time), 0.0
    xi = state.xi + dt * convection_rate(state.xi, velocity, grid.dx)
    xi, violation = enforce_bounds(xi, time)
    return state.evolve(xi, time), violation


class OperatorService:
    """Split sub-step propagators: diffusion, reaction, convection"""

    @staticmethod
    def diffusion_step(
        state: SpeciesState,
        diff: DiffusionCoefficients,
        grid: Grid1D,
        dt: float,
        integrator: DiffusionIntegrator = DiffusionIntegrator.EULER,
        composition: Optional[np.ndarray] = None,
        audit: Optional[InvariantAudit] = None,
    ) -> SpeciesState:
        """
        One explicit finite-volume step of d(xi)/dt + dN/dx = 0.
        `composition` freezes the Maxwell-Stefan matrix coefficients.
        """
        new_state, _ = _diffuse(state, diff, grid, dt, integrator, composition, audit)
        return new_state

    @staticmethod
    def reaction_step(state: SpeciesState, reactions: ReactionMatrix, dt: float) -> SpeciesState:
        """Exact per-cell solve of d(xi)/dt = Lambda @ xi"""
        time = state.time + dt
        if reactions.is_zero:
            return state.evolve(state.xi, time)
        xi = reaction_propagator(reactions, dt) @ state.xi
        xi, _ = enforce_bounds(xi, time, strict=False)
        return state.evolve(xi, time)

    @staticmethod
    def convection_step(state: SpeciesState, velocity: float, grid: Grid1D, dt: float) -> SpeciesState:
        """First-order upwind step of d(xi)/dt = v d(xi)/dx; requires |v| dt / dx <= 1"""
        new_state, _ = _convect(state, velocity, grid, dt)
        return new_state

    @staticmethod
    def advance_diffusion(
        state: SpeciesState,
        cfg: ScenarioConfig,
        duration: float,
        audit: Optional[InvariantAudit] = None,
    ) -> Tuple[SpeciesState, int, float]:
        """Diffusion over `duration`, sub-cycled to the safety-scaled explicit bound"""
        bound = GridService.stable_dt(cfg.diff, cfg.grid.dx, 0.0, cfg.dt_policy.safety)
        steps = substep_count(duration, bound)
        h = duration / steps
        violation = 0.0
        for _ in range(steps):
            state, v = _diffuse(
                state, cfg.diff, cfg.grid, h, cfg.diffusion_integrator, None, audit
            )
            violation = max(violation, v)
        return state, steps, violation

    @staticmethod
    def advance_reaction(state: SpeciesState, cfg: ScenarioConfig, duration: float) -> Tuple[SpeciesState, int, float]:
        return OperatorService.reaction_step(state, cfg.reactions, duration), 1, 0.0

    @staticmethod
    def advance_convection(state: SpeciesState, cfg: ScenarioConfig, duration: float) -> Tuple[SpeciesState, int, float]:
        """Convection over `duration`, sub-cycled to unit Courant number"""
        if cfg.velocity == 0.0:
            return state.evolve(state.xi, state.time + duration), 1, 0.0
        steps = substep_count(duration, GridService.convective_bound(cfg.grid.dx, cfg.velocity))
        h = duration / steps
        violation = 0.0
        for _ in range(steps):
            state, v = _convect(state, cfg.velocity, cfg.grid, h)
            violation = max(violation, v)
        return state, steps, violation
