from typing import Optional, Tuple, Set
import logging
import math
import time as timer
import numpy as np

from mstransport.config import get_settings
from mstransport.exceptions import InvalidArgumentError, RunAbortedError, TransportError
from mstransport.models.grid import SpeciesState
from mstransport.models.results import InvariantAudit, RunResult, SubstepReport
from mstransport.models.scenario import (
    DiffusionIntegrator,
    DtMode,
    ScenarioConfig,
    SplittingMethod,
)
from mstransport.services.grid_service import GridService
from mstransport.services.operator_service import (
    OperatorService,
    convection_rate,
    diffusion_rate,
    enforce_bounds,
    substep_count,
)
from mstransport.services.scenario_service import ScenarioService

logger = logging.getLogger(__name__)


def _report(steps: int, violation: float, dt: float) -> SubstepReport:
    return SubstepReport(steps_taken=steps, max_xi_violation=violation, dt_used=dt)


def macro_step_count(cfg: ScenarioConfig) -> int:
    """Number of equal macro steps covering [0, t_end]"""
    if cfg.dt_policy.mode == DtMode.AUTO:
        dt_target = GridService.stable_dt(cfg.diff, cfg.grid.dx, cfg.velocity, cfg.dt_policy.safety)
    else:
        dt_target = cfg.dt_policy.dt
    return max(1, math.ceil(cfg.t_end / dt_target - 1e-9))


def snapshot_steps(num_steps: int, snapshots: int) -> Set[int]:
    """Macro step indices stored in the run result, always including the last one"""
    if snapshots == 1:
        return {num_steps}
    return {(k * num_steps) // (snapshots - 1) for k in range(snapshots)}


class SplittingService:
    """Time-integration drivers composing the diffusion, reaction and convection operators"""

    @staticmethod
    def lie_step_with_report(
        state: SpeciesState,
        cfg: ScenarioConfig,
        dt: float,
        audit: Optional[InvariantAudit] = None,
    ) -> Tuple[SpeciesState, SubstepReport]:
        """Diffusion -> reaction -> convection, each over the full dt"""
        if not dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {dt}")
        t_next = state.time + dt
        state, n_d, v_d = OperatorService.advance_diffusion(state, cfg, dt, audit)
        state, n_r, _ = OperatorService.advance_reaction(state, cfg, dt)
        state, n_c, v_c = OperatorService.advance_convection(state, cfg, dt)
        # each sub-operator advances the clock; the composition spans dt only
        return state.evolve(state.xi, t_next), _report(n_d + n_r + n_c, max(v_d, v_c), dt)

    @staticmethod
    def strang_step_with_report(
        state: SpeciesState,
        cfg: ScenarioConfig,
        dt: float,
        audit: Optional[InvariantAudit] = None,
    ) -> Tuple[SpeciesState, SubstepReport]:
        """Symmetric composition D(dt/2) R(dt/2) C(dt) R(dt/2) D(dt/2)"""
        if not dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {dt}")
        t_next = state.time + dt
        half = 0.5 * dt
        steps = 0
        violation = 0.0
        state, n, v = OperatorService.advance_diffusion(state, cfg, half, audit)
        steps, violation = steps + n, max(violation, v)
        state, n, _ = OperatorService.advance_reaction(state, cfg, half)
        steps += n
        state, n, v = OperatorService.advance_convection(state, cfg, dt)
        steps, violation = steps + n, max(violation, v)
        state, n, _ = OperatorService.advance_reaction(state, cfg, half)
        steps += n
        state, n, v = OperatorService.advance_diffusion(state, cfg, half, audit)
        steps, violation = steps + n, max(violation, v)
        return state.evolve(state.xi, t_next), _report(steps, violation, dt)

    @staticmethod
    def iterative_step_with_report(
        state: SpeciesState,
        cfg: ScenarioConfig,
        dt: float,
        m: Optional[int] = None,
        audit: Optional[InvariantAudit] = None,
    ) -> Tuple[SpeciesState, SubstepReport]:
        """
        Iterative splitting with A = Maxwell-Stefan diffusion, B = reaction + convection.

        Each sweep pair k:
        - A-sweep: u' = A[w](u) + B z(t) from xi^n. The previous iterate z, linear
          in time between xi^n and its end value, supplies both the matrix
          composition w and the frozen source. Euler reads w at the sub-step
          midpoint, Heun at both ends.
        - B-sweep: u' = B u + g from xi^n, g being the A-contribution of the
          A-sweep output held constant over the step.
        The B-sweep output is the new iterate. Stops when successive iterates
        differ by less than iteration_tolerance (max norm) or after m pairs.
        """
        if not dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {dt}")
        m = cfg.splitting.iterations if m is None else m
        if m < 1:
            raise InvalidArgumentError(f"iteration count must be >= 1, got {m}")

        settings = get_settings()
        grid, diff = cfg.grid, cfg.diff
        dx = grid.dx
        lam = cfg.reactions.matrix
        heun = cfg.diffusion_integrator == DiffusionIntegrator.HEUN

        def b_rate(xi: np.ndarray) -> np.ndarray:
            return lam @ xi + convection_rate(xi, cfg.velocity, dx)

        diag = np.max(np.abs(np.diag(lam)))
        b_bound = min(
            GridService.convective_bound(dx, cfg.velocity),
            1.0 / diag if diag > 0 else math.inf,
        )
        a_steps = substep_count(dt, GridService.stable_dt(diff, dx, 0.0, cfg.dt_policy.safety))
        b_steps = substep_count(dt, b_bound)
        h_a = dt / a_steps
        h_b = dt / b_steps

        xi_n = state.xi
        b_n = b_rate(xi_n)
        iterate = xi_n
        diffs = []
        violation = 0.0
        converged = False

        for _ in range(m):
            b_z = b_rate(iterate)

            u = xi_n
            for j in range(a_steps):
                th0, th1 = j / a_steps, (j + 1) / a_steps
                th_mid = 0.5 * (th0 + th1)
                s_mid = b_n + th_mid * (b_z - b_n)
                if heun:
                    w0 = xi_n + th0 * (iterate - xi_n)
                    w1 = xi_n + th1 * (iterate - xi_n)
                    s0 = b_n + th0 * (b_z - b_n)
                    r0 = diffusion_rate(u, diff, dx, w0, audit)
                    predictor = u + h_a * (r0 + s0)
                    r1 = diffusion_rate(predictor, diff, dx, w1, audit)
                    u = u + h_a * (0.5 * (r0 + r1) + s_mid)
                else:
                    # coefficients at the sub-step midpoint of the previous iterate
                    w_mid = xi_n + th_mid * (iterate - xi_n)
                    u = u + h_a * (diffusion_rate(u, diff, dx, w_mid, audit) + s_mid)
            a_contribution = ((u - xi_n) - 0.5 * dt * (b_n + b_z)) / dt

            u = xi_n
            for _ in range(b_steps):
                r0 = b_rate(u)
                if heun:
                    predictor = u + h_b * (r0 + a_contribution)
                    u = u + h_b * (0.5 * (r0 + b_rate(predictor)) + a_contribution)
                else:
                    u = u + h_b * (r0 + a_contribution)
            u, v = enforce_bounds(u, state.time + dt)
            violation = max(violation, v)

            change = float(np.max(np.abs(u - iterate)))
            diffs.append(change)
            iterate = u
            if change < settings.iteration_tolerance:
                converged = True
                break

        if not converged:
            logger.debug(f"Iterative step at t={state.time:.6g} not converged after {m} sweeps: {diffs}")

        report = SubstepReport(
            steps_taken=len(diffs) * (a_steps + b_steps),
            max_xi_violation=violation,
            dt_used=dt,
            iterations=len(diffs),
            converged=converged,
            iterate_diffs=diffs,
        )
        return state.evolve(iterate, state.time + dt), report

    @staticmethod
    def lie_step(state: SpeciesState, cfg: ScenarioConfig, dt: float) -> SpeciesState:
        return SplittingService.lie_step_with_report(state, cfg, dt)[0]

    @staticmethod
    def strang_step(state: SpeciesState, cfg: ScenarioConfig, dt: float) -> SpeciesState:
        return SplittingService.strang_step_with_report(state, cfg, dt)[0]

    @staticmethod
    def iterative_step(state: SpeciesState, cfg: ScenarioConfig, dt: float, m: Optional[int] = None) -> SpeciesState:
        return SplittingService.iterative_step_with_report(state, cfg, dt, m)[0]

    @staticmethod
    def step(
        state: SpeciesState,
        cfg: ScenarioConfig,
        dt: float,
        audit: Optional[InvariantAudit] = None,
    ) -> Tuple[SpeciesState, SubstepReport]:
        """One macro step with the configured splitting method"""
        method = cfg.splitting.method
        if method == SplittingMethod.LIE:
            return SplittingService.lie_step_with_report(state, cfg, dt, audit)
        if method == SplittingMethod.STRANG:
            return SplittingService.strang_step_with_report(state, cfg, dt, audit)
        return SplittingService.iterative_step_with_report(state, cfg, dt, audit=audit)

    @staticmethod
    def run(cfg: ScenarioConfig, initial: Optional[SpeciesState] = None) -> RunResult:
        """
        Advance from t = 0 to t_end with the configured splitting driver.
        Macro steps are equal (t_end / N); time at step n is t_end * (n / N).
        """
        started = timer.perf_counter()
        state = initial if initial is not None else ScenarioService.initial_state(cfg.grid)
        audit = InvariantAudit()
        audit.start(state, cfg.grid)

        if cfg.t_end == 0.0:
            logger.info("t_end = 0, returning the initial condition")
            return RunResult(
                config=cfg,
                snapshots=[state],
                wall_time=timer.perf_counter() - started,
                audit=audit,
            )

        num_steps = macro_step_count(cfg)
        dt = cfg.t_end / num_steps
        keep = snapshot_steps(num_steps, cfg.output.snapshots)
        if len(keep) < cfg.output.snapshots:
            logger.warning(
                f"Requested {cfg.output.snapshots} snapshots but the run has only {num_steps} steps; "
                f"storing {len(keep)}"
            )
        snapshots = [state] if 0 in keep else []
        reports = []

        logger.info(
            f"Running {cfg.splitting.method.value} splitting: {num_steps} steps of dt={dt:.6g} "
            f"on {cfg.grid.num_cells} cells up to t={cfg.t_end}"
        )

        for n in range(1, num_steps + 1):
            try:
                state, report = SplittingService.step(state, cfg, dt, audit)
            except TransportError as e:
                t_fail = cfg.t_end * ((n - 1) / num_steps)
                logger.error(f"Step {n} failed at t={t_fail:.9g}: {e.detail}")
                raise RunAbortedError(e.detail, time=t_fail, step=n) from e

            state = state.evolve(state.xi, cfg.t_end * (n / num_steps))
            audit.record_state(state, cfg.grid)
            reports.append(report)
            if n in keep:
                snapshots.append(state)

        result = RunResult(
            config=cfg,
            snapshots=snapshots,
            reports=reports,
            wall_time=timer.perf_counter() - started,
            audit=audit,
        )
        if result.nonconverged_steps:
            logger.warning(
                f"{result.nonconverged_steps} of {num_steps} iterative steps did not reach "
                f"the iteration tolerance"
            )
        logger.info(f"Run finished in {result.wall_time:.2f}s with {len(snapshots)} snapshots")
        return result
