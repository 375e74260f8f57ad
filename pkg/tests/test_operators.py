import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from mstransport.exceptions import InvalidArgumentError, StepFailureError
from mstransport.models.grid import Grid1D, SpeciesState
from mstransport.models.scenario import DiffusionIntegrator
from mstransport.models.transport import NUCLEUS_WEIGHTS, ReactionMatrix
from mstransport.services.grid_service import GridService
from mstransport.services.operator_service import (
    OperatorService,
    enforce_bounds,
    reaction_propagator,
    substep_count,
)
from mstransport.services.scenario_service import ScenarioService


class TestEnforceBounds:
    def test_clamps_within_tolerance(self):
        xi = np.array([[-5e-13, 0.5], [1.0 + 5e-13, 0.5], [0.0, 0.0]])
        clamped, violation = enforce_bounds(xi, time=0.0)
        assert clamped[0, 0] == 0.0
        assert clamped[1, 0] == 1.0
        assert violation == pytest.approx(5e-13, rel=1e-3)

    def test_raises_outside_band(self):
        xi = np.array([[0.2, -1e-6], [0.4, 0.5], [0.4, 0.5]])
        with pytest.raises(StepFailureError) as exc_info:
            enforce_bounds(xi, time=0.25)
        assert exc_info.value.cell_index == 1
        assert exc_info.value.species == 0
        assert exc_info.value.time == 0.25

    def test_non_strict_keeps_large_values(self):
        xi = np.array([[0.2, -1e-6], [0.4, 0.5], [0.4, 0.5]])
        clamped, violation = enforce_bounds(xi, time=0.0, strict=False)
        assert clamped[0, 1] == -1e-6
        assert violation == pytest.approx(1e-6)

    def test_substep_count(self):
        assert substep_count(1.0, 0.3) == 4
        assert substep_count(0.9, 0.3) == 3
        assert substep_count(0.1, 0.3) == 1
        assert substep_count(1.0, math.inf) == 1


class TestDiffusionStep:
    def test_uniform_state_unchanged(self, small_grid, semi_diff):
        state = SpeciesState(xi=np.tile([[0.4], [0.2], [0.4]], (1, 20)))
        new_state = OperatorService.diffusion_step(state, semi_diff, small_grid, 1e-3)
        assert np.array_equal(new_state.xi, state.xi)
        assert new_state.time == pytest.approx(1e-3)

    def test_two_cell_explicit_step(self, equal_diff):
        grid = Grid1D(num_cells=2)
        state = SpeciesState(xi=[[0.8, 0.0], [0.2, 0.2], [0.0, 0.8]])
        new_state = OperatorService.diffusion_step(state, equal_diff, grid, 0.1)
        assert new_state.xi[0] == pytest.approx([0.64, 0.16], abs=1e-15)
        assert new_state.xi[1] == pytest.approx([0.2, 0.2], abs=1e-15)
        assert new_state.xi[2] == pytest.approx([0.16, 0.64], abs=1e-15)

    def test_equal_diffusivity_matches_heat_equation(self, small_grid, equal_diff):
        state = ScenarioService.initial_state(small_grid)
        dt = GridService.stable_dt(equal_diff, small_grid.dx, 0.0)
        new_state = OperatorService.diffusion_step(state, equal_diff, small_grid, dt)

        # Scalar FTCS heat step with reflecting edges
        u = state.xi[0]
        padded = np.concatenate([[u[0]], u, [u[-1]]])
        heat = u + 0.5 * dt / small_grid.dx ** 2 * (padded[2:] - 2 * u + padded[:-2])
        assert np.allclose(new_state.xi[0], heat, atol=1e-13)

    def test_conserves_total_moles_and_sigma(self, full_grid, semi_diff):
        state = ScenarioService.initial_state(full_grid)
        dt = GridService.stable_dt(semi_diff, full_grid.dx, 0.0)
        for integrator in DiffusionIntegrator:
            new_state = OperatorService.diffusion_step(state, semi_diff, full_grid, dt, integrator)
            drift = np.abs(new_state.total_moles(full_grid) - state.total_moles(full_grid))
            assert np.all(drift < 1e-13)
            assert np.max(np.abs(new_state.sigma - 1.0)) < 1e-12

    def test_heun_differs_from_euler(self, small_grid, semi_diff):
        state = ScenarioService.initial_state(small_grid)
        dt = GridService.stable_dt(semi_diff, small_grid.dx, 0.0)
        euler = OperatorService.diffusion_step(state, semi_diff, small_grid, dt)
        heun = OperatorService.diffusion_step(state, semi_diff, small_grid, dt, DiffusionIntegrator.HEUN)
        assert np.max(np.abs(euler.xi - heun.xi)) > 1e-6

    def test_blows_up_above_stability_bound(self, equal_diff):
        grid = Grid1D(num_cells=10)
        state = ScenarioService.initial_state(grid)
        bound = GridService.stable_dt(equal_diff, grid.dx, 0.0, safety=1.0)

        stable = state
        for _ in range(200):
            stable = OperatorService.diffusion_step(stable, equal_diff, grid, 0.9 * bound)
        assert np.all((stable.xi >= 0.0) & (stable.xi <= 1.0))

        with pytest.raises(StepFailureError):
            unstable = state
            for _ in range(200):
                unstable = OperatorService.diffusion_step(unstable, equal_diff, grid, 2.5 * bound)


class TestReactionStep:
    def _state(self, h, h2, h2_plus, cells=4):
        return SpeciesState(xi=np.tile([[h], [h2], [h2_plus]], (1, cells)))

    def test_zero_rates_leave_state_unchanged(self):
        state = self._state(0.3, 0.2, 0.5)
        new_state = OperatorService.reaction_step(state, ReactionMatrix(), 0.7)
        assert np.array_equal(new_state.xi, state.xi)
        assert new_state.time == pytest.approx(0.7)

    def test_ionisation_decay(self):
        state = self._state(0.3, 0.2, 0.5)
        new_state = OperatorService.reaction_step(state, ReactionMatrix.from_channels(lambda1=1.0), 0.5)
        decayed = 0.2 * math.exp(-0.5)
        assert new_state.xi[1, 0] == pytest.approx(decayed, abs=1e-14)
        assert new_state.xi[1, 0] == pytest.approx(0.12131, abs=1e-5)
        assert new_state.xi[2, 0] == pytest.approx(0.5 + 0.2 * (1.0 - math.exp(-0.5)), abs=1e-14)
        assert new_state.xi[0, 0] == pytest.approx(0.3, abs=1e-15)

    def test_dissociation_long_time_limit(self):
        state = self._state(0.1, 0.2, 0.0)
        new_state = OperatorService.reaction_step(state, ReactionMatrix.from_channels(lambda2=1.0), 50.0)
        assert new_state.xi[0, 0] == pytest.approx(0.1 + 2 * 0.2, abs=1e-12)
        assert new_state.xi[1, 0] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("lambda1", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("lambda2", [0.5, 1.0, 2.0])
    def test_matches_ode_oracle(self, lambda1, lambda2, rng):
        reactions = ReactionMatrix.from_channels(lambda1, lambda2)
        xi0 = rng.dirichlet(np.ones(3), size=5).T * 0.3
        state = SpeciesState(xi=xi0)
        dt = 0.4
        new_state = OperatorService.reaction_step(state, reactions, dt)

        lam = reactions.matrix
        for j in range(xi0.shape[1]):
            sol = solve_ivp(
                lambda t, y: lam @ y,
                (0.0, dt),
                xi0[:, j],
                method="DOP853",
                rtol=1e-13,
                atol=1e-15,
            )
            assert np.allclose(new_state.xi[:, j], sol.y[:, -1], rtol=0.0, atol=1e-10)

        nuclei_before = NUCLEUS_WEIGHTS @ state.xi
        nuclei_after = NUCLEUS_WEIGHTS @ new_state.xi
        assert np.max(np.abs(nuclei_after - nuclei_before)) < 1e-12

    def test_random_matrix_propagator(self, rng):
        for _ in range(10):
            reactions = ReactionMatrix.from_matrix(rng.uniform(-1.0, 1.0, size=(3, 3)))
            dt = float(rng.uniform(0.0, 1.0))
            y0 = rng.uniform(0.0, 1.0, size=3)
            sol = solve_ivp(
                lambda t, y: reactions.matrix @ y,
                (0.0, dt),
                y0,
                method="DOP853",
                rtol=1e-13,
                atol=1e-15,
            )
            assert np.allclose(reaction_propagator(reactions, dt) @ y0, sol.y[:, -1], rtol=0.0, atol=1e-10)


class TestConvectionStep:
    def test_zero_velocity_unchanged(self, small_grid):
        state = ScenarioService.initial_state(small_grid)
        new_state = OperatorService.convection_step(state, 0.0, small_grid, 0.5)
        assert np.array_equal(new_state.xi, state.xi)

    def test_unit_courant_shifts_left(self, small_grid):
        state = ScenarioService.initial_state(small_grid)
        velocity = 0.5
        dt = small_grid.dx / velocity
        new_state = OperatorService.convection_step(state, velocity, small_grid, dt)
        assert np.allclose(new_state.xi[:, :-1], state.xi[:, 1:], atol=1e-15)
        assert np.array_equal(new_state.xi[:, -1], state.xi[:, -1])

    def test_negative_velocity_shifts_right(self, small_grid):
        state = ScenarioService.initial_state(small_grid)
        velocity = -0.5
        dt = small_grid.dx / abs(velocity)
        new_state = OperatorService.convection_step(state, velocity, small_grid, dt)
        assert np.allclose(new_state.xi[:, 1:], state.xi[:, :-1], atol=1e-15)
        assert np.array_equal(new_state.xi[:, 0], state.xi[:, 0])

    def test_constant_state_unchanged(self, small_grid):
        state = SpeciesState(xi=np.tile([[0.4], [0.2], [0.4]], (1, 20)))
        new_state = OperatorService.convection_step(state, 0.3, small_grid, 0.1)
        assert np.array_equal(new_state.xi, state.xi)

    def test_monotone_below_unit_courant(self, small_grid, rng):
        state = SpeciesState(xi=rng.uniform(0.0, 1.0, size=(3, 20)))
        dt = 0.7 * small_grid.dx / 0.2
        new_state = OperatorService.convection_step(state, 0.2, small_grid, dt)
        assert np.all(new_state.xi.max(axis=1) <= state.xi.max(axis=1))
        assert np.all(new_state.xi.min(axis=1) >= state.xi.min(axis=1))

    def test_cfl_violation(self, small_grid):
        state = ScenarioService.initial_state(small_grid)
        with pytest.raises(InvalidArgumentError):
            OperatorService.convection_step(state, 1.0, small_grid, 2.0 * small_grid.dx)


class TestAdvance:
    def test_diffusion_subcycles_above_bound(self, coarse_cfg):
        state = ScenarioService.initial_state(coarse_cfg.grid)
        bound = GridService.stable_dt(coarse_cfg.diff, coarse_cfg.grid.dx, 0.0, coarse_cfg.dt_policy.safety)
        new_state, steps, _ = OperatorService.advance_diffusion(state, coarse_cfg, 2.5 * bound)
        assert steps == 3
        assert new_state.time == pytest.approx(2.5 * bound, rel=1e-14)

    def test_convection_subcycles_to_unit_courant(self, coarse_cfg):
        cfg = coarse_cfg.with_updates(velocity=1.0)
        state = ScenarioService.initial_state(cfg.grid)
        _, steps, _ = OperatorService.advance_convection(state, cfg, 3.5 * cfg.grid.dx)
        assert steps == 4
