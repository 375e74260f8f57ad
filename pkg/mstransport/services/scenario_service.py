from typing import Tuple, Union
import logging
import numpy as np

from mstransport.config import get_settings
from mstransport.exceptions import InvalidArgumentError
from mstransport.models.grid import Grid1D, SpeciesState
from mstransport.models.scenario import (
    DtPolicy,
    NamedScenario,
    ScenarioConfig,
    ScenarioName,
    SplittingPolicy,
)
from mstransport.models.transport import DiffusionCoefficients, ReactionMatrix

logger = logging.getLogger(__name__)

# Default grid and horizon
DEFAULT_NUM_CELLS = 140
DEFAULT_T_END = 1.0
DEFAULT_VELOCITY = 0.01

# D12 = D13: species 1 obeys an effective Fick law, species 2 diffuses uphill
SEMI_DEGENERATE_DIFFUSIVITIES = DiffusionCoefficients(d12=0.833, d13=0.833, d23=0.168)
ASYMPTOTIC_DIFFUSIVITIES = DiffusionCoefficients(d12=0.0833, d13=0.680, d23=0.168)


class ScenarioService:
    """Built-in experiments and their initial condition"""

    @staticmethod
    def initial_profile(x: float) -> Tuple[float, float, float]:
        """
        Piecewise-linear xi1 (0.8 plateau, ramp 1.6 (0.75 - x), zero tail),
        uniform xi2 = 0.2 and xi3 from the closure 1 - xi1 - xi2
        """
        if not 0.0 <= x <= 1.0:
            raise InvalidArgumentError(f"x must lie in [0, 1], got {x}")
        if x < 0.25:
            xi1 = 0.8
        elif x < 0.75:
            xi1 = 1.6 * (0.75 - x)
        else:
            xi1 = 0.0
        xi2 = 0.2
        # 1 - 0.8 - 0.2 rounds to -5.6e-17
        xi3 = max(1.0 - xi1 - xi2, 0.0)
        return xi1, xi2, xi3

    @staticmethod
    def initial_state(grid: Grid1D) -> SpeciesState:
        """initial_profile evaluated at the cell centers, t = 0"""
        profile = [ScenarioService.initial_profile(float(x)) for x in grid.centers]
        return SpeciesState(xi=np.array(profile).T, time=0.0)

    @staticmethod
    def make_scenario(
        name: Union[ScenarioName, str],
        lambda1: float = 0.0,
        lambda2: float = 0.0,
        num_cells: int = DEFAULT_NUM_CELLS,
    ) -> NamedScenario:
        """
        Reference parameter sets: J = 140 on [0, 1], T = 1, v = 0.01, Lie splitting,
        auto-stable dt. Only the plasma scenario takes reaction rates.
        """
        try:
            name = ScenarioName(name)
        except ValueError:
            known = ", ".join(s.value for s in ScenarioName)
            raise InvalidArgumentError(f"unknown scenario '{name}' (known: {known})")

        if name == ScenarioName.ASYMPTOTIC_DUNCAN_TOOR:
            diff = ASYMPTOTIC_DIFFUSIVITIES
        else:
            diff = SEMI_DEGENERATE_DIFFUSIVITIES

        if name == ScenarioName.PLASMA_WITH_REACTIONS:
            reactions = ReactionMatrix.from_channels(lambda1, lambda2)
        else:
            reactions = ReactionMatrix()

        settings = get_settings()
        cfg = ScenarioConfig(
            grid=Grid1D(num_cells=num_cells, domain_lo=0.0, domain_hi=1.0),
            t_end=DEFAULT_T_END,
            velocity=DEFAULT_VELOCITY,
            diff=diff,
            reactions=reactions,
            splitting=SplittingPolicy(),
            dt_policy=DtPolicy.auto(settings.default_safety),
        )
        logger.debug(f"Scenario {name.value}: {cfg.model_dump_json()}")
        return NamedScenario(name=name, cfg=cfg)
