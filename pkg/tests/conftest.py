import numpy as np
import pytest

from mstransport.models.grid import Grid1D
from mstransport.models.scenario import ScenarioConfig, ScenarioName
from mstransport.models.transport import DiffusionCoefficients
from mstransport.services.scenario_service import ScenarioService


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def small_grid() -> Grid1D:
    return Grid1D(num_cells=20)


@pytest.fixture
def full_grid() -> Grid1D:
    return Grid1D(num_cells=140)


@pytest.fixture
def semi_diff() -> DiffusionCoefficients:
    return DiffusionCoefficients(d12=0.833, d13=0.833, d23=0.168)


@pytest.fixture
def equal_diff() -> DiffusionCoefficients:
    return DiffusionCoefficients(d12=0.5, d13=0.5, d23=0.5)


@pytest.fixture
def semi_cfg() -> ScenarioConfig:
    """Default semi-degenerate scenario on J = 140"""
    return ScenarioService.make_scenario(ScenarioName.SEMI_DEGENERATE_UPHILL).cfg


@pytest.fixture
def coarse_cfg() -> ScenarioConfig:
    """Semi-degenerate scenario on J = 20, short horizon"""
    return ScenarioService.make_scenario(ScenarioName.SEMI_DEGENERATE_UPHILL, num_cells=20).cfg.with_updates(
        t_end=0.01
    )
