from typing import Union
import logging
import math
import numpy as np

from mstransport.exceptions import InvalidArgumentError
from mstransport.models.grid import Grid1D, SpeciesState
from mstransport.models.scenario import NormKind
from mstransport.models.transport import DiffusionCoefficients

logger = logging.getLogger(__name__)


class GridService:
    """Step-size bounds and discrete norms on the cell-centered grid"""

    @staticmethod
    def diffusive_bound(diff: DiffusionCoefficients, dx: float) -> float:
        """dx^2 / (2 D_max): explicit Euler bound for the largest binary diffusivity"""
        if not dx > 0:
            raise InvalidArgumentError(f"dx must be positive, got {dx}")
        d_max = diff.max_value
        if not (d_max > 0 and math.isfinite(d_max)):
            raise InvalidArgumentError(f"diffusivities must be positive and finite, got {diff.as_tuple()}")
        return dx * dx / (2.0 * d_max)

    @staticmethod
    def convective_bound(dx: float, velocity: float) -> float:
        """dx / |v| (unit Courant number); infinite when v = 0"""
        if not dx > 0:
            raise InvalidArgumentError(f"dx must be positive, got {dx}")
        if velocity == 0.0:
            return math.inf
        return dx / abs(velocity)

    @staticmethod
    def stable_dt(
        diff: DiffusionCoefficients,
        dx: float,
        velocity: float,
        safety: float = 0.9,
    ) -> float:
        """
        Largest explicit step: safety * min(dx^2 / (2 D_max), dx / |v|).
        The convective bound is omitted for v = 0.
        """
        if not 0.0 < safety <= 1.0:
            raise InvalidArgumentError(f"safety must lie in (0, 1], got {safety}")
        bound = min(
            GridService.diffusive_bound(diff, dx),
            GridService.convective_bound(dx, velocity),
        )
        return safety * bound

    @staticmethod
    def norm(
        a: SpeciesState,
        b: SpeciesState,
        which: Union[NormKind, str],
        grid: Grid1D,
    ) -> np.ndarray:
        """
        Per-species distance between two states on the same grid and time level.
        L1 and L2 are weighted by dx; Linf is the plain maximum.
        """
        which = NormKind(which)
        if a.xi.shape != b.xi.shape or a.num_cells != grid.num_cells:
            raise InvalidArgumentError(
                f"grid mismatch: {a.xi.shape} vs {b.xi.shape} on {grid.num_cells} cells"
            )
        if not math.isclose(a.time, b.time, rel_tol=1e-12, abs_tol=1e-15):
            raise InvalidArgumentError(f"time mismatch: {a.time} vs {b.time}")

        delta = np.abs(a.xi - b.xi)
        if which == NormKind.L1:
            return grid.dx * delta.sum(axis=1)
        if which == NormKind.L2:
            return np.sqrt(grid.dx * (delta * delta).sum(axis=1))
        return delta.max(axis=1)
