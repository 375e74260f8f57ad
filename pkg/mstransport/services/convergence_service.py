from typing import List, Optional
import logging
import math
import numpy as np

from mstransport.exceptions import InvalidArgumentError
from mstransport.models.grid import SpeciesState
from mstransport.models.results import ConvergenceRow, ConvergenceTable
from mstransport.models.scenario import DtPolicy, NormKind, OutputPolicy, ScenarioConfig
from mstransport.services.grid_service import GridService
from mstransport.services.splitting_service import SplittingService

logger = logging.getLogger(__name__)

REFERENCE_REFINEMENT = 8


def check_ladder(t_end: float, dt_ladder: List[float]) -> None:
    if not dt_ladder:
        raise InvalidArgumentError("dt ladder is empty")
    if any(dt <= 0 for dt in dt_ladder):
        raise InvalidArgumentError(f"dt ladder entries must be positive: {dt_ladder}")
    if any(a <= b for a, b in zip(dt_ladder, dt_ladder[1:])):
        raise InvalidArgumentError(f"dt ladder must be strictly decreasing: {dt_ladder}")
    for dt in dt_ladder:
        steps = t_end / dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise InvalidArgumentError(f"dt={dt} does not divide t_end={t_end}")


def observed_order(coarse_error: float, fine_error: float, coarse_dt: float, fine_dt: float) -> Optional[float]:
    """log(e_coarse / e_fine) / log(dt_coarse / dt_fine); log2 of the error ratio for halving"""
    if coarse_error <= 0.0 or fine_error <= 0.0:
        return None
    return math.log(coarse_error / fine_error) / math.log(coarse_dt / fine_dt)


class ConvergenceService:
    """Empirical temporal order of the splitting drivers against a fine-dt reference run"""

    @staticmethod
    def final_state(cfg: ScenarioConfig, dt: float) -> SpeciesState:
        fixed = cfg.with_updates(
            dt_policy=DtPolicy.fixed(dt, safety=cfg.dt_policy.safety),
            output=OutputPolicy(snapshots=1, directory=cfg.output.directory),
        )
        return SplittingService.run(fixed).final_state

    @staticmethod
    def convergence_study(cfg: ScenarioConfig, dt_ladder: List[float]) -> ConvergenceTable:
        """
        Run cfg at every dt of the ladder plus a reference at dt_min / 8 and
        tabulate per-species errors at t_end (with a "max" row over species)
        for each norm, with observed orders between consecutive ladder entries.
        """
        check_ladder(cfg.t_end, dt_ladder)
        reference_dt = dt_ladder[-1] / REFERENCE_REFINEMENT
        logger.info(
            f"Convergence study ({cfg.splitting.method.value}): ladder {dt_ladder}, reference dt={reference_dt:.6g}"
        )

        reference = ConvergenceService.final_state(cfg, reference_dt)
        results = [(dt, ConvergenceService.final_state(cfg, dt)) for dt in dt_ladder]

        table = ConvergenceTable(reference_dt=reference_dt)
        labels = ["1", "2", "3", "max"]
        for norm in NormKind:
            errors = []
            for _, state in results:
                per_species = GridService.norm(state, reference, norm, cfg.grid)
                errors.append(np.append(per_species, per_species.max()))

            for k, dt in enumerate(dt_ladder):
                for s, label in enumerate(labels):
                    order = None
                    if k > 0:
                        order = observed_order(errors[k - 1][s], errors[k][s], dt_ladder[k - 1], dt)
                    table.rows.append(
                        ConvergenceRow(
                            dt=dt,
                            species=label,
                            norm=norm,
                            error=float(errors[k][s]),
                            observed_order=order,
                        )
                    )

        for norm in NormKind:
            logger.info(f"Observed orders ({norm.value}, max over species): {table.orders(norm)}")
        return table
