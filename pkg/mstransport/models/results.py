from pydantic import BaseModel, Field, PrivateAttr
from typing import Optional, List
import numpy as np

from mstransport.models.grid import Grid1D, SpeciesState
from mstransport.models.scenario import ScenarioConfig, NormKind
from mstransport.models.transport import NUCLEUS_WEIGHTS


class SubstepReport(BaseModel):
    """What one macro step did: sub-steps taken, clamped overshoot, step size"""
    steps_taken: int = Field(..., ge=1)
    max_xi_violation: float = Field(default=0.0, ge=0)
    dt_used: float = Field(..., gt=0)
    # Iterative splitting only
    iterations: int = 0
    converged: bool = True
    iterate_diffs: List[float] = Field(default_factory=list)


class InvariantAudit(BaseModel):
    """
    Running maxima of the conserved-quantity checks.
    Call start() with the initial state before recording.
    """
    max_closure_residual: float = 0.0
    max_sigma_drift: float = 0.0
    max_total_moles_drift: float = 0.0
    max_nuclei_drift: float = 0.0

    _sigma0: Optional[np.ndarray] = PrivateAttr(default=None)
    _moles0: Optional[np.ndarray] = PrivateAttr(default=None)

    def start(self, state: SpeciesState, grid: Grid1D) -> None:
        self._sigma0 = state.sigma.copy()
        self._moles0 = state.total_moles(grid)

    def record_closure(self, residual: float) -> None:
        self.max_closure_residual = max(self.max_closure_residual, residual)

    def record_state(self, state: SpeciesState, grid: Grid1D) -> None:
        if self._sigma0 is None:
            self.start(state, grid)
            return
        sigma_drift = float(np.max(np.abs(state.sigma - self._sigma0)))
        moles_drift = float(np.max(np.abs(state.total_moles(grid) - self._moles0)))
        self.max_sigma_drift = max(self.max_sigma_drift, sigma_drift)
        self.max_total_moles_drift = max(self.max_total_moles_drift, moles_drift)
        # hydrogen nuclei: H carries one, H2 and H2+ carry two
        nuclei_drift = abs(float(NUCLEUS_WEIGHTS @ (state.total_moles(grid) - self._moles0)))
        self.max_nuclei_drift = max(self.max_nuclei_drift, nuclei_drift)

    def passed(
        self,
        conservative: bool,
        closure_tolerance: float,
        conservation_tolerance: float,
        nuclei_conserved: bool = False,
    ) -> bool:
        if self.max_closure_residual > closure_tolerance:
            return False
        if nuclei_conserved and self.max_nuclei_drift > conservation_tolerance:
            return False
        if conservative:
            return (
                self.max_sigma_drift <= conservation_tolerance
                and self.max_total_moles_drift <= conservation_tolerance
            )
        return True


class RunResult(BaseModel):
    config: ScenarioConfig
    snapshots: List[SpeciesState]
    reports: List[SubstepReport] = Field(default_factory=list)
    wall_time: float = 0.0
    audit: InvariantAudit = Field(default_factory=InvariantAudit)

    @property
    def final_state(self) -> SpeciesState:
        return self.snapshots[-1]

    @property
    def nonconverged_steps(self) -> int:
        return sum(1 for report in self.reports if not report.converged)


class ConvergenceRow(BaseModel):
    dt: float
    species: str  # "1", "2", "3" or "max"
    norm: NormKind
    error: float
    observed_order: Optional[float] = None


class ConvergenceTable(BaseModel):
    reference_dt: float
    rows: List[ConvergenceRow] = Field(default_factory=list)

    def select(self, norm: NormKind, species: str = "max") -> List[ConvergenceRow]:
        """Rows for one norm/species, ordered from coarsest to finest dt"""
        rows = [r for r in self.rows if r.norm == norm and r.species == species]
        return sorted(rows, key=lambda r: -r.dt)

    def orders(self, norm: NormKind, species: str = "max") -> List[float]:
        return [r.observed_order for r in self.select(norm, species) if r.observed_order is not None]


class RunManifest(BaseModel):
    app_name: str
    code_version: str
    config: ScenarioConfig
    species_names: List[str]
    audit: InvariantAudit
    audit_passed: bool
    snapshot_count: int
    nonconverged_steps: int = 0
    wall_time: float = 0.0
    output_files: List[str] = Field(default_factory=list)
