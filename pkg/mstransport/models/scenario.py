from pydantic import BaseModel, Field, model_validator
from typing import Optional
from enum import Enum

from mstransport.models.grid import Grid1D
from mstransport.models.transport import DiffusionCoefficients, ReactionMatrix


class SplittingMethod(str, Enum):
    LIE = "lie"
    STRANG = "strang"
    ITERATIVE = "iterative"


class DtMode(str, Enum):
    AUTO = "auto"
    FIXED = "fixed"


class DiffusionIntegrator(str, Enum):
    EULER = "euler"
    HEUN = "heun"


class NormKind(str, Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"


class ScenarioName(str, Enum):
    SEMI_DEGENERATE_UPHILL = "semi-degenerate"
    ASYMPTOTIC_DUNCAN_TOOR = "asymptotic"
    PLASMA_WITH_REACTIONS = "plasma"


class SplittingPolicy(BaseModel):
    method: SplittingMethod = SplittingMethod.LIE
    iterations: int = Field(default=2, ge=1)  # sweep pairs, iterative only

    class Config:
        frozen = True


class DtPolicy(BaseModel):
    """AutoStable(safety) or Fixed(dt)"""
    mode: DtMode = DtMode.AUTO
    safety: float = Field(default=0.9, gt=0, le=1)
    dt: Optional[float] = Field(default=None, gt=0, allow_inf_nan=False)

    class Config:
        frozen = True

    @model_validator(mode="after")
    def check_fixed_dt(self) -> "DtPolicy":
        if self.mode == DtMode.FIXED and self.dt is None:
            raise ValueError("fixed dt policy requires dt")
        return self

    @classmethod
    def auto(cls, safety: float = 0.9) -> "DtPolicy":
        return cls(mode=DtMode.AUTO, safety=safety)

    @classmethod
    def fixed(cls, dt: float, safety: float = 0.9) -> "DtPolicy":
        return cls(mode=DtMode.FIXED, dt=dt, safety=safety)


class OutputPolicy(BaseModel):
    """Snapshot cadence (number of stored states, evenly spread over [0, t_end]) and output directory"""
    snapshots: int = Field(default=2, ge=1)
    directory: str = "results"

    class Config:
        frozen = True


class ScenarioConfig(BaseModel):
    grid: Grid1D
    t_end: float = Field(default=1.0, ge=0, allow_inf_nan=False)
    velocity: float = Field(default=0.01, allow_inf_nan=False)
    diff: DiffusionCoefficients
    reactions: ReactionMatrix = Field(default_factory=ReactionMatrix)
    splitting: SplittingPolicy = Field(default_factory=SplittingPolicy)
    dt_policy: DtPolicy = Field(default_factory=DtPolicy)
    diffusion_integrator: DiffusionIntegrator = DiffusionIntegrator.EULER
    output: OutputPolicy = Field(default_factory=OutputPolicy)

    class Config:
        frozen = True

    @property
    def is_conservative(self) -> bool:
        """No convection and no reactions: moles and sigma are invariants of the run"""
        return self.velocity == 0.0 and self.reactions.is_zero

    @property
    def conserves_nuclei(self) -> bool:
        """No convection and nucleus-preserving reactions: total hydrogen nuclei are invariant"""
        return self.velocity == 0.0 and self.reactions.conserves_nuclei

    def with_updates(self, **changes) -> "ScenarioConfig":
        """Validated copy with some top-level fields replaced"""
        data = self.model_dump()
        data.update(changes)
        return ScenarioConfig.model_validate(data)


class NamedScenario(BaseModel):
    name: ScenarioName
    cfg: ScenarioConfig

    class Config:
        frozen = True
