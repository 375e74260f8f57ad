from pydantic import BaseModel, Field, field_validator, model_validator
import numpy as np

NUM_SPECIES = 3


class Grid1D(BaseModel):
    """Uniform cell-centered finite-volume grid on [domain_lo, domain_hi]"""
    num_cells: int = Field(..., gt=0)
    domain_lo: float = Field(default=0.0, allow_inf_nan=False)
    domain_hi: float = Field(default=1.0, allow_inf_nan=False)

    class Config:
        frozen = True

    @model_validator(mode="after")
    def check_domain(self) -> "Grid1D":
        if not self.domain_hi > self.domain_lo:
            raise ValueError("domain_hi must be greater than domain_lo")
        return self

    @property
    def length(self) -> float:
        return self.domain_hi - self.domain_lo

    @property
    def dx(self) -> float:
        return self.length / self.num_cells

    @property
    def num_faces(self) -> int:
        return self.num_cells + 1

    @property
    def centers(self) -> np.ndarray:
        return self.domain_lo + (np.arange(self.num_cells) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return self.domain_lo + np.arange(self.num_faces) * self.dx


class SpeciesState(BaseModel):
    """
    Mole fractions xi[i, j] of species i in cell j at one time level.
    The array is stored read-only; operators always return a new state.
    """
    xi: np.ndarray
    time: float = Field(default=0.0, allow_inf_nan=False)

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @field_validator("xi", mode="before")
    @classmethod
    def coerce_xi(cls, value) -> np.ndarray:
        xi = np.array(value, dtype=float)
        if xi.ndim != 2 or xi.shape[0] != NUM_SPECIES or xi.shape[1] == 0:
            raise ValueError(f"xi must have shape (3, num_cells), got {xi.shape}")
        if not np.all(np.isfinite(xi)):
            raise ValueError("xi contains non-finite values")
        xi.setflags(write=False)
        return xi

    @property
    def num_cells(self) -> int:
        return self.xi.shape[1]

    @property
    def sigma(self) -> np.ndarray:
        """Pointwise sum of mole fractions"""
        return self.xi.sum(axis=0)

    def total_moles(self, grid: Grid1D) -> np.ndarray:
        """Per-species cell sum of xi * dx"""
        return self.xi.sum(axis=1) * grid.dx

    def evolve(self, xi: np.ndarray, time: float) -> "SpeciesState":
        return SpeciesState(xi=xi, time=time)
