from pydantic import BaseModel, Field, field_validator
from typing import Optional, List, Tuple
import numpy as np

# Species index order (1, 2, 3) = (H, H2, H2+)
SPECIES_H = 0
SPECIES_H2 = 1
SPECIES_H2_PLUS = 2

# Hydrogen nuclei carried by one particle of each species
NUCLEUS_WEIGHTS = np.array([1.0, 2.0, 2.0])


class DiffusionCoefficients(BaseModel):
    """Binary Maxwell-Stefan diffusivities"""
    d12: float = Field(..., gt=0, allow_inf_nan=False)
    d13: float = Field(..., gt=0, allow_inf_nan=False)
    d23: float = Field(..., gt=0, allow_inf_nan=False)

    class Config:
        frozen = True

    @property
    def max_value(self) -> float:
        return max(self.d12, self.d13, self.d23)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.d12, self.d13, self.d23)


class ReactionMatrix(BaseModel):
    """
    Linear reaction source S = Lambda @ xi.

    Built from the two channel rates acting on H2:
    - lambda1: H2 + e -> H2+ + 2e
    - lambda2: H2 + e -> 2H + e
    An explicit 3x3 matrix in `entries` takes precedence over the channels.
    """
    lambda1: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    lambda2: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    entries: Optional[List[List[float]]] = None

    class Config:
        frozen = True

    @field_validator("entries")
    @classmethod
    def check_entries(cls, value: Optional[List[List[float]]]) -> Optional[List[List[float]]]:
        if value is None:
            return value
        matrix = np.asarray(value, dtype=float)
        if matrix.shape != (3, 3):
            raise ValueError(f"reaction matrix must be 3x3, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("reaction matrix entries must be finite")
        return value

    @classmethod
    def from_channels(cls, lambda1: float = 0.0, lambda2: float = 0.0) -> "ReactionMatrix":
        return cls(lambda1=lambda1, lambda2=lambda2)

    @classmethod
    def from_matrix(cls, matrix) -> "ReactionMatrix":
        return cls(entries=np.asarray(matrix, dtype=float).tolist())

    @property
    def matrix(self) -> np.ndarray:
        if self.entries is not None:
            return np.array(self.entries, dtype=float)

        lam = np.zeros((3, 3))
        lam[SPECIES_H, SPECIES_H2] = 2.0 * self.lambda2
        lam[SPECIES_H2, SPECIES_H2] = -(self.lambda1 + self.lambda2)
        lam[SPECIES_H2_PLUS, SPECIES_H2] = self.lambda1
        return lam

    @property
    def is_zero(self) -> bool:
        return not np.any(self.matrix)

    @property
    def conserves_nuclei(self) -> bool:
        """True when every column keeps the hydrogen nucleus count (the two channels always do)"""
        matrix = self.matrix
        scale = max(float(np.max(np.abs(matrix))), 1.0)
        return bool(np.all(np.abs(NUCLEUS_WEIGHTS @ matrix) <= 1e-12 * scale))


class FaceState(BaseModel):
    """Face-interpolated mole fractions and the gradients of species 1 and 2"""
    xi_face: Tuple[float, float, float]
    grad: Tuple[float, float]

    class Config:
        frozen = True


class FluxField(BaseModel):
    """Molar fluxes n[i, f] of species i through face f (num_faces = num_cells + 1)"""
    n: np.ndarray

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @field_validator("n", mode="before")
    @classmethod
    def coerce_n(cls, value) -> np.ndarray:
        n = np.array(value, dtype=float)
        if n.ndim != 2 or n.shape[0] != 3:
            raise ValueError(f"flux field must have shape (3, num_faces), got {n.shape}")
        n.setflags(write=False)
        return n

    @property
    def num_faces(self) -> int:
        return self.n.shape[1]

    @property
    def closure_residual(self) -> float:
        """Largest |N1 + N2 + N3| over all faces"""
        return float(np.max(np.abs(self.n.sum(axis=0))))
