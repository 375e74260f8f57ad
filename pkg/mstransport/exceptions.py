from typing import Optional


class TransportError(Exception):
    """Base error for the transport solver. `detail` is the diagnostic shown to users."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidArgumentError(TransportError, ValueError):
    """Parameters outside the admissible range (grid, step size, CFL, scenario name)"""


class SingularFluxSystemError(TransportError):
    """
    The per-face Maxwell-Stefan system has a near-zero determinant.
    Signals a degenerate composition at `face_index`.
    """

    def __init__(self, detail: str, face_index: int, determinant: float):
        super().__init__(f"{detail} (face {face_index}, det={determinant:.3e})")
        self.face_index = face_index
        self.determinant = determinant


class StepFailureError(TransportError):
    """A mole fraction left the clipping band after a sub-step"""

    def __init__(
        self,
        detail: str,
        cell_index: int,
        species: int,
        value: float,
        time: Optional[float] = None,
    ):
        where = f"cell {cell_index}, species {species + 1}, value={value:.6e}"
        if time is not None:
            where = f"t={time:.9g}, {where}"
        super().__init__(f"{detail} ({where})")
        self.cell_index = cell_index
        self.species = species
        self.value = value
        self.time = time


class RunAbortedError(TransportError):
    """A step failed inside the time loop; wraps the cause with the macro step time"""

    def __init__(self, detail: str, time: float, step: int):
        super().__init__(f"run aborted at t={time:.9g} (step {step}): {detail}")
        self.time = time
        self.step = step
