from pydantic import BaseModel
from typing import Optional, Tuple
import logging
import numpy as np

from mstransport.config import get_settings
from mstransport.exceptions import SingularFluxSystemError
from mstransport.models.grid import Grid1D, SpeciesState
from mstransport.models.results import InvariantAudit
from mstransport.models.transport import DiffusionCoefficients, FaceState, FluxField

logger = logging.getLogger(__name__)


def assemble_system(
    xi_face: np.ndarray,
    grad: np.ndarray,
    diff: DiffusionCoefficients,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Build the stacked 3x3 Maxwell-Stefan systems M @ N = rhs, one per face.

    xi_face: (3, nf) face mole fractions
    grad:    (2, nf) gradients of species 1 and 2
    Row 1 is the species-1 relation, row 2 the species-2 relation,
    row 3 the closure N1 + N2 + N3 = 0.
    """
    x1, x2, x3 = xi_face
    nf = xi_face.shape[1]
    inv12, inv13, inv23 = 1.0 / diff.d12, 1.0 / diff.d13, 1.0 / diff.d23

    matrix = np.empty((nf, 3, 3))
    matrix[:, 0, 0] = x2 * inv12 + x3 * inv13
    matrix[:, 0, 1] = -x1 * inv12
    matrix[:, 0, 2] = -x1 * inv13
    matrix[:, 1, 0] = -x2 * inv12
    matrix[:, 1, 1] = x1 * inv12 + x3 * inv23
    matrix[:, 1, 2] = -x2 * inv23
    matrix[:, 2, :] = 1.0

    rhs = np.zeros((nf, 3))
    rhs[:, 0] = -grad[0]
    rhs[:, 1] = -grad[1]
    return matrix, rhs


def solve_systems(
    matrix: np.ndarray,
    rhs: np.ndarray,
    face_offset: int = 0,
) -> np.ndarray:
    """
    LU solve (LAPACK gesv, partial pivoting) of every stacked system.
    Returns fluxes with shape (3, nf). Raises on a near-singular face.
    """
    settings = get_settings()

    det = np.linalg.det(matrix)
    scale = np.max(np.abs(matrix), axis=(1, 2))
    singular = np.abs(det) < settings.singular_tolerance * scale ** 3
    if np.any(singular):
        face = int(np.argmax(singular))
        raise SingularFluxSystemError(
            "Maxwell-Stefan system is singular (degenerate composition)",
            face_index=face + face_offset,
            determinant=float(det[face]),
        )

    return np.linalg.solve(matrix, rhs[..., np.newaxis])[..., 0].T


class FluxService:
    """Maxwell-Stefan molar fluxes for the three-species closure"""

    @staticmethod
    def solve_face_flux(
        fs: FaceState,
        diff: DiffusionCoefficients,
        face_index: int = 0,
    ) -> Tuple[float, float, float]:
        """Fluxes (N1, N2, N3) at a single face"""
        xi_face = np.asarray(fs.xi_face, dtype=float).reshape(3, 1)
        grad = np.asarray(fs.grad, dtype=float).reshape(2, 1)
        matrix, rhs = assemble_system(xi_face, grad, diff)
        n = solve_systems(matrix, rhs, face_offset=face_index)
        return float(n[0, 0]), float(n[1, 0]), float(n[2, 0])

    @staticmethod
    def interior_fluxes(
        xi: np.ndarray,
        diff: DiffusionCoefficients,
        dx: float,
        composition: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """
        Fluxes at the num_cells - 1 interior faces, shape (3, num_cells - 1).

        Face j+1/2 uses the arithmetic mean of the two neighbouring cells for the
        matrix coefficients (taken from `composition` when given) and the
        central difference of `xi` for the gradients.
        """
        weights = xi if composition is None else composition
        xi_face = 0.5 * (weights[:, :-1] + weights[:, 1:])
        grad = (xi[:2, 1:] - xi[:2, :-1]) / dx
        matrix, rhs = assemble_system(xi_face, grad, diff)
        return solve_systems(matrix, rhs, face_offset=1)

    @staticmethod
    def face_fluxes(
        xi: np.ndarray,
        diff: DiffusionCoefficients,
        dx: float,
        composition: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """All num_cells + 1 faces; the two boundary faces are no-flux"""
        n = np.zeros((3, xi.shape[1] + 1))
        if xi.shape[1] > 1:
            n[:, 1:-1] = FluxService.interior_fluxes(xi, diff, dx, composition)
        return n

    @staticmethod
    def compute_flux_field(
        state: SpeciesState,
        diff: DiffusionCoefficients,
        grid: Grid1D,
        composition: Optional[np.ndarray] = None,
        audit: Optional[InvariantAudit] = None,
    ) -> FluxField:
        if state.num_cells != grid.num_cells:
            raise ValueError(f"state has {state.num_cells} cells, grid has {grid.num_cells}")
        flux = FluxField(n=FluxService.face_fluxes(state.xi, diff, grid.dx, composition))
        if audit is not None:
            audit.record_closure(flux.closure_residual)
        return flux

    @staticmethod
    def audit_flux_properties(num_states: int = 100, seed: int = 0) -> "FluxPropertyReport":
        """
        Random-state property suite for the face solver.

        Draws compositions on the simplex, gradients in [-2, 2] and diffusivities
        in [0.05, 1], then reports the worst plug-back residual of the two
        Maxwell-Stefan relations, the worst closure residual, the worst
        deviation from Fick's law for equal diffusivities and the worst change
        of N1 under a re-split of species 2/3 when D12 = D13.
        """
        rng = np.random.default_rng(seed)
        xi = rng.dirichlet(np.ones(3), size=num_states).T
        grad = rng.uniform(-2.0, 2.0, size=(2, num_states))

        plug_back = 0.0
        closure = 0.0
        for k in range(num_states):
            d12, d13, d23 = rng.uniform(0.05, 1.0, size=3)
            diff = DiffusionCoefficients(d12=d12, d13=d13, d23=d23)
            matrix, rhs = assemble_system(xi[:, k:k + 1], grad[:, k:k + 1], diff)
            n = solve_systems(matrix, rhs)[:, 0]
            n1, n2, n3 = n
            x1, x2, x3 = xi[:, k]
            row1 = (x2 * n1 - x1 * n2) / d12 + (x3 * n1 - x1 * n3) / d13 + grad[0, k]
            row2 = (x1 * n2 - x2 * n1) / d12 + (x3 * n2 - x2 * n3) / d23 + grad[1, k]
            plug_back = max(plug_back, abs(row1), abs(row2))
            closure = max(closure, abs(n1 + n2 + n3))

        d_equal = 0.5
        equal = DiffusionCoefficients(d12=d_equal, d13=d_equal, d23=d_equal)
        matrix, rhs = assemble_system(xi, grad, equal)
        n = solve_systems(matrix, rhs)
        grads = np.vstack([grad, -grad.sum(axis=0)])
        fickian = float(np.max(np.abs(n + d_equal * grads)))

        semi = DiffusionCoefficients(d12=0.833, d13=0.833, d23=0.168)
        matrix, rhs = assemble_system(xi, grad, semi)
        n_a = solve_systems(matrix, rhs)
        # Same xi1, sigma and d(xi1)/dx with species 2/3 re-split and a new d(xi2)/dx
        share = rng.uniform(0.0, 1.0, size=num_states)
        rest = xi[1] + xi[2]
        resplit = np.vstack([xi[0], share * rest, (1.0 - share) * rest])
        regrad = np.vstack([grad[0], rng.uniform(-2.0, 2.0, size=num_states)])
        matrix, rhs = assemble_system(resplit, regrad, semi)
        n_b = solve_systems(matrix, rhs)
        decoupling = float(np.max(np.abs(n_a[0] - n_b[0])))

        report = FluxPropertyReport(
            num_states=num_states,
            max_plug_back_residual=plug_back,
            max_closure_residual=closure,
            max_fickian_error=fickian,
            max_decoupling_error=decoupling,
        )
        logger.info(f"Flux property suite over {num_states} states: {report.model_dump()}")
        return report


class FluxPropertyReport(BaseModel):
    num_states: int
    max_plug_back_residual: float
    max_closure_residual: float
    max_fickian_error: float
    max_decoupling_error: float

    def passed(self) -> bool:
        return (
            self.max_plug_back_residual < 1e-11
            and self.max_closure_residual < 1e-13
            and self.max_fickian_error < 1e-12
            and self.max_decoupling_error < 1e-12
        )
