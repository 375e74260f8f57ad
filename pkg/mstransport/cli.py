"""
Command-line entry point for the Maxwell-Stefan transport solver

Usage:
    python -m mstransport run --scenario semi-degenerate [--splitting lie|strang|iterative] [--iters m]
                              [--dt x|auto] [--t-end x] [--out dir] [--snapshots n]
    python -m mstransport converge --scenario semi-degenerate --dt-ladder 1e-3,5e-4,2.5e-4
    python -m mstransport flux-check

Settings (tolerances, log level, default output directory) come from
MSTRANSPORT_* environment variables or a .env file.
"""

from pathlib import Path
from typing import List, Optional
import argparse
import logging
import math
import sys

from pydantic import BaseModel

from mstransport import __version__
from mstransport.config import get_settings
from mstransport.exceptions import TransportError
from mstransport.models.grid import Grid1D
from mstransport.models.results import RunManifest
from mstransport.models.scenario import (
    DiffusionIntegrator,
    DtPolicy,
    OutputPolicy,
    ScenarioConfig,
    ScenarioName,
    SplittingMethod,
    SplittingPolicy,
)
from mstransport.models.transport import ReactionMatrix
from mstransport.services.convergence_service import ConvergenceService
from mstransport.services.flux_service import FluxService
from mstransport.services.output_service import MANIFEST_FILE, OutputService
from mstransport.services.scenario_service import ScenarioService
from mstransport.services.splitting_service import SplittingService

logger = logging.getLogger(__name__)


class Command(BaseModel):
    """Resolved command-line request"""
    action: str
    scenario: ScenarioName = ScenarioName.SEMI_DEGENERATE_UPHILL
    splitting: SplittingMethod = SplittingMethod.LIE
    iters: int = 2
    dt: Optional[float] = None  # None = auto-stable
    t_end: Optional[float] = None
    velocity: Optional[float] = None
    num_cells: Optional[int] = None
    lambda1: float = 0.0
    lambda2: float = 0.0
    integrator: DiffusionIntegrator = DiffusionIntegrator.EULER
    out: str = "results"
    snapshots: int = 2
    dt_ladder: List[float] = []
    num_states: int = 100
    seed: int = 0


def _finite_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: '{text}'")
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"not a finite number: '{text}'")
    return value


def _positive_float(text: str) -> float:
    value = _finite_float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: '{text}'")
    return value


def _nonnegative_float(text: str) -> float:
    value = _finite_float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must not be negative: '{text}'")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: '{text}'")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: '{text}'")
    return value


def _dt_value(text: str) -> Optional[float]:
    if text.strip().lower() == "auto":
        return None
    return _positive_float(text)


def _dt_ladder(text: str) -> List[float]:
    return [_positive_float(part) for part in text.split(",") if part.strip()]


def _add_scenario_options(parser: argparse.ArgumentParser, default_out: str) -> None:
    parser.add_argument(
        '--scenario',
        default=ScenarioName.SEMI_DEGENERATE_UPHILL.value,
        choices=[s.value for s in ScenarioName],
        help='Built-in experiment (default: semi-degenerate)'
    )
    parser.add_argument(
        '--splitting',
        default=SplittingMethod.LIE.value,
        choices=[m.value for m in SplittingMethod],
        help='Splitting driver (default: lie)'
    )
    parser.add_argument('--iters', type=_positive_int, default=2, help='Sweep pairs for iterative splitting')
    parser.add_argument(
        '--integrator',
        default=DiffusionIntegrator.EULER.value,
        choices=[i.value for i in DiffusionIntegrator],
        help='Diffusion time integrator (default: euler)'
    )
    parser.add_argument('--t-end', type=_nonnegative_float, default=None, help='End time (default: 1)')
    parser.add_argument('--velocity', type=_finite_float, default=None, help='Override the convection velocity')
    parser.add_argument('--num-cells', type=_positive_int, default=None, help='Override the grid size J')
    parser.add_argument('--lambda1', type=_nonnegative_float, default=0.0, help='Rate of H2 + e -> H2+ + 2e')
    parser.add_argument('--lambda2', type=_nonnegative_float, default=0.0, help='Rate of H2 + e -> 2H + e')
    parser.add_argument('--out', default=default_out, help=f'Output directory (default: {default_out})')


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog='mstransport',
        description='1D Maxwell-Stefan diffusion-convection-reaction solver with operator splitting'
    )
    subparsers = parser.add_subparsers(dest='action', required=True)

    run_parser = subparsers.add_parser('run', help='Run a scenario and write snapshots.csv + manifest.txt')
    _add_scenario_options(run_parser, settings.output_dir)
    run_parser.add_argument('--dt', type=_dt_value, default=None, help="Macro time step or 'auto' (default)")
    run_parser.add_argument('--snapshots', type=_positive_int, default=2, help='Number of stored states')

    converge_parser = subparsers.add_parser('converge', help='Measure empirical splitting orders')
    _add_scenario_options(converge_parser, settings.output_dir)
    converge_parser.add_argument(
        '--dt-ladder',
        type=_dt_ladder,
        required=True,
        help='Comma-separated, strictly decreasing time steps'
    )

    flux_parser = subparsers.add_parser('flux-check', help='Run the flux solver property suite')
    flux_parser.add_argument('--num-states', type=_positive_int, default=100, help='Random states to test')
    flux_parser.add_argument('--seed', type=int, default=0, help='Random seed')

    return parser


def parse_args(argv: Optional[List[str]] = None) -> Command:
    """Parse argv into a Command; usage errors exit with code 2"""
    parser = build_parser()
    args = parser.parse_args(argv)
    values = {key: value for key, value in vars(args).items() if value is not None}
    if args.action == 'converge' and len(args.dt_ladder) == 0:
        parser.error("--dt-ladder needs at least one time step")
    return Command(**values)


def build_config(command: Command) -> ScenarioConfig:
    """Built-in scenario with the command-line overrides applied"""
    cfg = ScenarioService.make_scenario(command.scenario, command.lambda1, command.lambda2).cfg
    changes = {
        'splitting': SplittingPolicy(method=command.splitting, iterations=command.iters),
        'diffusion_integrator': command.integrator,
        'output': OutputPolicy(snapshots=command.snapshots, directory=command.out),
    }
    if command.dt is not None:
        changes['dt_policy'] = DtPolicy.fixed(command.dt, safety=cfg.dt_policy.safety)
    if command.t_end is not None:
        changes['t_end'] = command.t_end
    if command.velocity is not None:
        changes['velocity'] = command.velocity
    if command.num_cells is not None:
        changes['grid'] = Grid1D(num_cells=command.num_cells)
    if command.scenario != ScenarioName.PLASMA_WITH_REACTIONS and (command.lambda1 or command.lambda2):
        changes['reactions'] = ReactionMatrix.from_channels(command.lambda1, command.lambda2)
    return cfg.with_updates(**changes)


def run_command(command: Command) -> int:
    settings = get_settings()
    cfg = build_config(command)
    result = SplittingService.run(cfg)
    files = OutputService.write_snapshots(result, command.out)

    audit_passed = result.audit.passed(
        cfg.is_conservative,
        settings.closure_tolerance,
        settings.conservation_tolerance,
        cfg.conserves_nuclei,
    )
    manifest_path = Path(command.out) / MANIFEST_FILE
    manifest = RunManifest(
        app_name=settings.app_name,
        code_version=__version__,
        config=cfg,
        species_names=settings.species_names_list,
        audit=result.audit,
        audit_passed=audit_passed,
        snapshot_count=len(result.snapshots),
        nonconverged_steps=result.nonconverged_steps,
        wall_time=result.wall_time,
        output_files=[str(p) for p in files] + [str(manifest_path)],
    )
    OutputService.write_manifest(manifest, command.out)

    audit = result.audit
    print(f"Scenario:            {command.scenario.value} ({cfg.splitting.method.value})")
    print(f"Snapshots:           {len(result.snapshots)}")
    print(f"Max closure residual {audit.max_closure_residual:.3e}")
    print(f"Max sigma drift      {audit.max_sigma_drift:.3e}")
    print(f"Max moles drift      {audit.max_total_moles_drift:.3e}")
    print(f"Max nuclei drift     {audit.max_nuclei_drift:.3e}")
    print(f"Wall time            {result.wall_time:.2f}s")

    if not audit_passed:
        logger.warning(f"Invariant audit exceeded tolerance: {audit.model_dump()}")
        print("Error: invariant audit exceeded tolerance, see manifest.txt", file=sys.stderr)
        return 1
    return 0


def converge_command(command: Command) -> int:
    cfg = build_config(command)
    table = ConvergenceService.convergence_study(cfg, command.dt_ladder)
    path = OutputService.write_convergence(table, command.out)

    print(f"{'dt':>12} {'norm':>6} {'error':>12} {'order':>8}")
    for row in table.rows:
        if row.species != "max":
            continue
        order = "" if row.observed_order is None else f"{row.observed_order:.3f}"
        print(f"{row.dt:12.4e} {row.norm.value:>6} {row.error:12.4e} {order:>8}")
    print(f"Wrote {path}")
    return 0


def flux_check_command(command: Command) -> int:
    report = FluxService.audit_flux_properties(command.num_states, command.seed)
    print(f"States tested:           {report.num_states}")
    print(f"Max plug-back residual:  {report.max_plug_back_residual:.3e}")
    print(f"Max closure residual:    {report.max_closure_residual:.3e}")
    print(f"Max Fickian error:       {report.max_fickian_error:.3e}")
    print(f"Max decoupling error:    {report.max_decoupling_error:.3e}")
    if not report.passed():
        print("Error: flux property suite exceeded tolerance", file=sys.stderr)
        return 1
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    command = parse_args(argv)
    logging.basicConfig(
        level=get_settings().log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    handlers = {
        'run': run_command,
        'converge': converge_command,
        'flux-check': flux_check_command,
    }
    try:
        return handlers[command.action](command)
    except TransportError as e:
        logger.error(e.detail)
        print(f"Error: {e.detail}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
