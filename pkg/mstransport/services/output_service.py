from pathlib import Path
from typing import Dict, List, Union
import csv
import logging
import os
import tempfile
import numpy as np

from mstransport.exceptions import TransportError
from mstransport.models.grid import SpeciesState
from mstransport.models.results import ConvergenceTable, RunManifest, RunResult

logger = logging.getLogger(__name__)

SNAPSHOT_FILE = "snapshots.csv"
MANIFEST_FILE = "manifest.txt"
CONVERGENCE_FILE = "convergence.csv"

SNAPSHOT_HEADER = ["t", "x", "xi1", "xi2", "xi3"]
CONVERGENCE_HEADER = ["dt", "species", "norm", "error", "observed_order"]


def format_number(value: float) -> str:
    """17 significant digits: lossless for IEEE doubles"""
    return f"{value:.17g}"


def _atomic_write(path: Path, text: str) -> None:
    handle, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise


def _prepare_directory(directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise TransportError(f"cannot create output directory {directory}: {e}")
    return directory


class OutputService:
    """CSV snapshots, run manifest and convergence tables"""

    @staticmethod
    def write_snapshots(result: RunResult, directory: Union[str, Path]) -> List[Path]:
        """
        One row per (snapshot, cell) ordered by time then x, header t,x,xi1,xi2,xi3.
        Returns the written file paths.
        """
        directory = _prepare_directory(directory)
        path = directory / SNAPSHOT_FILE
        centers = result.config.grid.centers

        try:
            with path.open("w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(SNAPSHOT_HEADER)
                for state in result.snapshots:
                    t = format_number(state.time)
                    for j, x in enumerate(centers):
                        writer.writerow(
                            [t, format_number(x)] + [format_number(v) for v in state.xi[:, j]]
                        )
        except OSError as e:
            raise TransportError(f"failed to write snapshots to {path}: {e}")

        logger.info(f"Wrote {len(result.snapshots)} snapshots to {path}")
        return [path]

    @staticmethod
    def read_snapshots(path: Union[str, Path]) -> List[SpeciesState]:
        """Parse a snapshots.csv back into states, one per distinct time"""
        path = Path(path)
        rows: Dict[float, List[List[float]]] = {}
        try:
            with path.open("r", encoding="utf-8", newline="") as f:
                reader = csv.DictReader(f)
                for row in reader:
                    t = float(row["t"])
                    rows.setdefault(t, []).append(
                        [float(row["xi1"]), float(row["xi2"]), float(row["xi3"])]
                    )
        except (OSError, KeyError, ValueError) as e:
            raise TransportError(f"failed to read snapshots from {path}: {e}")

        return [SpeciesState(xi=np.array(values).T, time=t) for t, values in rows.items()]

    @staticmethod
    def write_manifest(manifest: RunManifest, directory: Union[str, Path]) -> Path:
        """Indented JSON, written to a temporary file and moved into place"""
        directory = _prepare_directory(directory)
        path = directory / MANIFEST_FILE
        try:
            _atomic_write(path, manifest.model_dump_json(indent=2) + "\n")
        except OSError as e:
            raise TransportError(f"failed to write manifest to {path}: {e}")
        logger.info(f"Wrote manifest to {path}")
        return path

    @staticmethod
    def write_convergence(table: ConvergenceTable, directory: Union[str, Path]) -> Path:
        directory = _prepare_directory(directory)
        path = directory / CONVERGENCE_FILE
        try:
            with path.open("w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(CONVERGENCE_HEADER)
                for row in table.rows:
                    order = "" if row.observed_order is None else format_number(row.observed_order)
                    writer.writerow(
                        [format_number(row.dt), row.species, row.norm.value, format_number(row.error), order]
                    )
        except OSError as e:
            raise TransportError(f"failed to write convergence table to {path}: {e}")
        logger.info(f"Wrote convergence table to {path}")
        return path
