"""Command: run an occlusion/noise sweep and write the results table."""

import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

from mmap_birl.models.config import SweepConfig
from mmap_birl.models.records import SweepRow
from mmap_birl.utils.error_handling import ErrorContext, create_success_response, handle_error
from mmap_birl.utils.sweep import run_sweep

logger = logging.getLogger(__name__)


def best_methods(rows: List[SweepRow]) -> Dict[Tuple[float, float], str]:
    """Method with the lowest mean ILE in every (occlusion, noise) cell that has one."""
    best: Dict[Tuple[float, float], SweepRow] = {}
    for row in rows:
        if row.ile_mean is None:
            continue
        key = (row.occlusion, row.noise)
        if key not in best or row.ile_mean < best[key].ile_mean:  # type: ignore[operator]
            best[key] = row
    return {key: row.method for key, row in best.items()}


def run_sweep_command(
    config: SweepConfig,
    out: Union[str, Path],
    jobs: int = 1,
    progress: bool = True,
) -> Dict[str, Any]:
    """
    Run every sweep cell, resuming from ``out`` when it already holds finished cells.

    Args:
        config: Resolved sweep configuration.
        out: CSV results path.
        jobs: Worker processes for per-batch runs.
        progress: Show a progress bar on stderr.

    Returns:
        Dictionary containing:
        - success: Whether the sweep ran (individual cells may still have failed)
        - data: rows, best method per cell, failed cell count, ``all_failed``
        - processing_time: Time taken in seconds
        - error: Error details (if the sweep could not run)
    """
    start_time = time.perf_counter()

    try:
        with ErrorContext("run_sweep", logger, context={"environment": config.environment.name, "out": str(out)}):
            rows = run_sweep(config, output=out, jobs=jobs, progress=progress)
            failed = [row for row in rows if row.status != "ok"]
            if failed:
                logger.warning(f"{len(failed)} of {len(rows)} sweep cells failed")
            summary = [
                {"occlusion": occlusion, "noise": noise, "best_method": method}
                for (occlusion, noise), method in best_methods(rows).items()
            ]
            return create_success_response(
                {
                    "results_path": str(out),
                    "rows": [row.model_dump() for row in rows],
                    "best": summary,
                    "failed_cells": len(failed),
                    "all_failed": bool(rows) and len(failed) == len(rows),
                },
                processing_time=time.perf_counter() - start_time,
            )

    except Exception as e:
        return handle_error(e, context={"operation": "run_sweep", "out": str(out)}, logger=logger)
