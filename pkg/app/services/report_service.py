"""
Report writers: JSON run reports and plot-ready CSV tables.

All numbers are written with 12 significant digits.
"""
import csv
import json
import logging
from pathlib import Path
from typing import Any, List, Union

import numpy as np

from app.schemas.binning_schema import BinnedJoint, CollectiveDistribution, DetectorGrid
from app.schemas.run_schema import RunReport, SweepRow

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 12

SWEEP_COLUMNS = ["parameter", "criterion_value", "alpha_opt", "verified", "detected_mass_x", "detected_mass_p"]


def fmt_number(value: float) -> str:
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def _round_floats(node: Any) -> Any:
    if isinstance(node, bool):
        return node
    if isinstance(node, float):
        return float(fmt_number(node))
    if isinstance(node, dict):
        return {k: _round_floats(v) for k, v in node.items()}
    if isinstance(node, (list, tuple)):
        return [_round_floats(v) for v in node]
    return node


def report_to_json(report: RunReport) -> str:
    return json.dumps(_round_floats(report.model_dump(mode="json")), indent=2)


def write_report(report: RunReport, out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir) / "report.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_to_json(report) + "\n")
    logger.info(f"Wrote run report to {path}")
    return path


def write_sweep_csv(rows: List[SweepRow], path: Union[str, Path]) -> Path:
    """Sweep table; alpha_opt is empty for the variance criteria, verified is 0/1."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([
                fmt_number(row.parameter),
                fmt_number(row.criterion_value),
                "" if row.alpha_opt is None else fmt_number(row.alpha_opt),
                int(row.verified),
                fmt_number(row.detected_mass_x),
                fmt_number(row.detected_mass_p),
            ])
    logger.info(f"Wrote {len(rows)} sweep rows to {path}")
    return path


def write_distribution_csv(dist: CollectiveDistribution, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "probability"])
        for v, p in zip(dist.values, dist.probs):
            writer.writerow([fmt_number(v), fmt_number(p)])
    return path


def write_joint_csv(joint: BinnedJoint, grid_a: DetectorGrid, grid_b: DetectorGrid, path: Union[str, Path]) -> Path:
    """Long-format joint: one row per bin pair with both bin centers."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    centers_a, centers_b = np.meshgrid(grid_a.centers, grid_b.centers, indexing="ij")
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["center_a", "center_b", "probability"])
        for a, b, p in zip(centers_a.ravel(), centers_b.ravel(), joint.probs.ravel()):
            writer.writerow([fmt_number(a), fmt_number(b), fmt_number(p)])
    return path
