"""
Configuration-driven runs: single analyses, parameter sweeps and
finite-sample runs.

Every run follows the same pipeline per basis

    state -> marginal -> binned joint -> collective distribution
          -> support extension -> fill -> criterion

with x_a - x_b collected in the X basis and p_a + p_b in the P basis.
"""
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from app import __version__
from app.config import settings
from app.exceptions import ConfigError
from app.schemas.binning_schema import BinnedJoint, CollectiveDistribution, CollectiveMode, DetectorGrid
from app.schemas.criterion_schema import CriterionKind, CriterionReport
from app.schemas.run_schema import (
    BasisSummary,
    CriterionSpec,
    GridSpec,
    RunConfig,
    RunMode,
    RunReport,
    SweepRow,
)
from app.schemas.state_schema import Basis, GaussianMixtureState
from app.services.adversarial_fill import apply_strategy
from app.services.binning_service import added_bins, bin_joint, collective_dist, extend_grid, make_grid
from app.services.criteria_service import coarse_variance_criterion, mgvt_raw, optimize_entropic, variance_of
from app.services.event_sampler import bound_missed_mass, empirical_joint, sample_events, write_events_csv
from app.services.gaussian_states import (
    analytic_collective_variances,
    build_state,
    cutoff_tail_mass,
    marginal,
)
from app.services.report_service import (
    write_distribution_csv,
    write_joint_csv,
    write_report,
    write_sweep_csv,
)

logger = logging.getLogger(__name__)

COLLECTIVE_MODES = {Basis.X: CollectiveMode.difference, Basis.P: CollectiveMode.sum}


class BasisResult(BaseModel):
    """Intermediate products of one basis, kept for report files."""

    basis: Basis
    grid: DetectorGrid
    joint: BinnedJoint
    raw: CollectiveDistribution
    filled: CollectiveDistribution
    summary: BasisSummary


def load_run_config(source: Union[str, Path, Dict[str, Any]]) -> RunConfig:
    """Validate a run configuration from a JSON file or an already parsed document."""
    if isinstance(source, dict):
        data = source
    else:
        try:
            data = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read run config {source}: {e}") from e
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(
            "invalid run config",
            field_errors=[
                {"field": ".".join(str(p) for p in err["loc"]) or "<root>", "message": err["msg"]}
                for err in e.errors()
            ],
        ) from e


def _require_mode(config: RunConfig, *modes: RunMode) -> None:
    if config.mode not in modes:
        expected = " or ".join(m.value for m in modes)
        raise ConfigError(
            f"run mode {config.mode.value} cannot be run here",
            field_errors=[{"field": "mode", "message": f"expected {expected}"}],
        )


def _analytic_joints(state: GaussianMixtureState, config: RunConfig) -> Dict[Basis, BinnedJoint]:
    joints = {}
    for basis in Basis:
        spec = config.grid_for(basis)
        grid = make_grid(spec.lo, spec.hi, spec.bins)
        joints[basis] = bin_joint(marginal(state, basis), grid, grid)
    return joints


def _process_basis(
    state: GaussianMixtureState,
    basis: Basis,
    spec: GridSpec,
    config: RunConfig,
    joint: BinnedJoint,
    sample_info: Optional[Dict[str, Any]] = None,
) -> BasisResult:
    grid = make_grid(spec.lo, spec.hi, spec.bins)
    ext = extend_grid(grid, spec.cutoff_lo, spec.cutoff_hi) if spec.has_cutoff else None
    raw = collective_dist(joint, COLLECTIVE_MODES[basis], grid, grid)
    filled = apply_strategy(raw, config.fill.strategy(), ext, ext)

    tail = None
    plausible = True
    if spec.has_cutoff:
        tail = cutoff_tail_mass(state, basis, spec.cutoff_lo, spec.cutoff_hi)
        plausible = tail <= settings.cutoff_tail_limit
        if tail > settings.cutoff_tail_warning:
            logger.warning(
                f"Cutoff [{spec.cutoff_lo}, {spec.cutoff_hi}] in the {basis.value} basis leaves tail mass {tail:.3g}; "
                f"assuming nothing lies beyond it is implausible"
                + ("" if plausible else ", verdict withheld")
            )

    summary = BasisSummary(
        basis=basis,
        detected_mass=joint.detected_mass,
        missed_mass=joint.missed_mass,
        filled_mass=filled.filled_mass,
        bin_width=grid.width,
        support_size=filled.support_size,
        added_bins=added_bins(raw, filled),
        cutoff_tail_mass=tail,
        cutoff_plausible=plausible,
        **(sample_info or {}),
    )
    return BasisResult(basis=basis, grid=grid, joint=joint, raw=raw, filled=filled, summary=summary)


def evaluate_criterion(
    spec: CriterionSpec,
    dist_x: CollectiveDistribution,
    dist_p: CollectiveDistribution,
    inputs_digest: Optional[Dict[str, Any]] = None,
) -> CriterionReport:
    """Evaluate the configured criterion on filled X- and P+ distributions."""
    if spec.criterion == CriterionKind.mgvt_raw:
        return mgvt_raw(variance_of(dist_x), variance_of(dist_p), inputs_digest)
    if spec.criterion == CriterionKind.coarse_variance:
        return coarse_variance_criterion(
            variance_of(dist_x), variance_of(dist_p), dist_x.bin_width, dist_p.bin_width, inputs_digest
        )
    return optimize_entropic(
        dist_x, dist_p, dist_x.bin_width, dist_p.bin_width, alpha=spec.alpha, inputs_digest=inputs_digest
    )


def _digest(config: RunConfig, results: Dict[Basis, BasisResult]) -> Dict[str, Any]:
    digest: Dict[str, Any] = {"state": config.state.kind.value, "fill": config.fill.kind.value}
    if config.fill.clip_to_detector:
        digest["clip_to_detector"] = True
    for basis, res in results.items():
        key = basis.value.lower()
        spec = config.grid_for(basis)
        digest[f"bins_{key}"] = spec.bins
        digest[f"cutoff_{key}"] = [spec.cutoff_lo, spec.cutoff_hi] if spec.has_cutoff else None
        digest[f"support_{key}"] = res.filled.support_size
    return digest


def analyze_point(
    config: RunConfig,
    state: GaussianMixtureState,
    joints: Optional[Dict[Basis, BinnedJoint]] = None,
    sample_info: Optional[Dict[Basis, Dict[str, Any]]] = None,
) -> Tuple[CriterionReport, Dict[Basis, BasisResult]]:
    """Run the pipeline for one configuration, reusing precomputed joints when given."""
    joints = joints or _analytic_joints(state, config)
    results = {
        basis: _process_basis(
            state, basis, config.grid_for(basis), config, joints[basis], (sample_info or {}).get(basis)
        )
        for basis in Basis
    }
    report = evaluate_criterion(
        config.criterion, results[Basis.X].filled, results[Basis.P].filled, _digest(config, results)
    )
    return report, results


def _out_dir(config: RunConfig) -> Path:
    return Path(config.output.out_dir or settings.output_dir)


def _write_point_files(config: RunConfig, results: Dict[Basis, BasisResult]) -> List[str]:
    out_dir = _out_dir(config)
    files = []
    for basis, res in results.items():
        key = basis.value.lower()
        if config.output.write_distributions:
            files.append(str(write_distribution_csv(res.raw, out_dir / f"collective_{key}_detected.csv")))
            files.append(str(write_distribution_csv(res.filled, out_dir / f"collective_{key}_filled.csv")))
        if config.output.write_joints:
            files.append(str(write_joint_csv(res.joint, res.grid, res.grid, out_dir / f"joint_{key}.csv")))
    return files


def _cutoffs_plausible(results: Dict[Basis, BasisResult]) -> bool:
    return all(res.summary.cutoff_plausible for res in results.values())


def _log_verdict(label: str, report: CriterionReport, plausible: bool = True) -> None:
    if not plausible:
        verdict = "withheld, implausible cutoff"
    else:
        verdict = "entanglement verified" if report.entanglement_verified else "not verified"
    logger.info(f"{label}: {report.criterion.value} = {report.value:.9g} (threshold {report.threshold}) -> {verdict}")


def run_analyze(config: RunConfig) -> RunReport:
    """Single analysis of the configured state, grids, fill and criterion."""
    _require_mode(config, RunMode.analyze)
    started = time.perf_counter()

    state = build_state(config.state)
    criterion, results = analyze_point(config, state)
    plausible = _cutoffs_plausible(results)
    _log_verdict("Analysis", criterion, plausible)

    report = RunReport(
        version=__version__,
        config=config,
        bases=[res.summary for res in results.values()],
        criterion=criterion,
        cutoff_plausible=plausible,
        entanglement_verified=plausible and criterion.entanglement_verified,
        analytic_variances=analytic_collective_variances(state),
    )
    if config.output.write_files:
        report.files = _write_point_files(config, results)
    report.timing = {"elapsed_seconds": time.perf_counter() - started}
    if config.output.write_files:
        write_report(report, _out_dir(config))
    return report


def _point_config(config: RunConfig, value: float) -> RunConfig:
    if config.mode == RunMode.sweep_bins:
        bins = int(value)
        update = {
            "grid_x": config.grid_x.model_copy(update={"bins": bins}),
            "grid_p": config.grid_p.model_copy(update={"bins": bins}),
        }
    else:
        update = {
            "grid_x": config.grid_x.model_copy(update={"cutoff_lo": -value, "cutoff_hi": value}),
            "grid_p": config.grid_p.model_copy(update={"cutoff_lo": -value, "cutoff_hi": value}),
        }
    return config.model_copy(update=update)


def _sweep_point(
    config: RunConfig,
    value: float,
    state: GaussianMixtureState,
    joints: Optional[Dict[Basis, BinnedJoint]],
) -> SweepRow:
    criterion, results = analyze_point(_point_config(config, value), state, joints)
    plausible = _cutoffs_plausible(results)
    logger.debug(
        f"Sweep point {value:g}: {criterion.value:.9g} verified={criterion.entanglement_verified} "
        f"cutoff_plausible={plausible}"
    )
    return SweepRow(
        parameter=value,
        criterion_value=criterion.value,
        alpha_opt=criterion.alpha_opt,
        verified=plausible and criterion.entanglement_verified,
        cutoff_plausible=plausible,
        detected_mass_x=results[Basis.X].summary.detected_mass,
        detected_mass_p=results[Basis.P].summary.detected_mass,
    )


def find_verdict_flips(rows: List[SweepRow]) -> Tuple[List[Tuple[float, float]], Optional[float], bool]:
    """
    Adjacent parameter pairs across which the verdict changes.

    Returns (crossings, threshold, multiple_crossings); the threshold is the
    midpoint of the crossing pair when there is exactly one crossing.
    """
    crossings = [
        (prev.parameter, cur.parameter)
        for prev, cur in zip(rows, rows[1:])
        if prev.verified != cur.verified
    ]
    if len(crossings) == 1:
        lo, hi = crossings[0]
        return crossings, 0.5 * (lo + hi), False
    if len(crossings) > 1:
        logger.warning(f"Verdict changes {len(crossings)} times across the sweep: {crossings}")
        return crossings, None, True
    return crossings, None, False


def run_sweep(config: RunConfig) -> RunReport:
    """Repeat the analysis over bin counts or cutoffs, in parameter order."""
    _require_mode(config, RunMode.sweep_bins, RunMode.sweep_cutoff)
    started = time.perf_counter()

    state = build_state(config.state)
    points = config.sweep.points()
    # binned joints only depend on the detector grids, which a cutoff sweep keeps fixed
    joints = _analytic_joints(state, config) if config.mode == RunMode.sweep_cutoff else None

    if settings.max_workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=settings.max_workers) as executor:
            rows = list(executor.map(_sweep_point, repeat(config), points, repeat(state), repeat(joints)))
    else:
        rows = [_sweep_point(config, value, state, joints) for value in points]

    crossings, threshold, multiple = find_verdict_flips(rows)
    logger.info(
        f"Swept {len(rows)} {config.mode.value} points: {sum(r.verified for r in rows)} verified, "
        f"threshold={threshold}"
    )

    report = RunReport(
        version=__version__,
        config=config,
        sweep_rows=rows,
        crossings=crossings,
        threshold=threshold,
        multiple_crossings=multiple,
    )
    if config.output.write_files:
        report.files = [str(write_sweep_csv(rows, _out_dir(config) / f"{config.mode.value}.csv"))]
    report.timing = {"elapsed_seconds": time.perf_counter() - started}
    if config.output.write_files:
        write_report(report, _out_dir(config))
    return report


def run_sample(config: RunConfig) -> RunReport:
    """
    Analysis on Monte-Carlo detection records, reported next to the analytic
    analysis of the same configuration.
    """
    _require_mode(config, RunMode.sample)
    started = time.perf_counter()
    sample = config.sample

    state = build_state(config.state)
    seeds = dict(zip(Basis, np.random.SeedSequence(sample.seed).spawn(len(Basis))))
    joints: Dict[Basis, BinnedJoint] = {}
    sample_info: Dict[Basis, Dict[str, Any]] = {}
    files: List[str] = []
    for basis in Basis:
        spec = config.grid_for(basis)
        grid = make_grid(spec.lo, spec.hi, spec.bins)
        batch = sample_events(state, basis, sample.n, grid, grid, seeds[basis])
        if config.output.write_files and config.output.events_csv:
            files.append(str(write_events_csv(batch, _out_dir(config) / f"events_{basis.value.lower()}.csv")))
        joint = bound_missed_mass(empirical_joint(batch, grid, grid), sample.n, batch.n_missed, sample.miss_confidence)
        joints[basis] = joint
        sample_info[basis] = {
            "n_events": sample.n,
            "n_missed": batch.n_missed,
            "miss_bound": None if sample.miss_confidence is None else joint.missed_mass,
        }

    criterion, results = analyze_point(config, state, joints, sample_info)
    plausible = _cutoffs_plausible(results)
    _log_verdict(f"Sample of {sample.n} events", criterion, plausible)
    analytic, _ = analyze_point(config, state)
    _log_verdict("Analytic comparison", analytic)

    report = RunReport(
        version=__version__,
        config=config,
        bases=[res.summary for res in results.values()],
        criterion=criterion,
        cutoff_plausible=plausible,
        entanglement_verified=plausible and criterion.entanglement_verified,
        analytic_comparison=analytic,
    )
    if config.output.write_files:
        report.files = files + _write_point_files(config, results)
    report.timing = {"elapsed_seconds": time.perf_counter() - started}
    if config.output.write_files:
        write_report(report, _out_dir(config))
    return report


RUNNERS = {
    RunMode.analyze: run_analyze,
    RunMode.sweep_bins: run_sweep,
    RunMode.sweep_cutoff: run_sweep,
    RunMode.sample: run_sample,
}


def run(config: RunConfig) -> RunReport:
    """Dispatch on config.mode."""
    return RUNNERS[config.mode](config)
