"""
Command line entry point.

    python -m app.cli analyze|sweep-bins|sweep-cutoff|sample --config run.json [--out DIR] [--seed N]

Exit code 0 on success regardless of the verdict, 2 on invalid input.
"""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.config import settings
from app.exceptions import ToolkitError
from app.schemas.run_schema import RunMode, RunReport
from app.services.runner_service import load_run_config, run

logger = logging.getLogger(__name__)

VERBS = {
    "analyze": RunMode.analyze,
    "sweep-bins": RunMode.sweep_bins,
    "sweep-cutoff": RunMode.sweep_cutoff,
    "sample": RunMode.sample,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvtoolkit",
        description="Entanglement verification from coarse-grained quadrature statistics.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, mode in VERBS.items():
        s = sub.add_parser(verb, help=f"run a {mode.value} experiment")
        s.add_argument("--config", required=True, help="path to the JSON run configuration")
        s.add_argument("--out", default=None, help="output directory (overrides output.out_dir)")
        s.add_argument("--seed", type=int, default=None, help="sampling seed (overrides sample.seed)")
        s.add_argument("--log-level", default=settings.log_level, help="logging level")
    return parser


def _summary(report: RunReport) -> str:
    if report.sweep_rows:
        verified = sum(r.verified for r in report.sweep_rows)
        line = f"{len(report.sweep_rows)} points, {verified} verified, threshold={report.threshold}"
        if report.multiple_crossings:
            line += " (multiple crossings)"
        return line
    c = report.criterion
    line = f"{c.criterion.value}={c.value:.12g} verified={report.entanglement_verified}"
    if not report.cutoff_plausible:
        line += " (implausible cutoff)"
    return line


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s [%(levelname)s] [%(name)s] %(message)s",
    )

    try:
        config = load_run_config(args.config)
        data = config.model_dump(mode="json")
        data["mode"] = VERBS[args.verb].value
        data["output"]["write_files"] = True
        if args.out is not None:
            data["output"]["out_dir"] = args.out
        if args.seed is not None:
            data["sample"] = {**(data.get("sample") or {}), "seed": args.seed}
        config = load_run_config(data)
        report = run(config)
    except (ToolkitError, ValidationError) as e:
        logger.error(f"{args.verb} failed: {e}")
        return 2

    print(_summary(report))
    for path in report.files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
