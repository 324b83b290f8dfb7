from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from lbdkit.config import FINDING_MISSING_FILE, PIPELINES, PipelineConfig, validate
from lbdkit.errors import ConfigError, FixtureMissingError
from lbdkit.logging import configure_logging, log_event
from lbdkit.pipelines import RUNNERS
from lbdkit.report import RunManifest, StagedOutput

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_FIXTURE = 3

RUN_LOG = "run.log.jsonl"


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", dest="config_path", help="YAML config file")
    common.add_argument("--dataset", help="registered dataset key, e.g. rs-dfo")
    common.add_argument("--out", dest="out_dir", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--choices", help="recorded expert choices to replay")
    common.add_argument("--interactive", action="store_const", const=True, default=None)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lbdkit", description="Literature-based discovery pipelines")
    subparsers = parser.add_subparsers(dest="command")
    common = _common_flags()
    helps = {
        "ingest": "load a snapshot and export its vocabulary and statistics",
        "closed": "ABC closed discovery: common terms and gold recovery",
        "open": "concept-based open discovery over MeSH headings",
        "crossbee": "rank bridging-term candidates and report ROC/AUC",
        "outlier": "PCA + k-means outlier documents",
        "rajolink": "Ra, Jo and Link steps with recorded choices",
        "linkpred": "time-sliced link prediction on the citation network",
    }
    for name in PIPELINES:
        subparsers.add_parser(name, parents=[common], help=helps[name])
    check = subparsers.add_parser("validate", parents=[common], help="report config problems without running")
    check.add_argument("--pipeline", help="pipeline the config is meant for")
    check.add_argument("--json", action="store_true", dest="as_json")
    return parser


def _overrides(args: argparse.Namespace, pipeline: Optional[str]) -> Dict[str, Any]:
    return {
        "pipeline": pipeline,
        "dataset": args.dataset,
        "out_dir": args.out_dir,
        "seed": args.seed,
        "threads": args.threads,
        "choices": args.choices,
        "interactive": args.interactive,
    }


def _resolve(args: argparse.Namespace, pipeline: Optional[str]) -> PipelineConfig:
    path = Path(args.config_path) if args.config_path else None
    return PipelineConfig.resolve(path, environ=os.environ, overrides=_overrides(args, pipeline))


def _print_findings(lines: List[str]) -> None:
    for line in lines:
        print(line, file=sys.stderr)


def run_validate(args: argparse.Namespace) -> int:
    try:
        config = _resolve(args, args.pipeline)
    except ConfigError as exc:
        print(f"config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = validate(config)
    if args.as_json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    elif report.ok:
        print(f"{config.pipeline} / {config.dataset}: ok")
    else:
        for finding in report.findings:
            print(finding.line())
    return EXIT_OK if report.ok else EXIT_ERROR


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, FixtureMissingError):
        return EXIT_FIXTURE
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    return EXIT_ERROR


def run_pipeline(args: argparse.Namespace) -> int:
    configure_logging()
    try:
        config = _resolve(args, args.command)
    except ConfigError as exc:
        print(f"config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    report = validate(config)
    problems = [f for f in report.findings if f.kind != FINDING_MISSING_FILE]
    if problems:
        _print_findings([f.line() for f in problems])
        return EXIT_CONFIG
    missing = report.of_kind(FINDING_MISSING_FILE)
    if missing:
        _print_findings([f.line() for f in missing])
        return EXIT_FIXTURE

    try:
        staged = StagedOutput(Path(config.out_dir))
    except ConfigError as exc:
        print(f"config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    logger = configure_logging(staged.path(RUN_LOG))
    manifest = RunManifest(
        command=config.pipeline,
        dataset=config.dataset,
        seed=config.seed,
        threads=config.threads,
        config_hash=config.config_hash(),
    )
    log_event(
        logger,
        "run_start",
        {"pipeline": config.pipeline, "dataset": config.dataset, "seed": config.seed, "config_hash": manifest.config_hash},
    )
    try:
        RUNNERS[config.pipeline](config, staged, manifest)
    except Exception as exc:
        log_event(logger, "pipeline_failed", {"pipeline": config.pipeline, "error": str(exc), "type": type(exc).__name__})
        configure_logging()
        staged.fail(manifest, exc)
        print(f"{config.pipeline}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)

    log_event(logger, "pipeline_complete", {"pipeline": config.pipeline, "metrics": manifest.metrics})
    out_dir = staged.promote(manifest)
    configure_logging()
    print(f"{config.pipeline}: ok -> {out_dir}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_ERROR
    if args.command == "validate":
        return run_validate(args)
    return run_pipeline(args)


if __name__ == "__main__":
    raise SystemExit(main())
