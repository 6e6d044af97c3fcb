"""Command-line entry points.

Subcommands: `extract` (compute cached features), `run` (repeated-trial
evaluation plus reports), `synth` (generate the synthetic corpus), and
`report` (re-render report files from saved results). Exit codes:
0 success, 2 configuration error, 3 data error, 4 too many failed trials.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .audio import AudioError
from .cache import CacheError
from .config import CLASSIFIERS, ConfigError, load_config
from .frames import FrameError
from .manifest import ManifestError, load_manifest
from .metrics import MetricsError
from .pipeline import (
    PipelineError,
    TrialsFailedError,
    extract_features,
    run_trials,
)
from .report import load_outcome_json, render_payload, write_reports
from .synth import synth_dataset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRIALS = 4

_DATA_ERRORS = (
    ManifestError,
    FrameError,
    CacheError,
    AudioError,
    MetricsError,
    PipelineError,
    OSError,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egofuse",
        description="Multi-modal egocentric activity recognition toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_extract = sub.add_parser("extract", help="compute and cache features")
    p_extract.add_argument("--config", required=True, help="experiment config file")

    p_run = sub.add_parser("run", help="run the evaluation protocol")
    p_run.add_argument("--config", required=True, help="experiment config file")
    p_run.add_argument(
        "--classifier",
        choices=CLASSIFIERS,
        default=None,
        help="override the classifier named in the config",
    )

    p_synth = sub.add_parser("synth", help="generate the synthetic corpus")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True, help="output directory")

    p_report = sub.add_parser("report", help="re-render reports from results.json")
    p_report.add_argument("--in", dest="in_dir", required=True,
                          help="directory containing results.json")
    p_report.add_argument("--out", dest="out_dir", default=None,
                          help="destination directory (default: same as --in)")
    return parser


def _cmd_extract(args) -> int:
    config = load_config(args.config)
    manifest = load_manifest(config.manifest)
    table = extract_features(
        manifest,
        config.cache_path,
        config.channels,
        progress=lambda sid: print(f"extracted {sid}", file=sys.stderr),
    )
    n_channels = len(table.channel_names())
    print(f"cached {n_channels} channels for {len(manifest.segments)} segments "
          f"at {config.cache_path}")
    return EXIT_OK


def _cmd_run(args) -> int:
    config = load_config(args.config, classifier=args.classifier)
    manifest = load_manifest(config.manifest)
    outcome = run_trials(config, manifest=manifest)
    paths = write_reports(
        outcome, config.out_dir, manifest.class_names, [config.classifier]
    )
    agg = outcome.aggregate(config.classifier)
    summary = " ".join(f"{k}={v:.4f}" for k, v in agg.items())
    print(f"{config.classifier}: {summary}")
    for path in paths:
        print(f"wrote {path}")
    if outcome.audit_violations:
        print(f"WARNING: leak audit flagged {len(outcome.audit_violations)} trial(s)",
              file=sys.stderr)
    return EXIT_OK


def _cmd_synth(args) -> int:
    manifest = synth_dataset(args.seed, args.out)
    print(f"wrote {len(manifest.segments)} segments across "
          f"{manifest.n_classes} classes under {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    in_dir = Path(args.in_dir)
    results = in_dir / "results.json"
    if not results.exists():
        raise PipelineError(f"no results.json under {in_dir}")
    payload = load_outcome_json(results)
    out_dir = args.out_dir if args.out_dir is not None else in_dir
    for path in render_payload(payload, out_dir):
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "extract": _cmd_extract,
        "run": _cmd_run,
        "synth": _cmd_synth,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrialsFailedError as exc:
        print(f"trial failures: {exc}", file=sys.stderr)
        return EXIT_TRIALS
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
