"""Command-line interface: generate, regen, summarize, evaluate."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .evaluate import (count_error_metrics, format_report, gt_counts_from_coco,
                       load_predictions)
from .pipeline import generate_dataset, regenerate_scene, summarize

OUTPUT_DIR_ENV = "TALLYGEN_OUTPUT_DIR"


def _resolved_output(config, override: str | None) -> str:
    if override:
        return override
    return os.environ.get(OUTPUT_DIR_ENV, config.output_dir)


def _cmd_generate(args) -> int:
    config = load_config(args.config)
    out = _resolved_output(config, args.output_dir)
    manifest = generate_dataset(config, scenes=args.scenes, workers=args.workers,
                                output_dir=out)
    ok = sum(1 for e in manifest["scenes"] if e["status"] == "ok")
    discarded = sum(1 for e in manifest["scenes"] if e["status"] == "discarded")
    failed = sum(1 for e in manifest["scenes"] if e["status"] == "failed")
    print(f"generated {ok} scenes ({discarded} discarded, {failed} failed) -> {out}")
    return 0 if failed == 0 else 1


def _cmd_regen(args) -> int:
    config = load_config(args.config)
    out = _resolved_output(config, args.output_dir)
    entry = regenerate_scene(config, args.index, output_dir=out)
    print(f"scene {args.index}: {entry['status']} ({entry['annotations']} annotations)")
    return 0 if entry["status"] in ("ok", "discarded") else 1


def _cmd_summarize(args) -> int:
    summary = summarize(args.dataset_dir)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_evaluate(args) -> int:
    coco = json.loads(Path(args.gt).read_text())
    gt = gt_counts_from_coco(coco, include_distractors=args.include_distractors,
                             split=args.split)
    if not gt:
        print("no ground-truth pairs match the filters", file=sys.stderr)
        return 1
    pairs = load_predictions(args.pred, gt)
    report = count_error_metrics(pairs)
    print(format_report(report))
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        print(f"report written to {args.report}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tallygen",
                                     description="Counting-scene dataset generator and evaluator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a dataset from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--scenes", type=int, default=None, help="override scene_count")
    p.add_argument("--workers", type=int, default=None, help="override worker count")
    p.add_argument("--output-dir", default=None,
                   help=f"override output dir (also {OUTPUT_DIR_ENV})")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("regen", help="regenerate one scene by index")
    p.add_argument("--config", required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=_cmd_regen)

    p = sub.add_parser("summarize", help="summary stats and preview grid for a dataset dir")
    p.add_argument("dataset_dir")
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("evaluate", help="score counting predictions against COCO ground truth")
    p.add_argument("--gt", required=True, help="COCO annotations JSON")
    p.add_argument("--pred", required=True, help="JSON-lines predictions: {image_id, class_id, count}")
    p.add_argument("--include-distractors", action=argparse.BooleanOptionalAction, default=True,
                   help="count distractor annotations in the ground truth (default: on)")
    p.add_argument("--split", default=None, choices=("train", "val", "test"))
    p.add_argument("--report", default=None, help="write the metrics report JSON here")
    p.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
