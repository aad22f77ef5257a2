"""Command-line entry point: ``agegaze <stage> --config run.json [--out DIR]``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .data import AgeGroup, GazeDataError, StimulusCategory

STAGES = ("ingest", "synth", "maps", "metrics", "train", "predict", "eval", "report", "all")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agegaze", description=__doc__)
    p.add_argument("stage", choices=STAGES)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="override every named seed in the config")
    p.add_argument("--group", choices=[g.value for g in AgeGroup])
    p.add_argument("--category", choices=[c.value for c in StimulusCategory])
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = pipeline.RunConfig.load(args.config) if args.config else pipeline.RunConfig()
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.out:
            cfg.out = args.out
        group = AgeGroup.parse(args.group) if args.group else None
        category = StimulusCategory.parse(args.category) if args.category else None
        stage = args.stage
        if stage == "synth":
            result = pipeline.cmd_synth(cfg)
        elif stage == "ingest":
            result = pipeline.cmd_ingest(cfg)
        elif stage == "maps":
            result = pipeline.cmd_maps(cfg, group)
        elif stage == "metrics":
            result = pipeline.cmd_metrics(cfg, group, category)
        elif stage == "train":
            result = sorted(g.value for g in pipeline.cmd_train(cfg, group))
        elif stage == "predict":
            result = pipeline.cmd_predict(cfg, group)
        elif stage == "eval":
            result = pipeline.cmd_eval(cfg, group, category)
        elif stage == "report":
            result = pipeline.cmd_report(cfg)
        else:
            result = pipeline.run_all(cfg)
    except (pipeline.PipelineError, GazeDataError, ValueError, FileNotFoundError) as exc:
        print(f"agegaze {args.stage}: error: {exc}", file=sys.stderr)
        return 1
    print(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
