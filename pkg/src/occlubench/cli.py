"""Occlusion-robustness benchmark for 2D-to-3D human pose lifting.

Exit codes: 0 success, 1 data or evaluation error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from occlubench import __version__
from occlubench.config import ConfigError, build_config
from occlubench.runner import ANALYSES, DataError, UsageError, cmd_analyze, cmd_convert, cmd_corrupt, cmd_evaluate


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration; flags override its keys")
    p.add_argument("--seed", type=int, help="base seed for all random draws")
    p.add_argument("--jobs", type=int, help="worker processes (default: number of CPUs)")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="occlubench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="map a .poseq file into another joint layout")
    p.add_argument("input")
    p.add_argument("--mapping", required=True, help="mapping id, e.g. bm3d-to-h36m, coco-to-h36m, h36m-identity")
    p.add_argument("--out", required=True, help="output .poseq path")

    p = sub.add_parser("corrupt", help="write Protocol 1 / Protocol 2 corrupted copies of a 2D dataset")
    p.add_argument("dataset", help="directory of 2D .poseq files with occlusion labels")
    p.add_argument("--protocol", choices=["p1", "p2"])
    p.add_argument("--sigma", type=float, action="append", help="noise level (repeatable)")
    p.add_argument("--runs", type=int)
    p.add_argument("--joints", type=_csv_list, help="protocol 2 target joints (comma-separated)")
    _add_run_options(p)

    p = sub.add_parser("evaluate", help="score 3D predictions against ground truth")
    p.add_argument("--gt", required=True, help="directory of 3D ground-truth .poseq files")
    p.add_argument("--predictions", help="directory of <model>/<protocol>/<sigma>/<run>/... predictions")
    p.add_argument("--model", action="append", default=[], help="baseline pseudo-model (repeatable): "
                   "baseline:gt, baseline:passthrough, baseline:constpose")
    p.add_argument("--corrupted", help="output directory of 'corrupt', used as input for baseline models")
    p.add_argument("--exclude-joints", type=_csv_list, help="joints left out of every metric (default: hip; 'none' to keep all)")
    p.add_argument("--slices", type=_csv_list, help="comma-separated subset of overall,visible,occluded")
    p.add_argument("--allow-partial", action="store_true", default=None,
                   help="score matched pairs even when some predictions or ground-truth files have no partner")
    p.add_argument("--protocol", choices=["p1", "p2"], help="protocol settings (window) used to score p2 data")
    _add_run_options(p)

    p = sub.add_parser("analyze", help="occlusion, detector, geometry and velocity tables")
    p.add_argument("which", choices=ANALYSES)
    p.add_argument("dataset", nargs="?", help="directory of 2D .poseq files")
    p.add_argument("--gt", help="directory of 3D ground-truth .poseq files")
    p.add_argument("--predictions")
    p.add_argument("--model", action="append", default=[])
    p.add_argument("--detections", help="directory of detector outputs (one subdirectory per detector)")
    p.add_argument("--exclude-joints", type=_csv_list)
    _add_run_options(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "convert":
            cmd_convert(args.input, args.mapping, args.out)
            return 0
        exclude = getattr(args, "exclude_joints", None)
        if exclude is not None:
            exclude = [] if [e.lower() for e in exclude] == ["none"] else exclude
        cfg = build_config(
            args.config,
            protocol=getattr(args, "protocol", None),
            sigmas=getattr(args, "sigma", None),
            runs=getattr(args, "runs", None),
            seed=args.seed,
            jobs=args.jobs,
            joints=getattr(args, "joints", None),
            exclude_joints=exclude,
            slices=getattr(args, "slices", None),
            allow_partial=getattr(args, "allow_partial", None),
        )
        if args.command == "corrupt":
            manifest = cmd_corrupt(args.dataset, cfg, args.out)
            print(f"{len(manifest['tasks'])} files written to {args.out}")
        elif args.command == "evaluate":
            manifest = cmd_evaluate(args.gt, args.out, cfg, args.predictions, args.model, args.corrupted)
            print(f"reports: {', '.join(manifest['reports'])}")
        else:
            written = cmd_analyze(args.which, args.out, cfg, args.dataset, args.gt, args.predictions,
                                  args.model, args.detections)
            print(f"reports: {', '.join(written)}")
    except (UsageError, ConfigError) as exc:
        print(f"occlubench: error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"occlubench: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
