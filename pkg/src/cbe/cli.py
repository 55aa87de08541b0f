"""Command-line entry point: ``cbe <stage> [options]``.

Failures print one ``error<TAB>stage=<stage><TAB>type=<Type><TAB>message=<text>``
line on stderr and exit with status 1 (2 for usage errors).
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence

from cbe.config import PipelineConfig
from cbe.errors import CbeError
from cbe.pipeline import Pipeline, StageError

COMMANDS = (
    "ingest",
    "analyze",
    "link",
    "walk",
    "embed-text",
    "embed-kg",
    "fuse",
    "train",
    "evaluate",
    "bias-check",
    "matrix",
)


def _parse_set(values: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in values:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbe", description="Text + knowledge-graph embedding classification pipeline.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("-c", "--config", help="key = value configuration file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one setting (repeatable)")
    parser.add_argument("--out", help="output directory (same as --set paths.output=...)")
    parser.add_argument("--remote-linker", action="store_true", help="also query the remote entity linker")
    parser.add_argument("--deterministic", action="store_true", help="force single-threaded execution")
    parser.add_argument("--force", action="store_true", help="ignore cached stage outputs")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _one_line(s: str) -> str:
    return " ".join(str(s).split())


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    stage = args.command
    try:
        overrides = _parse_set(args.set)
        if args.out:
            overrides["paths.output"] = args.out
        if args.remote_linker:
            overrides.setdefault("linker.mode", "union")
        if args.deterministic:
            overrides["run.deterministic"] = "true"
        cfg = PipelineConfig.load(args.config, overrides)
        result = Pipeline(cfg, force=args.force).run(stage)
    except StageError as exc:
        stage, err = exc.stage, exc.cause
        print(f"error\tstage={stage}\ttype={type(err).__name__}\tmessage={_one_line(err)}", file=sys.stderr)
        return 1
    except (CbeError, OSError, ValueError, KeyError) as exc:
        print(f"error\tstage={stage}\ttype={type(exc).__name__}\tmessage={_one_line(exc)}", file=sys.stderr)
        return 1
    if stage in ("analyze", "fuse", "evaluate", "matrix"):
        print(result)
    else:
        print(f"{stage}: done ({cfg.path('paths.output') / stage})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
