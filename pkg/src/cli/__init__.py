"""
Command line: generate | train | eval | refine | causal | report.

Exit codes: 0 success, 2 configuration error, 3 acceptance-gate failure,
4 IO error.
"""

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from loguru import logger
from pydantic import ValidationError

from src.config import load_config
from src.exceptions import AcceptanceGateFailure, ConfigError, SchemaError, SpecLearnError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_GATE = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--seed", type=int, help="Run seed, replaces the config seeds")
    common.add_argument("--jobs", type=int, help="Worker processes")
    common.add_argument("--epochs", type=int, help="Training epochs")
    common.add_argument("--log-level", default="INFO", help="loguru level")

    parser = argparse.ArgumentParser(
        prog="spec-causal",
        description="Learn user-type trajectory specifications and test them with interventions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="Write scenes and demonstrations")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", parents=[common], help="Train every (type, ablation, seed) model")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--resume", action="store_true", help="Continue from checkpoints in --out")

    p = sub.add_parser("eval", parents=[common], help="Accuracy versus demonstrations per scene")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--ckpt", type=Path, help="Also score the checkpoints found here")
    p.add_argument("--out", type=Path, required=True)

    for name, help_text in (
        ("refine", "Refine invalid trajectories on the test scenes"),
        ("causal", "Intervention analysis on the test scenes"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--data", type=Path, required=True)
        p.add_argument("--ckpt", type=Path, required=True)
        p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("report", parents=[common], help="Collate results into report.md")
    p.add_argument("dirs", type=Path, nargs="+", help="Directories holding result CSVs")
    p.add_argument("--out", type=Path, required=True)
    return parser


def configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level.upper())


def run(args: argparse.Namespace) -> None:
    config = load_config(
        args.config,
        seeds=None if args.seed is None else [args.seed],
        jobs=args.jobs,
        epochs=args.epochs,
    )

    if args.command == "generate":
        from src.cli.generate import cmd_generate

        cmd_generate(config, args.out)
    elif args.command == "train":
        from src.cli.train import cmd_train

        cmd_train(config, args.data, args.out, resume=args.resume)
    elif args.command == "eval":
        from src.cli.evaluate import cmd_eval

        cmd_eval(config, args.data, args.out, ckpt_dir=args.ckpt)
    elif args.command == "refine":
        from src.cli.refine import cmd_refine

        cmd_refine(config, args.ckpt, args.data, args.out)
    elif args.command == "causal":
        from src.cli.causal import cmd_causal

        cmd_causal(config, args.ckpt, args.data, args.out)
    elif args.command == "report":
        from src.cli.report import cmd_report

        cmd_report(args.dirs, args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        run(args)
    except (ConfigError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except AcceptanceGateFailure as e:
        logger.error(f"Acceptance gate failed: {e}")
        return EXIT_GATE
    except (OSError, SchemaError) as e:
        logger.error(f"IO error: {e}")
        return EXIT_IO
    except SpecLearnError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
    logger.info(f"{args.command} finished")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
