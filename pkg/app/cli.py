"""
Command-line entry point.

    psagan train --config run.cfg --set epochs=2
    psagan score --config run.cfg --set checkpoint=train-0123abcd/checkpoint.bin --train-encoder
    psagan replay train-0123abcd/train.manifest.json

Exit codes: 0 ok, 1 internal failure, 2 invalid config, 3 missing encoder or
artifact, 4 missing output of another run.
"""

import argparse
import logging
from pathlib import Path

from pydantic import ValidationError

from app.config import load_run_config, settings
from app.errors import (
    ConfigError,
    MissingArtifactError,
    MissingDependencyError,
    MissingEncoderError,
)
from app.logging import setup_logging
from app.runs.service import COMMANDS, RunService, replay
from app.storage import get_storage

__all__ = [
    "EXIT_CONFIG",
    "EXIT_DEPENDENCY",
    "EXIT_INTERNAL",
    "EXIT_MISSING",
    "EXIT_OK",
    "build_parser",
    "main",
]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_DEPENDENCY = 4

_HELP = {
    "train": "train a generator/discriminator pair",
    "sample": "draw synthetic windows from a checkpoint into a sample file",
    "score": "Context-FID of a checkpoint or sample file",
    "impute": "fill a scenario's hidden points",
    "scenario": "build a downstream scenario from the dataset",
    "eval": "rolling-window NRMSE of checkpoints and baselines on a scenario",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psagan", description="Progressive self-attention GANs for time series.")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = commands.add_parser(name, help=_HELP[name])
        sub.add_argument("--config", type=Path, help="key=value run file")
        sub.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one config key (repeatable)",
        )
        if name == "score":
            sub.add_argument(
                "--train-encoder",
                action="store_true",
                help="train the Context-FID encoder on the dataset before scoring",
            )
    sub = commands.add_parser("replay", help="rerun a manifest and check outputs are identical")
    sub.add_argument("manifest", help="storage key of a <command>.manifest.json")
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    storage = get_storage()
    if args.command == "replay":
        manifest, identical = replay(storage, args.manifest)
        print(f"{manifest.run_dir}/{manifest.command}.manifest.json")
        return EXIT_OK if identical else EXIT_INTERNAL

    overrides = list(args.set)
    if getattr(args, "train_encoder", False):
        overrides.append("train_encoder=true")
    config = load_run_config(args.config, overrides)
    result = RunService(storage, config).run(args.command)
    manifest, summary = result if isinstance(result, tuple) else (result, None)
    print(f"{manifest.run_dir}/{manifest.command}.manifest.json")
    if summary is not None and summary.failed:
        logger.error(f"{len(summary.failures)} evaluation runs failed; see the report")
        return EXIT_INTERNAL
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(settings.log_level)
    try:
        return _dispatch(args)
    except (ConfigError, ValidationError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except MissingDependencyError as e:
        logger.error(str(e))
        return EXIT_DEPENDENCY
    except (MissingEncoderError, MissingArtifactError) as e:
        logger.error(str(e))
        return EXIT_MISSING
    except Exception:
        logger.exception(f"{args.command} failed")
        return EXIT_INTERNAL
