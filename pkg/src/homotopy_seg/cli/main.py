"""
Command-line front-end for homotopy-seg.

Parses the subcommand and its flags, merges the flags into the
configuration, sets up logging and maps errors to exit codes:
0 success, 1 usage or configuration error, 2 I/O error, 3 numerical abort.
"""

import argparse
import logging
import sys
from typing import Any, Callable, List, Optional, Sequence, Tuple

from .. import __version__
from ..data.models import parse_size
from ..utils.config import Config
from ..utils.exceptions import EXIT_USAGE, HomotopySegError, UsageError, exit_code_for
from ..utils.logger import setup_logger
from .commands import COMMANDS

logger = logging.getLogger(__name__)

MODE_ALIASES = {
    "single": "single_objective",
    "multi": "multi_objective",
    "single_objective": "single_objective",
    "multi_objective": "multi_objective",
}


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser raising UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _csv_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in _csv_list(text)]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _size_list(text: str) -> List[str]:
    sizes = _csv_list(text)
    for size in sizes:
        parse_size(size)
    return sizes


def _mode(text: str) -> str:
    if text not in MODE_ALIASES:
        raise UsageError(f"mode must be single or multi, got {text!r}")
    return MODE_ALIASES[text]


# (argument dest, config key, converter)
OVERRIDES: List[Tuple[str, str, Callable[[Any], Any]]] = [
    ("out", "run.out", str),
    ("data", "run.data", str),
    ("checkpoint", "run.checkpoint", str),
    ("init", "run.init", str),
    ("name", "run.name", str),
    ("metrics", "run.metrics", list),
    ("names", "run.names", _csv_list),
    ("perturb_weights", "run.perturb_weights", float),
    ("log_level", "logging.level", str),
    ("log_file", "logging.file", str),
    ("scenes", "data.scenes", int),
    ("grass_fraction", "data.grass_fraction", float),
    ("fence_lines", "data.fence_lines", int),
    ("elevations", "data.elevations", _float_list),
    ("patch_size", "data.patch_size", int),
    ("split_ratio", "data.split_ratio", float),
    ("brush_diameter", "data.brush_diameter", int),
    ("mode", "train.mode", _mode),
    ("epochs", "train.epochs", int),
    ("batch_size", "train.batch_size", int),
    ("alpha_start", "train.alpha_start", float),
    ("alpha_end", "train.alpha_end", float),
    ("t_max", "train.t_max", float),
    ("t_granularity", "train.t_granularity", str),
    ("augment", "train.augment", bool),
    ("beta", "loss.beta", float),
    ("lambda_smooth", "loss.lambda_smooth", float),
    ("normalize_smooth", "loss.normalize_smooth", bool),
    ("c_hidden", "model.c_hidden", int),
    ("threshold", "eval.threshold", float),
    ("labels", "eval.labels", str),
    ("instances", "gradcheck.instances", int),
    ("sizes", "gradcheck.sizes", _size_list),
]

# --seed feeds the section of the running subcommand
SEED_KEYS = {
    "gen-data": "data.seed",
    "train": "train.seed",
    "gradcheck": "gradcheck.seed",
}


def _add_common_options(parser: argparse.ArgumentParser, default: Any) -> None:
    parser.add_argument("--config", default=default, help="JSON configuration file (e.g. a config.json echo)")
    parser.add_argument("--log-level", type=str.upper, default=default,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    parser.add_argument("--log-file", default=default, help="Also log to this rotating file")


def build_parser() -> CliArgumentParser:
    """Build the argument parser with all subcommands.

    --config, --log-level and --log-file are accepted before or after the
    subcommand; when given in both places the subcommand's value wins.
    """
    # Suppressed defaults keep an absent subcommand option from masking the global one
    common = CliArgumentParser(add_help=False)
    _add_common_options(common, argparse.SUPPRESS)

    parser = CliArgumentParser(
        prog="homotopy-seg",
        description="Homotopy-based multi-objective fine-tuning for binary segmentation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_common_options(parser, None)

    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    gen = sub.add_parser("gen-data", parents=[common], help="Generate a synthetic annotated corpus")
    gen.add_argument("--out", help="Corpus output directory (default: ./corpus)")
    gen.add_argument("--scenes", type=int, help="Number of scenes")
    gen.add_argument("--size", help="Scene size as HxW, e.g. 1120x1120")
    gen.add_argument("--seed", type=int, help="Corpus seed")
    gen.add_argument("--grass-fraction", type=float, help="Target grass fraction in (0, 1]")
    gen.add_argument("--fence-lines", type=int, help="Fence lines per scene")
    gen.add_argument("--elevations", help="Comma-separated flight elevations in m, assigned round-robin")
    gen.add_argument("--patch-size", type=int, help="Patch edge length in pixels")
    gen.add_argument("--split-ratio", type=float, help="Train fraction of the patches")
    gen.add_argument("--brush-diameter", type=int, help="Annotation brush diameter in pixels")

    tr = sub.add_parser("train", parents=[common], help="Train a model on a corpus")
    tr.add_argument("--data", help="Corpus directory or manifest")
    tr.add_argument("--out", help="Run output directory")
    tr.add_argument("--mode", help="multi (homotopy) or single (DiceCE only)")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--batch-size", type=int)
    tr.add_argument("--seed", type=int, help="Initialization, shuffle and augmentation seed")
    tr.add_argument("--alpha-start", type=float, help="Initial learning rate")
    tr.add_argument("--alpha-end", type=float, help="Final learning rate")
    tr.add_argument("--t-max", type=float, help="Final value of the homotopy parameter")
    tr.add_argument("--t-granularity", choices=["step", "epoch"])
    tr.add_argument("--beta", type=float, help="Dice weight within DiceCE")
    tr.add_argument("--lambda-smooth", type=float, help="Smoothness weight")
    tr.add_argument("--normalize-smooth", action="store_true", default=None,
                    help="Divide the smoothness loss by the number of pixel pairs")
    tr.add_argument("--no-augment", dest="augment", action="store_false", default=None)
    tr.add_argument("--c-hidden", type=int, help="Hidden channels of a fresh model")
    tr.add_argument("--init", help="Checkpoint to fine-tune instead of a fresh model")

    ev = sub.add_parser("eval", parents=[common], help="Evaluate a checkpoint on the eval split")
    ev.add_argument("--data", help="Corpus directory or manifest")
    ev.add_argument("--checkpoint", help="Model checkpoint")
    ev.add_argument("--out", help="Evaluation output directory")
    ev.add_argument("--threshold", type=float, help="Decision threshold override")
    ev.add_argument("--labels", choices=["brush", "true"], help="Reference masks")
    ev.add_argument("--name", help="Model name in the report")

    gc = sub.add_parser("gradcheck", parents=[common], help="Verify gradients by finite differences")
    gc.add_argument("--instances", type=int, help="Random instances per size")
    gc.add_argument("--sizes", help="Comma-separated instance sizes, e.g. 4x4,8x8")
    gc.add_argument("--seed", type=int)
    gc.add_argument("--perturb-weights", type=float, nargs="?", const=1.5,
                    help="Scale the analytic conv1 weight gradient to test the checker")
    gc.add_argument("--out", help="Directory for gradcheck.json")

    cmp_ = sub.add_parser("compare", parents=[common], help="Compare two evaluations side by side")
    cmp_.add_argument("metrics", nargs=2, help="metrics.json files or eval directories")
    cmp_.add_argument("--names", help="Comma-separated row names")
    cmp_.add_argument("--out", help="Directory for compare.txt")

    rep = sub.add_parser("report", parents=[common], help="Render metrics files as a table")
    rep.add_argument("metrics", nargs="+", help="metrics.json files or eval directories")
    rep.add_argument("--names", help="Comma-separated row names")
    rep.add_argument("--out", help="Directory for report.txt")

    return parser


def apply_overrides(args: argparse.Namespace, config: Config) -> Config:
    """Merge command-line flags into the configuration."""
    # A config echo from another subcommand carries paths that do not apply here
    if config.get("run.command") not in (None, args.command):
        config.set("run", {})
    config.set("run.command", args.command)

    for dest, key, convert in OVERRIDES:
        value = getattr(args, dest, None)
        if value is not None:
            config.set(key, convert(value))

    size = getattr(args, "size", None)
    if size is not None:
        height, width = parse_size(size)
        config.set("data.height", height)
        config.set("data.width", width)

    seed = getattr(args, "seed", None)
    if seed is not None and args.command in SEED_KEYS:
        config.set(SEED_KEYS[args.command], seed)
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        config = apply_overrides(args, Config(args.config))
    except (HomotopySegError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)

    setup_logger(
        level=str(config.get("logging.level", "INFO")),
        log_file=config.get("logging.file"),
        max_size=int(config.get("logging.max_size", 10 * 1024 * 1024)),
        backup_count=int(config.get("logging.backup_count", 5)),
    )

    try:
        return COMMANDS[args.command](config)
    except HomotopySegError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return exit_code_for(e)
    except Exception as e:
        logger.exception(f"{args.command} failed unexpectedly: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
