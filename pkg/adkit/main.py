"""Main application module.

This module builds the ``adkit`` command line and maps errors to exit codes.
"""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional, Sequence, Type

from adkit import __version__
from adkit.cli.commands import cmd_eval, cmd_predict, cmd_train
from adkit.core.cache import feature_cache
from adkit.core.config import load_run_config, settings
from adkit.core.exceptions import AdkitError

logger = logging.getLogger(__name__)

ExceptionHandler = Callable[[BaseException], int]

_exception_handlers: Dict[Type[BaseException], ExceptionHandler] = {}


def exception_handler(exc_type: Type[BaseException]) -> Callable[[ExceptionHandler], ExceptionHandler]:
    """Register a handler turning an exception type into an exit code."""

    def decorator(func: ExceptionHandler) -> ExceptionHandler:
        _exception_handlers[exc_type] = func
        return func

    return decorator


@exception_handler(AdkitError)
def adkit_exception_handler(exc: BaseException) -> int:
    """Handle expected errors.

    Args:
        exc: Error raised by a command

    Returns:
        int: The exit code carried by the error
    """
    logger.error(f"{type(exc).__name__}: {exc}")
    return getattr(exc, "exit_code", 1)


@exception_handler(KeyboardInterrupt)
def interrupt_handler(exc: BaseException) -> int:
    logger.error("Interrupted")
    return 130


def handle_exception(exc: BaseException) -> int:
    """Dispatch to the most specific registered handler; unexpected errors exit 1."""
    for cls in type(exc).__mro__:
        handler = _exception_handlers.get(cls)
        if handler is not None:
            return handler(exc)
    logger.exception(f"Unexpected error: {exc}")
    return 1


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a configuration value, e.g. --set k=4 or --set train.epochs=1",
    )
    parser.add_argument("--layout", choices=["auto", "mvtec", "visa"], help="Dataset layout")


def _add_mode_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--mode",
        choices=["zero", "few"],
        help="Scoring mode (default: few when k > 0 or fewshot.banks is set, zero otherwise)",
    )


def create_application() -> argparse.ArgumentParser:
    """Create and configure the command-line parser.

    Returns:
        argparse.ArgumentParser: Parser with the train, eval and predict commands
    """
    parser = argparse.ArgumentParser(
        prog="adkit",
        description="Zero- and few-shot anomaly classification and segmentation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="Train projection heads")
    _add_common_arguments(train)

    evaluate = commands.add_parser("eval", help="Evaluate heads and write metric reports")
    _add_common_arguments(evaluate)
    _add_mode_argument(evaluate)

    predict = commands.add_parser("predict", help="Score one image and write a heatmap overlay")
    _add_common_arguments(predict)
    _add_mode_argument(predict)
    predict.add_argument("--image", required=True, help="Image to score")
    predict.add_argument("--category", required=True, help="Object name used in the prompts")
    predict.add_argument(
        "--reference",
        dest="references",
        action="append",
        default=[],
        help="Normal reference image for few-shot mode (repeatable)",
    )
    return parser


def run(args: argparse.Namespace) -> None:
    """Execute a parsed command."""
    overrides: List[str] = list(args.overrides)
    if args.layout:
        overrides.append(f"data.layout={args.layout}")
    config = load_run_config(args.config, overrides)
    mode = getattr(args, "mode", None) or ("few" if config.k > 0 or config.fewshot.banks else "zero")

    if args.command == "train":
        run_dir = cmd_train(config)
    elif args.command == "eval":
        run_dir = cmd_eval(config, mode)
    else:
        run_dir = cmd_predict(config, args.image, args.category, args.references, mode)
    logger.info(f"Outputs written to {run_dir}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Command-line entry point.

    Args:
        argv: Arguments without the program name; ``sys.argv`` when ``None``

    Returns:
        int: Process exit code
    """
    args = create_application().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    feature_cache.initialize(settings.CACHE)
    try:
        run(args)
    except (Exception, KeyboardInterrupt) as e:
        return handle_exception(e)
    finally:
        feature_cache.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
