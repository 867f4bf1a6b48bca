#
# MIT License
#
# Copyright (c) 2023 pseudo-marginal-glm-missing team
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.
#
"""Command line entry point: pm-glm {simulate,run,tune,surface,diagnose} [arguments]."""

import logging
import sys
from typing import Iterable, List, Optional, cast

from .argument_parser import ArgumentParser, DataClassType
from .core import COMMAND_ARGUMENTS, PseudoMarginalPipeline

logger = logging.getLogger(__name__)

USAGE = f"usage: pm-glm {{{','.join(COMMAND_ARGUMENTS)}}} [-h] [arguments]"


def command_parser(command: str) -> ArgumentParser:
    """Parser of the arguments of a subcommand.
    Raises:
        ValueError: in case the subcommand is not supported.
    """
    if command not in COMMAND_ARGUMENTS:
        raise ValueError(f"command {command} not supported, supported commands: {', '.join(COMMAND_ARGUMENTS)}")
    return ArgumentParser(
        cast(Iterable[DataClassType], COMMAND_ARGUMENTS[command]),
        prog=f"pm-glm {command}",
    )


def run_command(argv: List[str]) -> int:
    """Parse a command line and run its pipeline.
    Args:
        argv: subcommand followed by its arguments.
    Returns:
        the exit status.
    """
    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE)
        return 0 if argv else 1
    command, arguments = argv[0], argv[1:]
    try:
        parser = command_parser(command)
        args = parser.parse_args_into_dataclasses(args=arguments)
    except ValueError:
        logger.exception(f"error parsing command {command}")
        print(USAGE)
        return 1
    config = {arg.__name__: arg.__dict__ for arg in args}
    logger.info(f"{command} arguments: {config}")
    pipeline = PseudoMarginalPipeline()
    try:
        return getattr(pipeline, command)(**config)
    except (ValueError, TypeError, RuntimeError, FileNotFoundError):
        logger.exception(f"{command} failed, printing error and exiting")
        return 1


def main(argv: Optional[List[str]] = None) -> None:
    """Run a pipeline of the command line."""

    logging.basicConfig(stream=sys.stdout, level=logging.INFO)

    sys.exit(run_command(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
