"""
Диспетчер команд CLI: разбор аргументов, run id, перевод исключений в коды завершения.
"""

import argparse
import sys
import uuid
from collections.abc import Sequence
from typing import TextIO

from loguru import logger as log
from sentry_sdk import set_context, set_tag

from apps.cli.base import BaseCommand
from apps.cli.commands import analyze, evaluate, generate, partition, train
from apps.common.exceptions import SegtrainError

COMMANDS: dict[str, type[BaseCommand]] = {
    module.Command.name: module.Command for module in (generate, partition, train, evaluate, analyze)
}


def build_parser(stdout: TextIO | None = None) -> tuple[argparse.ArgumentParser, dict[str, BaseCommand]]:
    parser = argparse.ArgumentParser(prog="segtrain", description="Graph Segment Training")
    subparsers = parser.add_subparsers(dest="command", required=True)

    commands = {}
    for name, command_class in COMMANDS.items():
        command = command_class(stdout=stdout)
        command.add_arguments(subparsers.add_parser(name, help=command.help))
        commands[name] = command

    return parser, commands


def run(argv: Sequence[str], stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    """
    Выполняет команду и возвращает код завершения.

    SegtrainError печатается в stderr как ErrorOut (JSON) с кодом завершения класса ошибки;
    непредвиденное исключение логируется с трассировкой и даёт код 1.

    Args:
        argv (Sequence[str]): Аргументы без имени программы.
        stdout (TextIO | None): Поток отчётов.
        stderr (TextIO | None): Поток ошибок.

    Returns:
        int: Код завершения.
    """
    stderr = stderr or sys.stderr
    parser, commands = build_parser(stdout)
    args = parser.parse_args(list(argv))
    options = vars(args)
    command_name = options.pop("command")

    run_id = uuid.uuid4().hex[:12]
    set_tag("run_id", run_id)
    set_tag("command", command_name)
    set_context("cli_command", {"argv": list(argv)})

    with log.contextualize(run_id=run_id):
        try:
            return commands[command_name].handle(**options)
        except SegtrainError as exc:
            log.error(f"{command_name} failed: {exc.message}")
            stderr.write(exc.to_error_out().model_dump_json() + "\n")
            return exc.exit_code
        except Exception:
            log.exception(f"{command_name} crashed")
            return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))
