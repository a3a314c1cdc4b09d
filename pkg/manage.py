#!/usr/bin/env python
"""Точка входа CLI segtrain: generate | partition | train | eval | analyze."""

from config.settings import bootstrap


def main() -> None:
    # Логирование и Sentry настраиваются только здесь, не при импорте apps.*
    bootstrap()

    from apps.cli.main import main as cli_main

    cli_main()


if __name__ == "__main__":
    main()
