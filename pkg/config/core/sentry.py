"""
Централизованная настройка Sentry SDK.
"""

from logging import ERROR, INFO  # Стандартные уровни логирования для Sentry
from typing import Protocol

import sentry_sdk
from loguru import logger as log
from sentry_sdk.integrations.loguru import LoguruIntegration
from sentry_sdk.integrations.threading import ThreadingIntegration


# Определяем протокол (контракт), которому должен соответствовать объект настроек
class SentrySettingsProtocol(Protocol):
    """Протокол для объекта настроек, используемых Sentry."""

    SENTRY_DSN: str | None
    SENTRY_ENVIRONMENT: str
    DEBUG: bool


def setup_sentry(settings: SentrySettingsProtocol) -> bool:
    """
    Инициализирует Sentry SDK, если задан DSN.

    Args:
        settings (SentrySettingsProtocol): Объект настроек, реализующий протокол SentrySettingsProtocol

    Returns:
        bool: True, если SDK инициализирован.
    """
    sentry_dsn = settings.SENTRY_DSN

    if not sentry_dsn:
        # Для локальных прогонов отсутствие DSN - норма
        log.debug("SENTRY_DSN is not set (error tracking disabled).")
        return False

    # Частота семплирования для Performance Monitoring (Traces)
    traces_sample_rate = 1.0 if settings.DEBUG else 0.1

    log.info(f"Initializing Sentry (Env: {settings.SENTRY_ENVIRONMENT})...")

    try:
        sentry_sdk.init(
            dsn=sentry_dsn,
            environment=settings.SENTRY_ENVIRONMENT,
            traces_sample_rate=traces_sample_rate,
            integrations=[
                # Loguru (перехват error-логов как событий)
                LoguruIntegration(
                    level=INFO,  # Breadcrumbs
                    event_level=ERROR,  # Events
                ),
                # Потоки (grad-disabled прогоны и refresh_all работают в пуле)
                ThreadingIntegration(propagate_hub=True),
            ],
        )

    except Exception as exc:
        log.exception(f"Sentry initialization error: {exc}")
        return False

    log.success("Sentry SDK successfully initialized.")
    return True
