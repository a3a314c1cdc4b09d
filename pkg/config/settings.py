"""
Настройки процесса segtrain.

Читает переменные окружения (и опционально .env в корне проекта) через django-environ.
Экспериментальные параметры (TrainPlan, ExperimentConfig) сюда не входят: они живут
в pydantic-моделях доменных приложений и приходят из JSON-конфигов CLI.
"""

from dataclasses import dataclass
from pathlib import Path

from environ import Env

from config.core.logging import setup_loguru
from config.core.sentry import setup_sentry

# ==============================================================================
# ENVIRONMENT CONFIGURATION
# ==============================================================================

# Путь к корневой директории проекта
BASE_DIR = Path(__file__).resolve().parent.parent

# Инициализация обработки переменных окружения
env = Env()

# Чтение .env файла (ищем .env файл в корне проекта)
READ_DOT_ENV_FILE: bool = env.bool("SEGTRAIN_READ_DOT_ENV_FILE", default=True)

if READ_DOT_ENV_FILE:
    env_file: Path = BASE_DIR / ".env"

    if env_file.exists():
        Env.read_env(env_file)


# ==============================================================================
# CORE SETTINGS
# ==============================================================================

# debug-режим
DEBUG: bool = env.bool("DEBUG", default=False)

# Число потоков для grad-disabled прогонов сегментов и refresh_all
THREADS: int = max(1, env.int("SEGTRAIN_THREADS", default=1))

# Директория кэша разбиений (segment cache)
CACHE_DIR: Path = Path(env.str("SEGTRAIN_CACHE_DIR", default=str(BASE_DIR / ".segtrain_cache")))


# ==============================================================================
# LOGURU & SENTRY CONFIGURATION
# ==============================================================================

# Параметры логирования
LOG_LEVEL: str = env.str("LOG_LEVEL", default="INFO")
LOG_TO_FILE: bool = env.bool("LOG_TO_FILE", default=False)
LOGFILE_SIZE: int = env.int("LOGFILE_SIZE", default=10)
LOGFILE_COUNT: int = env.int("LOGFILE_COUNT", default=5)

# Параметры Sentry
SENTRY_DSN: str | None = env.str("SENTRY_DSN", default=None) or None
SENTRY_ENVIRONMENT: str = env.str("SENTRY_ENVIRONMENT", default="local")


@dataclass
class SegtrainConfig:
    """
    Класс-контейнер для инициализации систем логирования и мониторинга.
    Удовлетворяет протоколам LoguruSettingsProtocol и SentrySettingsProtocol.
    """

    # Общие
    BASE_DIR: Path
    DEBUG: bool
    # Loguru
    LOG_LEVEL: str
    LOG_TO_FILE: bool
    LOGFILE_SIZE: int
    LOGFILE_COUNT: int
    # Sentry
    SENTRY_DSN: str | None
    SENTRY_ENVIRONMENT: str


def get_config() -> SegtrainConfig:
    """
    Собирает контейнер настроек из значений модуля.

    Returns:
        SegtrainConfig: Текущие настройки процесса.
    """
    return SegtrainConfig(
        BASE_DIR=BASE_DIR,
        DEBUG=DEBUG,
        LOG_LEVEL=LOG_LEVEL,
        LOG_TO_FILE=LOG_TO_FILE,
        LOGFILE_SIZE=LOGFILE_SIZE,
        LOGFILE_COUNT=LOGFILE_COUNT,
        SENTRY_DSN=SENTRY_DSN,
        SENTRY_ENVIRONMENT=SENTRY_ENVIRONMENT,
    )


def bootstrap() -> SegtrainConfig:
    """
    Инициализирует Loguru и Sentry для процесса CLI.

    Библиотечный импорт пакетов `apps.*` логирование не перенастраивает:
    это делает только точка входа (manage.py).

    Returns:
        SegtrainConfig: Применённые настройки.
    """
    config = get_config()

    # Инициализируем Loguru
    setup_loguru(config)

    # Инициализируем Sentry
    setup_sentry(config)

    return config
