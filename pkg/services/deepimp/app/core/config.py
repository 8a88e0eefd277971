import logging

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="DEEPIMP_",
        env_file=".env",
        env_ignore_empty=True,
        extra="ignore",
    )

    # Уровень логирования CLI и библиотеки (DEEPIMP_LOG_LEVEL=DEBUG и т.п.).
    log_level: str = "INFO"

    # Сид по умолчанию, если в CLI не передан --seed. Вся случайность прогона
    # (инициализация весов, сплит, dropout, uniform-dl) выводится из него.
    default_seed: int = 20211

    # k для aknn-инициализации и kNN-бейзлайнов.
    default_k: int = 5

    # ── Профиль сети ────────────────────────────────────────────────────────
    # desk  — 64/48/32, 150 эпох: укладывается в минуты на ноутбуке/CI.
    # full (или paper) — 10 слоёв 1000…100, 300 эпох (3.3M параметров), часы на CPU.
    net_profile: str = "desk"

    # Формат чисел в выходных CSV. %.17g гарантирует побайтовую повторяемость
    # и точный round-trip double.
    float_format: str = "%.17g"

    # Сколько прогонов бенчмарка выполнять параллельно (потоки).
    workers: int = 1

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        v = (v or "INFO").strip().upper()
        if v not in logging.getLevelNamesMapping():
            raise ValueError(f"log_level: неизвестный уровень {v!r}.")
        return v

    @field_validator("net_profile")
    @classmethod
    def validate_net_profile(cls, v: str) -> str:
        v = (v or "desk").strip().lower()
        if v not in ("desk", "full", "paper"):
            raise ValueError("net_profile должен быть 'desk', 'full' или 'paper'.")
        return v

    @field_validator("default_k", "workers")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("значение должно быть >= 1")
        return v


settings = Settings()
