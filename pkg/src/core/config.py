"""Конфигурация приложения с загрузкой переменных окружения."""

import os
from typing import Optional

from dotenv import load_dotenv

from .errors import ConfigurationError

# Загружаем переменные окружения из .env файла
load_dotenv()


def _optional_int(name: str) -> Optional[int]:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(float(raw))
    except ValueError as e:
        raise ConfigurationError(f"Переменная {name} должна быть числом: {raw!r}") from e


class AppConfig:
    """Общая конфигурация лаборатории."""

    def __init__(self):
        """Инициализация конфигурации из переменных окружения."""
        # Бюджеты вычислений
        self.budget: Optional[int] = _optional_int("OSC_LAB_BUDGET")
        self.request_budget: int = int(float(os.getenv("OSC_LAB_REQUEST_BUDGET", "1e6")))

        # Допуски
        self.quad_tol: float = float(os.getenv("OSC_LAB_QUAD_TOL", "1e-8"))
        self.eval_tol: float = float(os.getenv("OSC_LAB_EVAL_TOL", "1e-10"))
        self.tol_moment: float = float(os.getenv("OSC_LAB_TOL_MOMENT", "1e-12"))

        # Пороги эмпирических проверок
        self.slope_slack: float = float(os.getenv("OSC_LAB_SLOPE_SLACK", "0.1"))
        self.ratio_slack: float = float(os.getenv("OSC_LAB_RATIO_SLACK", "10"))

        # Параллелизм и воспроизводимость
        self.threads: int = int(os.getenv("OSC_LAB_THREADS", str(os.cpu_count() or 1)))
        self.chunk_size: int = int(os.getenv("OSC_LAB_CHUNK_SIZE", "64"))
        self.seed: int = int(os.getenv("OSC_LAB_SEED", "0"))

    def validate(self) -> bool:
        """
        Проверяет корректность конфигурации.

        Returns:
            True если конфигурация корректна

        Raises:
            ConfigurationError: если допуск или бюджет неположителен
        """
        positive = {
            "OSC_LAB_QUAD_TOL": self.quad_tol,
            "OSC_LAB_EVAL_TOL": self.eval_tol,
            "OSC_LAB_TOL_MOMENT": self.tol_moment,
            "OSC_LAB_REQUEST_BUDGET": self.request_budget,
            "OSC_LAB_THREADS": self.threads,
            "OSC_LAB_CHUNK_SIZE": self.chunk_size,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigurationError(f"{name} должен быть положительным, получено {value}")
        if self.budget is not None and self.budget <= 0:
            raise ConfigurationError(f"OSC_LAB_BUDGET должен быть положительным, получено {self.budget}")
        return True

    def tolerances(self) -> dict[str, float]:
        """Допуски для манифеста эксперимента."""
        return {
            "quad_tol": self.quad_tol,
            "eval_tol": self.eval_tol,
            "tol_moment": self.tol_moment,
            "slope_slack": self.slope_slack,
            "ratio_slack": self.ratio_slack,
        }


# Глобальный экземпляр конфигурации
config = AppConfig()
