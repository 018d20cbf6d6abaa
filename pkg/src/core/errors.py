"""Иерархия исключений и коды завершения CLI."""

from typing import Any, Optional


class OscLabError(Exception):
    """Базовое исключение лаборатории."""

    exit_code: int = 1

    def __init__(self, message: str, context: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = context or {}

    def to_report(self) -> dict[str, Any]:
        """Машиночитаемый отчёт об ошибке."""
        return {
            "status": "error",
            "exit_code": self.exit_code,
            "error": type(self).__name__,
            "message": self.message,
            "context": self.context,
        }


class ConfigurationError(OscLabError, ValueError):
    """Некорректная конфигурация или дескриптор."""

    exit_code = 2


class PreconditionError(ConfigurationError):
    """Нарушено предусловие операции (моменты, область ε, размерности)."""


class UnsupportedDimensionError(PreconditionError):
    """Размерность не поддерживается операцией."""


class EvaluationDomainError(OscLabError, ValueError):
    """Функцию нельзя вычислить в запрошенной точке или порядке."""

    exit_code = 2


class BudgetExhaustedError(OscLabError, RuntimeError):
    """Квадратура не сошлась в пределах бюджета вычислений."""

    exit_code = 3
