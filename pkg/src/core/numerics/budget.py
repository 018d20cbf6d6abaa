import threading
from typing import Any, Optional

from ..errors import BudgetExhaustedError


class EvaluationBudget:
    """Общий счётчик вычислений функции с необязательным потолком (OSC_LAB_BUDGET)."""

    def __init__(self, limit: Optional[int] = None):
        self.limit = limit
        self._used = 0
        self._lock = threading.Lock()

    @property
    def used(self) -> int:
        return self._used

    @property
    def remaining(self) -> Optional[int]:
        if self.limit is None:
            return None
        return max(self.limit - self._used, 0)

    def consume(self, count: int, context: Optional[dict[str, Any]] = None) -> None:
        """Списывает count вычислений; при превышении потолка бросает BudgetExhaustedError."""
        with self._lock:
            self._used += int(count)
            used = self._used
        if self.limit is not None and used > self.limit:
            raise BudgetExhaustedError(
                f"Исчерпан общий бюджет вычислений функции ({self.limit})",
                {"used": used, "limit": self.limit, **(context or {})},
            )
