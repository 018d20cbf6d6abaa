import sys
import threading
from datetime import datetime
from typing import List

from ..models import LogEntry


class LoggerService:
    """Сервис для работы с логами экспериментов."""

    def __init__(self, max_logs: int = 1000, echo: bool = True):
        self._logs: List[LogEntry] = []
        self._max_logs = max_logs
        self._echo = echo
        self._counter = 0
        # Воркеры пула пишут в лог параллельно
        self._lock = threading.Lock()

    def add_log(self, level: str, message: str) -> None:
        """Добавляет запись в лог и дублирует её в stderr."""
        with self._lock:
            self._counter += 1
            log_entry = LogEntry(
                id=f"{self._counter:06d}",
                timestamp=datetime.now(),
                level=level,
                message=message,
            )
            self._logs.insert(0, log_entry)

            # Ограничиваем количество логов
            if len(self._logs) > self._max_logs:
                self._logs = self._logs[:self._max_logs]

        if self._echo:
            print(f"[{level}] {message}", file=sys.stderr)

    def info(self, message: str) -> None:
        self.add_log("INFO", message)

    def warning(self, message: str) -> None:
        self.add_log("WARNING", message)

    def error(self, message: str) -> None:
        self.add_log("ERROR", message)

    def get_logs(self) -> List[LogEntry]:
        """Снимок журнала (новые записи первыми)."""
        with self._lock:
            return list(self._logs)

    def as_records(self) -> List[dict[str, str]]:
        """Записи в хронологическом порядке для манифеста."""
        return [
            {"level": log.level, "message": log.message}
            for log in reversed(self.get_logs())
        ]


# Логгер по умолчанию для сервисов, созданных без явного логгера
default_logger = LoggerService(echo=False)
