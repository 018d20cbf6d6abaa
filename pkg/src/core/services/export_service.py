import hashlib
import json
from importlib import metadata
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd
import scipy

from ..config import config
from ..errors import ConfigurationError, OscLabError
from ..models import CheckOutcome, ExperimentConfig
from .logger_service import LoggerService, default_logger

# 17 значащих цифр: double восстанавливается из CSV без потерь
FLOAT_FORMAT = "%.17g"


def sha256_of_json(payload: dict[str, Any]) -> str:
    """sha256 канонического JSON (ключи отсортированы, без пробелов)."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def package_version() -> str:
    try:
        return metadata.version("osc-lab")
    except metadata.PackageNotFoundError:
        return "0.1.0"


def sibling_path(out: str | Path, suffix: str) -> Path:
    """<out-stem><suffix> рядом с основным артефактом."""
    path = Path(out)
    return path.with_name(path.stem + suffix)


class ExportService:
    """Сервис для записи артефактов эксперимента."""

    def __init__(self, logger: Optional[LoggerService] = None):
        self._logger = logger or default_logger

    @staticmethod
    def _prepare(path: str | Path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigurationError(f"Ошибка при создании каталога {path.parent}: {e}") from e
        return path

    async def export_to_csv(self, frame: pd.DataFrame, file_path: str | Path) -> Path:
        """
        Экспортирует таблицу в CSV.

        Заголовок, десятичная точка, 17 значащих цифр, перевод строки "\\n":
        при одинаковых данных файл побайтово совпадает.
        """
        path = self._prepare(file_path)
        try:
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        except OSError as e:
            raise ConfigurationError(f"Ошибка при экспорте в CSV: {e}") from e
        self._logger.info(f"Записан CSV: {path} ({len(frame)} строк)")
        return path

    async def export_to_json(self, data: dict[str, Any], file_path: str | Path) -> Path:
        """Экспортирует словарь в JSON (UTF-8, отступ 2)."""
        path = self._prepare(file_path)
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(data, f, ensure_ascii=False, indent=2, default=_json_default)
                f.write("\n")
        except OSError as e:
            raise ConfigurationError(f"Ошибка при экспорте в JSON: {e}") from e
        self._logger.info(f"Записан JSON: {path}")
        return path

    async def export_to_svg(
        self,
        frame: pd.DataFrame,
        x: str,
        y: str,
        file_path: str | Path,
        group: Optional[str] = None,
        logx: bool = False,
        logy: bool = False,
        title: str = "",
    ) -> Path:
        """
        Статический линейный график y(x) в SVG (по линии на группу).

        Соль хешей и отсутствие даты в метаданных делают файл воспроизводимым.
        """
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        path = self._prepare(file_path)
        plt.rcParams["svg.hashsalt"] = "osc-lab"
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        try:
            if group is None:
                data = frame.sort_values(x)
                ax.plot(data[x], data[y], marker="o", markersize=3, linewidth=1)
            else:
                for key, data in frame.groupby(group, sort=True):
                    data = data.sort_values(x)
                    ax.plot(data[x], data[y], linewidth=0.8, label=f"{group}={key}")
                if frame[group].nunique() <= 10:
                    ax.legend(fontsize=7)
            if logx:
                ax.set_xscale("log")
            if logy:
                ax.set_yscale("log")
            ax.set_xlabel(x)
            ax.set_ylabel(y)
            if title:
                ax.set_title(title)
            ax.grid(True, alpha=0.3)
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
        except (OSError, ValueError) as e:
            raise ConfigurationError(f"Ошибка при экспорте в SVG: {e}") from e
        finally:
            plt.close(fig)
        self._logger.info(f"Записан SVG: {path}")
        return path

    def build_manifest(
        self,
        cfg: ExperimentConfig,
        checks: Sequence[CheckOutcome],
        logger: Optional[LoggerService] = None,
    ) -> dict[str, Any]:
        """Манифест: конфигурация, её хеш, допуски, версии, проверки и лог запуска."""
        cfg_dict = cfg.to_dict()
        tolerances = config.tolerances()
        tolerances.update({"quad_tol": cfg.quad_tol, "eval_tol": cfg.eval_tol})
        return {
            "config": cfg_dict,
            "config_hash": sha256_of_json(cfg_dict),
            "tolerances": tolerances,
            "version": {
                "osc-lab": package_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "pandas": pd.__version__,
            },
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks],
            "log": (logger or self._logger).as_records(),
        }

    async def export_manifest(
        self,
        cfg: ExperimentConfig,
        checks: Sequence[CheckOutcome],
        logger: Optional[LoggerService] = None,
    ) -> Optional[Path]:
        """Пишет <out-stem>.manifest.json; без --out манифест не пишется."""
        if cfg.out is None:
            return None
        return await self.export_to_json(
            self.build_manifest(cfg, checks, logger), sibling_path(cfg.out, ".manifest.json")
        )

    @staticmethod
    def error_report(error: OscLabError) -> dict[str, Any]:
        return error.to_report()

    @staticmethod
    def assertion_report(failed: Sequence[CheckOutcome]) -> dict[str, Any]:
        """Отчёт о проваленных проверках (код 1)."""
        return {
            "status": "error",
            "exit_code": 1,
            "error": "AssertionFailed",
            "message": f"Не пройдено проверок: {len(failed)}",
            "context": {"failed": [{"name": c.name, "detail": c.detail} for c in failed]},
        }

    def write_error_report(self, report: dict[str, Any], out: Optional[str | Path]) -> Optional[Path]:
        """Печатает отчёт одной строкой JSON в stdout и пишет <out-stem>.error.json."""
        print(json.dumps(report, ensure_ascii=False, default=_json_default))
        if out is None:
            return None
        path = self._prepare(sibling_path(out, ".error.json"))
        try:
            path.write_text(
                json.dumps(report, ensure_ascii=False, indent=2, default=_json_default) + "\n",
                encoding="utf-8",
            )
        except OSError:
            # Отчёт уже напечатан; запись файла вторична
            return None
        return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)
