import asyncio
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
import pandas as pd

from ..config import config
from ..errors import ConfigurationError
from ..models import (
    CheckOutcome,
    ExperimentConfig,
    ExperimentKind,
    FunctionSpec,
    KernelAction,
    LilMode,
    MeasureName,
    SharpnessConfig,
    SignedMeasure,
    moment_order,
)
from ..numerics.budget import EvaluationBudget
from .export_service import ExportService
from .function_space_service import FunctionSpaceService
from .kernel_service import KernelService
from .logger_service import LoggerService, default_logger
from .martingale_service import MartingaleService
from .measure_service import MeasureService
from .oscillation_service import OscillationService, sweep_frame
from .sharpness_service import SharpnessService

# Сетка ε по умолчанию для сравнения с ядром: 2^{−1}..2^{−14}
DEFAULT_KERNEL_EPS = [2.0 ** -n for n in range(1, 15)]
# Допуск роста накопленного максимума за последние три поколения
LIL_GROWTH = 0.2
LIL_FRACTION = 0.9
# Столбец значений в таблице lil: Θ_ε в режиме theta, S_n в режиме martingale
LIL_COLUMNS = {LilMode.THETA: "theta", LilMode.MARTINGALE: "S"}


@dataclass
class ExperimentResult:
    """Артефакт эксперимента (таблица или словарь), проверки и параметры графика."""

    artifact: pd.DataFrame | dict[str, Any]
    checks: list[CheckOutcome]
    plot: Optional[dict[str, Any]] = None

    @property
    def failed(self) -> list[CheckOutcome]:
        return [c for c in self.checks if not c.passed]


class ExperimentService:
    """Оркестратор экспериментов: загрузка дескрипторов, пул потоков, проверки, артефакты."""

    def __init__(
        self,
        logger: Optional[LoggerService] = None,
        export_service: Optional[ExportService] = None,
        budget: Optional[EvaluationBudget] = None,
    ):
        """
        Инициализация сервиса.

        Args:
            logger: Сервис логов запуска (опционально)
            export_service: Сервис записи артефактов (опционально)
            budget: Общий бюджет вычислений (по умолчанию из OSC_LAB_BUDGET)
        """
        self.logger = logger or default_logger
        self.export = export_service or ExportService(self.logger)
        self.budget = budget or EvaluationBudget(config.budget)
        self.measures = MeasureService(self.logger)
        self.functions = FunctionSpaceService(self.logger)
        self.oscillation = OscillationService(self.measures, self.logger, self.budget)
        self.martingale = MartingaleService(self.oscillation, self.logger)
        self.kernel = KernelService(self.oscillation, self.logger)
        self.sharpness = SharpnessService(self.oscillation, self.logger)

    # ------------------------------------------------------------------
    # Загрузка
    # ------------------------------------------------------------------

    @staticmethod
    def _read_json(reference: str, what: str) -> dict[str, Any]:
        """Встроенный JSON ("{...}") или путь к файлу."""
        text = reference.strip()
        try:
            if text.startswith("{"):
                return json.loads(text)
            return json.loads(Path(reference).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Ошибка при чтении дескриптора {what} {reference}: {e}") from e

    def load_function(self, cfg: ExperimentConfig) -> FunctionSpec:
        if not cfg.fn_path:
            raise ConfigurationError("Эксперимент требует --fn")
        data = self._read_json(cfg.fn_path, "функции")
        data.setdefault("eval_tol", cfg.eval_tol)
        return self.functions.load_descriptor(data)

    def load_measure(self, cfg: ExperimentConfig, dim: int = 1) -> SignedMeasure:
        """Дескриптор меры; вместо файла допускается имя (sym1, sym2, ...)."""
        if not cfg.measure_path:
            raise ConfigurationError("Эксперимент требует --measure")
        if cfg.measure_path in {name.value for name in MeasureName} and not Path(cfg.measure_path).exists():
            return self.measures.load_descriptor({"name": cfg.measure_path, "dim": dim, "ell": cfg.ell})
        return self.measures.load_descriptor(self._read_json(cfg.measure_path, "меры"))

    # ------------------------------------------------------------------
    # Пул
    # ------------------------------------------------------------------

    async def _map(self, func: Callable[[Any], Any], items: Sequence[Any], threads: int) -> list[Any]:
        """
        Выполняет func над элементами в пуле потоков.

        Результаты возвращаются в порядке подачи, поэтому итог не зависит от числа потоков.
        """
        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [loop.run_in_executor(pool, func, item) for item in items]
            return list(await asyncio.gather(*futures))

    @staticmethod
    def _chunks(points: np.ndarray) -> list[np.ndarray]:
        size = config.chunk_size
        return [points[i:i + size] for i in range(0, len(points), size)]

    @staticmethod
    def _samples(cfg: ExperimentConfig, dim: int, scale: float = 1.0) -> np.ndarray:
        """cfg.x, если задан, иначе cfg.samples равномерных точек в [0, scale)^d с зерном cfg.seed."""
        if cfg.x:
            return np.asarray(cfg.x, dtype=float).reshape(-1, dim)
        rng = np.random.default_rng(cfg.seed)
        return scale * rng.random((cfg.samples, dim))

    @staticmethod
    def _bounded_check(name: str, values: Sequence[float], slack: float = 2.0) -> CheckOutcome:
        values = np.asarray(values, dtype=float)
        median = float(np.median(values))
        top = float(np.max(values))
        passed = bool(top <= slack * median or top == 0.0)
        return CheckOutcome(name, passed, f"max {top:.4g} ≤ {slack:g}×median {median:.4g}")

    # ------------------------------------------------------------------
    # Эксперименты
    # ------------------------------------------------------------------

    async def _moments(self, cfg: ExperimentConfig) -> ExperimentResult:
        sigma = self.load_measure(cfg)
        order = cfg.order if cfg.order is not None else max(sigma.declared_moment_order, 0)
        report = self.measures.check_vanishing(sigma, order)
        frame = pd.DataFrame(
            {
                "multiindex": ["(" + ",".join(str(i) for i in k) + ")" for k, _ in report.entries],
                "degree": [sum(k) for k, _ in report.entries],
                "moment": [float(v) for _, v in report.entries],
                "exact": [str(v) for _, v in report.entries],
            }
        )
        check = CheckOutcome(
            f"moments_vanish_to_order_{order}",
            report.passed,
            f"допуск {report.tolerance:g}, нарушений {len(report.offending)}",
        )
        return ExperimentResult(frame, [check])

    async def _fn_check(self, cfg: ExperimentConfig) -> ExperimentResult:
        spec = self.load_function(cfg)
        ell = cfg.ell if cfg.ell is not None else moment_order(cfg.m, cfg.alpha) + 1
        report = self.functions.membership_check(spec, cfg.m, cfg.alpha, ell)
        frame = pd.DataFrame({"h": report.h_values, "ratio": report.ratios})
        check = CheckOutcome(
            f"membership_C{cfg.m},{cfg.alpha:g}",
            report.passed,
            f"наклон {report.exponent_fit:.4g}, sup отношений {report.ratio_sup:.4g}",
        )
        return ExperimentResult(frame, [check], {"x": "h", "y": "ratio", "logx": True, "logy": True})

    async def _theta_sweep(self, cfg: ExperimentConfig) -> ExperimentResult:
        spec = self.load_function(cfg)
        sigma = self.load_measure(cfg, spec.dim)
        eps_list = cfg.eps_list or [2.0 ** -n for n in range(cfg.n_min, cfg.n_max + 1)]
        plan = self.oscillation.plan(spec, sigma, eps_list, cfg.m, cfg.alpha, cfg.quad_tol)
        chunks = self._chunks(self._samples(cfg, spec.dim))
        results = await self._map(plan.evaluate, chunks, cfg.threads)
        frame = sweep_frame(plan, chunks, results)

        sups = frame.assign(abs_value=frame["value"].abs()).groupby("eps")["abs_value"].max()
        sups = sups[sups.index < 1]
        checks = []
        if len(sups) >= 2:
            ratios = (sups / np.log(1.0 / sups.index.to_numpy())).to_numpy()
            checks.append(self._bounded_check("log_bound", ratios, config.ratio_slack))
        summary = sups.reset_index().rename(columns={"abs_value": "sup_abs_theta"})
        return ExperimentResult(frame, checks, {"frame": summary, "x": "eps", "y": "sup_abs_theta", "logx": True})

    async def _build_martingale(self, cfg: ExperimentConfig, spec: FunctionSpec, sigma: SignedMeasure):
        plan = self.martingale.plan(spec, sigma, cfg.n_max, cfg.m, cfg.alpha, cfg.quad_tol)
        tasks = [
            (n, chunk)
            for n in range(cfg.n_max + 1)
            for chunk in self.martingale.chunks(n, sigma.dim, config.chunk_size)
        ]
        outputs = await self._map(lambda task: plan.cube_values(*task), tasks, cfg.threads)
        results: dict[int, list] = {}
        for (n, _), output in zip(tasks, outputs):
            results.setdefault(n, []).append(output)
        return self.martingale.assemble(plan, spec, results)

    async def _martingale(self, cfg: ExperimentConfig) -> ExperimentResult:
        spec = self.load_function(cfg)
        sigma = self.load_measure(cfg, spec.dim)
        martingale = await self._build_martingale(cfg, spec, sigma)
        checks = [
            CheckOutcome(
                "martingale_property",
                martingale.martingale_defect <= 4 * cfg.quad_tol,
                f"дефект {martingale.martingale_defect:.3g} ≤ 4·quad_tol",
            )
        ]
        generations = list(range(max(cfg.n_min, 0), cfg.n_max + 1))
        gaps: dict[int, float] = {}
        if generations:
            plan = self.martingale.comparison_plan(martingale, generations)
            xs = self._samples(cfg, spec.dim)
            chunks = self._chunks(xs)
            thetas = np.concatenate([values for values, _ in await self._map(plan.evaluate, chunks, cfg.threads)], axis=1)
            gaps = self.martingale.gaps_from_thetas(martingale, plan, generations, xs, thetas)
            if len(gaps) >= 2:
                checks.append(self._bounded_check("comparison_bounded", list(gaps.values())))
        frame = self.martingale.martingale_table(martingale, gaps)
        summary = pd.DataFrame({"n": list(gaps), "comparison_gap": list(gaps.values())})
        self.logger.info(f"Мартингал: ‖S‖_B={martingale.increment_norm:.4g}, вычислений {martingale.evaluations}")
        return ExperimentResult(frame, checks, {"frame": summary, "x": "n", "y": "comparison_gap"})

    @staticmethod
    def _point_frame(
        xs: np.ndarray,
        ns: Sequence[int],
        values: np.ndarray,
        eps: Optional[Sequence[float]] = None,
        column: str = "value",
    ) -> pd.DataFrame:
        """Строки (x[, x_2..], n[, eps], <column>) для таблицы values формы (len(ns), N)."""
        dim = xs.shape[1]
        columns = ["x"] + [f"x_{j + 1}" for j in range(1, dim)]
        rows = []
        for i, n in enumerate(ns):
            for j, point in enumerate(xs):
                row = dict(zip(columns, point))
                row["n"] = n
                if eps is not None:
                    row["eps"] = eps[i]
                row[column] = values[i, j]
                rows.append(row)
        return pd.DataFrame(rows)

    async def _lil(self, cfg: ExperimentConfig) -> ExperimentResult:
        spec = self.load_function(cfg)
        sigma = self.load_measure(cfg, spec.dim)
        mode = LilMode(cfg.lil_mode)
        xs = self._samples(cfg, spec.dim)
        minimum = 3 if mode == LilMode.MARTINGALE else 4
        ns = list(range(max(cfg.n_min, minimum), cfg.n_max + 1))
        if not ns:
            raise ConfigurationError(f"Пустой диапазон поколений: n от {max(cfg.n_min, minimum)} до {cfg.n_max}")

        if mode == LilMode.THETA:
            eps = [2.0 ** -n for n in ns]
            plan = self.oscillation.plan(spec, sigma, eps, cfg.m, cfg.alpha, cfg.quad_tol)
            values = np.concatenate(
                [v for v, _ in await self._map(plan.evaluate, self._chunks(xs), cfg.threads)], axis=1
            )
            frame = self._point_frame(xs, ns, values, eps, column=LIL_COLUMNS[mode])
        else:
            martingale = await self._build_martingale(cfg, spec, sigma)
            values = np.stack([martingale.values_at(xs, n) for n in ns])
            # S_n соответствует уровню ε = 2^{−n−2}
            frame = self._point_frame(xs, ns, values, [2.0 ** -(n + 2) for n in ns], column=LIL_COLUMNS[mode])
        frame = self.martingale.lil_ratio(frame, mode, column=LIL_COLUMNS[mode])

        keys = [c for c in frame.columns if c == "x" or c.startswith("x_")]
        checks = []
        if len(ns) >= 4:
            last = frame[frame["n"] == ns[-1]].set_index(keys)["running_max"]
            earlier = frame[frame["n"] == ns[-4]].set_index(keys)["running_max"].reindex(last.index).to_numpy()
            final = last.to_numpy()
            safe = np.where(earlier > 0, earlier, 1.0)
            growth = np.where(earlier > 0, final / safe - 1.0, np.where(final > 0, np.inf, 0.0))
            fraction = float(np.mean(growth < LIL_GROWTH))
            checks.append(
                CheckOutcome(
                    "lil_upper_ratio_stable",
                    fraction >= LIL_FRACTION,
                    f"доля x с ростом < {LIL_GROWTH:.0%} за три поколения: {fraction:.3f}",
                )
            )
        summary = frame.groupby("n", as_index=False)["ratio"].max()
        return ExperimentResult(frame, checks, {"frame": summary, "x": "n", "y": "ratio"})

    async def _kernel_report(self, cfg: ExperimentConfig) -> ExperimentResult:
        sigma = self.load_measure(cfg)
        report = self.kernel.kernel_report(sigma, cfg.quad_tol)
        checks = []
        bound = report.support_radius * report.total_variation
        if report.passed is not None:
            checks = [
                CheckOutcome("size", bool(report.pass_size), f"sup|tK₀| {report.sup_tK0:.4g} ≤ {2 * bound:.4g}"),
                CheckOutcome(
                    "smoothness", bool(report.pass_smoothness), f"sup|t²K₀′| {report.sup_t2dK0:.4g} ≤ {3 * bound:.4g}"
                ),
                CheckOutcome(
                    "cancellation", bool(report.pass_cancellation), f"сокращение {report.cancel_sup:.4g} ≤ {3 * bound:.4g}"
                ),
                CheckOutcome(
                    "derivative_cross_check",
                    report.derivative_check_error <= 1e-6,
                    f"расхождение {report.derivative_check_error:.3g}",
                ),
            ]
            equal = self.kernel.matches_outside(sigma, (0.5, 0.1, 1e-3))
            checks.append(CheckOutcome("k_eps_equals_k0", equal, "K_ε = K₀ при |t| ≥ εM"))
        return ExperimentResult(report.to_dict(), checks)

    async def _kernel_compare(self, cfg: ExperimentConfig) -> ExperimentResult:
        spec = self.load_function(cfg)
        sigma = self.load_measure(cfg, spec.dim)
        self.kernel.prepare(spec, sigma)
        xs = [float(x) for x in (cfg.x or np.linspace(-1.0, 1.0, 17))]
        levels = sorted(cfg.eps_list or DEFAULT_KERNEL_EPS, reverse=True)
        parts = await self._map(
            lambda chunk: self.kernel.transform_table(spec, sigma, chunk, levels, cfg.quad_tol),
            [xs[i:i + config.chunk_size] for i in range(0, len(xs), config.chunk_size)],
            cfg.threads,
        )
        transforms = np.concatenate(parts, axis=1)
        frame = self.kernel.compare_frame(spec, sigma, xs, levels, cfg.quad_tol, transforms)

        radius = sigma.radius
        derivative_sup = self.functions.sup_derivative(spec, min(xs) - radius, max(xs) + radius)
        bound = derivative_sup * 2 * radius * float(sigma.total_variation) + 4 * cfg.quad_tol
        top = float(frame["gap"].max())
        checks = [CheckOutcome("cz_comparison_bound", top <= bound, f"max gap {top:.4g} ≤ {bound:.4g}")]
        summary = frame.groupby("eps", as_index=False)["gap"].max()
        return ExperimentResult(frame, checks, {"frame": summary, "x": "eps", "y": "gap", "logx": True})

    async def _sharpness(self, cfg: ExperimentConfig) -> ExperimentResult:
        override = self.load_function(cfg) if cfg.fn_path else None
        ns = list(range(max(cfg.n_min, 4), cfg.n_max + 1))
        if not ns:
            raise ConfigurationError(f"Пустой диапазон n: от {max(cfg.n_min, 4)} до {cfg.n_max}")
        xs = self._samples(cfg, 1, 2.0 * math.pi)[:, 0]
        sharp_cfg = SharpnessConfig(
            b=cfg.b,
            eps_list=[2.0 ** -n for n in ns],
            x_samples=xs.tolist(),
            quad_tol=cfg.quad_tol,
            theta0=cfg.theta0,
            function=override,
        )
        plan = self.sharpness.plan(cfg.b, sharp_cfg.eps_list, cfg.quad_tol, override)
        values = np.concatenate(
            [v for v, _ in await self._map(plan.evaluate, self._chunks(xs.reshape(-1, 1)), cfg.threads)], axis=1
        )
        frame, summary = self.sharpness.lil_lower_experiment(sharp_cfg, values)
        checks = [
            CheckOutcome(
                "lower_ratio_fraction",
                summary["fraction_above"] >= LIL_FRACTION,
                f"доля x выше θ₀={summary['theta0']:.4g}: {summary['fraction_above']:.3f}",
            )
        ]
        if override is None:
            gaps = frame.groupby("eps")["gap"].max()
            checks.append(self._bounded_check("lacunary_gap_bounded", gaps.to_numpy()))
        plot = frame.groupby("n", as_index=False)["gap"].max()
        return ExperimentResult(frame, checks, {"frame": plot, "x": "n", "y": "gap"})

    # ------------------------------------------------------------------
    # Запуск
    # ------------------------------------------------------------------

    async def execute(self, cfg: ExperimentConfig) -> ExperimentResult:
        """Выполняет эксперимент без записи артефактов."""
        handlers = {
            ExperimentKind.MOMENTS: self._moments,
            ExperimentKind.FN_CHECK: self._fn_check,
            ExperimentKind.THETA_SWEEP: self._theta_sweep,
            ExperimentKind.MARTINGALE: self._martingale,
            ExperimentKind.LIL: self._lil,
            ExperimentKind.SHARPNESS: self._sharpness,
        }
        kind = ExperimentKind(cfg.kind)
        if kind == ExperimentKind.KERNEL:
            handler = self._kernel_report if cfg.kernel_action == KernelAction.REPORT else self._kernel_compare
        else:
            handler = handlers[kind]
        self.logger.info(f"Эксперимент {kind.value}: потоков {cfg.threads}, зерно {cfg.seed}")
        return await handler(cfg)

    async def run(self, cfg: ExperimentConfig) -> int:
        """
        Выполняет эксперимент, пишет артефакты и печатает итог по проверкам.

        Returns:
            0, если все проверки пройдены; 1, если есть проваленные

        Raises:
            OscLabError: ошибки конфигурации (код 2) и бюджета (код 3)
        """
        result = await self.execute(cfg)
        if cfg.out is not None:
            if isinstance(result.artifact, pd.DataFrame):
                await self.export.export_to_csv(result.artifact, cfg.out)
            else:
                await self.export.export_to_json(result.artifact, cfg.out)
        if cfg.svg is not None and result.plot is not None:
            plot = dict(result.plot)
            frame = plot.pop("frame", result.artifact)
            await self.export.export_to_svg(frame, file_path=cfg.svg, title=ExperimentKind(cfg.kind).value, **plot)

        for check in result.checks:
            print(check.line())
        await self.export.export_manifest(cfg, result.checks, self.logger)

        if result.failed:
            self.export.write_error_report(self.export.assertion_report(result.failed), cfg.out)
            return 1
        return 0
