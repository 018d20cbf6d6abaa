import argparse
import asyncio
import re
import sys
from typing import NoReturn, Optional, Sequence

from core.config import config
from core.errors import ConfigurationError, OscLabError
from core.models import ExperimentConfig, ExperimentKind, KernelAction, LilMode
from core.services.experiment_service import ExperimentService
from core.services.export_service import ExportService
from core.services.logger_service import LoggerService

_POWER = re.compile(r"^\s*2\^(-?\d+)\s*$")


def _grid_value(token: str) -> float:
    match = _POWER.match(token)
    if match:
        return 2.0 ** int(match.group(1))
    try:
        return float(token)
    except ValueError as e:
        raise ConfigurationError(f"Некорректное значение сетки: {token!r}") from e


def parse_grid(text: Optional[str]) -> list[float]:
    """
    Сетка ε: "2^-a..2^-b" (все степени двойки между) или список через запятую.

    Пример: "2^-1..2^-4" → [0.5, 0.25, 0.125, 0.0625].
    """
    if not text:
        return []
    if ".." in text:
        left, right = text.split("..", 1)
        lo, hi = _POWER.match(left), _POWER.match(right)
        if not lo or not hi:
            raise ConfigurationError(f"Диапазон задаётся как 2^-a..2^-b: {text!r}")
        a, b = int(lo.group(1)), int(hi.group(1))
        step = 1 if b >= a else -1
        return [2.0 ** k for k in range(a, b + step, step)]
    return [_grid_value(token) for token in text.split(",") if token.strip()]


def parse_points(text: Optional[str]) -> list[float]:
    if not text:
        return []
    try:
        return [float(token) for token in text.split(",") if token.strip()]
    except ValueError as e:
        raise ConfigurationError(f"Некорректный список точек: {text!r}") from e


class ArgumentParser(argparse.ArgumentParser):
    """Ошибки разбора аргументов идут через общий отчёт об ошибке, а не через exit(2)."""

    def error(self, message: str) -> NoReturn:
        raise ConfigurationError(f"{self.prog}: {message}", {"usage": self.format_usage().strip()})


def _out_of(argv: Sequence[str]) -> Optional[str]:
    """Значение --out без полного разбора (для отчёта об ошибке разбора)."""
    for i, token in enumerate(argv):
        if token == "--out" and i + 1 < len(argv):
            return argv[i + 1]
        if token.startswith("--out="):
            return token.split("=", 1)[1]
    return None


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=config.seed, help="зерно генератора выборок")
    parser.add_argument("--threads", type=int, default=config.threads, help="число потоков пула")
    parser.add_argument("--out", help="CSV/JSON артефакт; рядом пишется <stem>.manifest.json")
    parser.add_argument("--svg", help="SVG-график итоговой зависимости")
    parser.add_argument("--quad-tol", type=float, default=config.quad_tol)
    parser.add_argument("--eval-tol", type=float, default=config.eval_tol)


def _smoothness(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--m", type=int, default=0, help="порядок гладкости m")
    parser.add_argument("--alpha", type=float, default=1.0, help="показатель α ∈ (0, 1]")


def _grids(parser: argparse.ArgumentParser, nmax: int = 10, nmin: int = 4) -> None:
    parser.add_argument("--nmax", type=int, default=nmax)
    parser.add_argument("--nmin", type=int, default=nmin)
    parser.add_argument("--samples", type=int, default=256, help="число случайных точек x")
    parser.add_argument("--x", help="явный список точек x через запятую (d = 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(
        prog="osc-lab",
        description="Лаборатория осцилляционных функционалов и диадических мартингалов",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    measure = commands.add_parser("measure", help="меры и их моменты")
    measure_actions = measure.add_subparsers(dest="action", required=True)
    measure_check = measure_actions.add_parser("check", help="проверка зануления моментов")
    measure_check.add_argument(
        "--measure", "--file", dest="measure", required=True, help="JSON-дескриптор (файл или строка) или имя меры"
    )
    measure_check.add_argument("--order", type=int, help="порядок проверки (по умолчанию заявленный)")
    measure_check.add_argument("--ell", type=int, help="ℓ для классической меры по имени")
    _common(measure_check)

    fn = commands.add_parser("fn", help="тестовые функции")
    fn_actions = fn.add_subparsers(dest="action", required=True)
    fn_check = fn_actions.add_parser("check", help="эмпирическая проверка класса C^{m,α}")
    fn_check.add_argument("--fn", "--file", dest="fn", required=True, help="JSON-дескриптор функции (файл или строка)")
    fn_check.add_argument("--ell", type=int, help="порядок классической разности")
    _smoothness(fn_check)
    _common(fn_check)

    theta = commands.add_parser("theta", help="сетка Θ_ε^σ f по (x, ε)")
    theta.add_argument("--fn", required=True)
    theta.add_argument("--measure", required=True)
    theta.add_argument("--eps-grid", help="2^-a..2^-b или список; по умолчанию 2^-nmin..2^-nmax")
    _smoothness(theta)
    _grids(theta)
    _common(theta)

    martingale = commands.add_parser("martingale", help="диадический мартингал S_n")
    martingale.add_argument("--fn", required=True)
    martingale.add_argument("--measure", required=True)
    _smoothness(martingale)
    _grids(martingale)
    _common(martingale)

    lil = commands.add_parser("lil", help="отношения закона повторного логарифма")
    lil.add_argument("--fn", required=True)
    lil.add_argument("--measure", required=True)
    lil.add_argument("--mode", choices=[mode.value for mode in LilMode], default=LilMode.THETA.value)
    _smoothness(lil)
    _grids(lil, nmax=16)
    _common(lil)

    kernel = commands.add_parser("kernel", help="ядро Кальдерона–Зигмунда K₀")
    kernel_actions = kernel.add_subparsers(dest="action", required=True)
    kernel_report = kernel_actions.add_parser(KernelAction.REPORT.value, help="свойства ядра")
    kernel_report.add_argument("--measure", required=True)
    _common(kernel_report)
    kernel_compare = kernel_actions.add_parser(KernelAction.COMPARE.value, help="Θ̃_ε против усечённого преобразования")
    kernel_compare.add_argument("--fn", required=True)
    kernel_compare.add_argument("--measure", required=True)
    kernel_compare.add_argument("--eps-grid", default="2^-1..2^-14")
    kernel_compare.add_argument("--x", help="точки x через запятую (по умолчанию 17 точек на [−1, 1])")
    _common(kernel_compare)

    sharpness = commands.add_parser("sharpness", help="нижняя оценка для ряда Вейерштрасса–Зигмунда")
    sharpness.add_argument("--b", type=float, default=2.0)
    sharpness.add_argument("--theta0", type=float, help="порог θ₀ (по умолчанию половина медианы)")
    sharpness.add_argument("--fn", help="функция вместо ряда (нулевой эксперимент)")
    _grids(sharpness, nmax=16)
    _common(sharpness)
    return parser


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Снимок параметров запуска из аргументов командной строки."""
    kinds = {
        "measure": ExperimentKind.MOMENTS,
        "fn": ExperimentKind.FN_CHECK,
        "theta": ExperimentKind.THETA_SWEEP,
        "martingale": ExperimentKind.MARTINGALE,
        "lil": ExperimentKind.LIL,
        "kernel": ExperimentKind.KERNEL,
        "sharpness": ExperimentKind.SHARPNESS,
    }
    kind = kinds[args.command]
    return ExperimentConfig(
        kind=kind,
        fn_path=getattr(args, "fn", None),
        measure_path=getattr(args, "measure", None),
        kernel_action=KernelAction(args.action) if kind == ExperimentKind.KERNEL else None,
        lil_mode=LilMode(getattr(args, "mode", LilMode.THETA.value)),
        m=getattr(args, "m", 0),
        alpha=getattr(args, "alpha", 1.0),
        ell=getattr(args, "ell", None),
        order=getattr(args, "order", None),
        x=parse_points(getattr(args, "x", None)),
        eps_list=parse_grid(getattr(args, "eps_grid", None)),
        n_max=getattr(args, "nmax", 10),
        n_min=getattr(args, "nmin", 4),
        samples=getattr(args, "samples", 256),
        b=getattr(args, "b", 2.0),
        theta0=getattr(args, "theta0", None),
        seed=args.seed,
        threads=args.threads,
        quad_tol=args.quad_tol,
        eval_tol=args.eval_tol,
        out=args.out,
        svg=args.svg,
    )


async def main_async(cfg: ExperimentConfig, logger: LoggerService) -> int:
    """Асинхронный запуск эксперимента."""
    service = ExperimentService(logger)
    return await service.run(cfg)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logger = LoggerService()
    export = ExportService(logger)
    try:
        args = build_parser().parse_args(argv)
        config.validate()
        cfg = build_config(args)
        return asyncio.run(main_async(cfg, logger))
    except OscLabError as e:
        logger.error(e.message)
        export.write_error_report(export.error_report(e), _out_of(argv))
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
