import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from enum import Enum
from fractions import Fraction
from typing import Any, Optional

import numpy as np

from .errors import ConfigurationError, UnsupportedDimensionError

Number = int | float | Fraction
Point = tuple[Number, ...]


class FunctionKind(str, Enum):
    """Семейства тестовых функций."""

    WEIERSTRASS = "weierstrass"
    ZYGMUND_WEIERSTRASS = "zygmund_weierstrass"
    SMOOTHED_WEIERSTRASS = "smoothed_weierstrass"
    CUSP = "cusp"
    POLYNOMIAL = "polynomial"
    BUMP = "bump"
    HAT = "hat"
    SAMPLED = "sampled"


class MeasureName(str, Enum):
    """Именованные меры."""

    SYM1 = "sym1"
    SYM2 = "sym2"
    GENERAL = "general"
    SPHERE_MINUS_DELTA = "sphere_minus_delta"
    CLASSICAL = "classical"


class CorollaryForm(str, Enum):
    """Частные формы осцилляционного функционала."""

    GAMMA = "gamma"
    OMEGA = "omega"
    SPHERE = "sphere"


class LilMode(str, Enum):
    """Нормировка отношения закона повторного логарифма."""

    MARTINGALE = "martingale"
    THETA = "theta"


class ExperimentKind(str, Enum):
    """Виды экспериментов CLI."""

    MOMENTS = "moments"
    FN_CHECK = "fn-check"
    THETA_SWEEP = "theta-sweep"
    MARTINGALE = "martingale"
    LIL = "lil"
    KERNEL = "kernel"
    SHARPNESS = "sharpness"


class KernelAction(str, Enum):
    """Подкоманды эксперимента с ядром."""

    REPORT = "report"
    COMPARE = "compare"


@dataclass(frozen=True)
class Atom:
    """Точечная масса weight·δ_point."""

    point: Point
    weight: Number


@dataclass(frozen=True)
class SphereComponent:
    """weight × нормированная мера на сфере радиуса radius."""

    radius: Number
    weight: Number


def _is_exact(value: Any) -> bool:
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


@dataclass(frozen=True)
class SignedMeasure:
    """
    Знакопеременная мера с компактным носителем.

    Атомы плюс необязательная равномерная мера на сфере (d ≤ 3).
    support_radius = None означает вычисление радиуса по полям.
    """

    dim: int
    atoms: tuple[Atom, ...]
    sphere: Optional[SphereComponent] = None
    support_radius: Optional[Number] = None
    declared_moment_order: int = -1

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError(f"Размерность меры должна быть положительной: {self.dim}")
        if self.sphere is not None and self.dim > 3:
            raise UnsupportedDimensionError(
                f"Сферическая компонента поддерживается только при d ≤ 3, получено d={self.dim}"
            )
        if self.sphere is not None and not self.sphere.radius > 0:
            raise ConfigurationError(f"Радиус сферы должен быть положительным: {self.sphere.radius}")
        for atom in self.atoms:
            if len(atom.point) != self.dim:
                raise ConfigurationError(
                    f"Атом {atom.point} не согласован с размерностью d={self.dim}"
                )
        if self.declared_moment_order < -1:
            raise ConfigurationError(
                f"Заявленный порядок моментов должен быть ≥ −1: {self.declared_moment_order}"
            )

        radius = self._natural_radius()
        if self.support_radius is None:
            object.__setattr__(self, "support_radius", radius)
        elif float(self.support_radius) < float(radius) * (1.0 - 1e-12):
            raise ConfigurationError(
                f"Радиус носителя {self.support_radius} меньше нормы атомов/сферы {radius}"
            )

    def _natural_radius(self) -> Number:
        radius: Number = 0
        for atom in self.atoms:
            if self.dim == 1:
                norm = abs(atom.point[0])
            else:
                norm = math.sqrt(sum(float(c) ** 2 for c in atom.point))
            radius = max(radius, norm)
        if self.sphere is not None:
            radius = max(radius, self.sphere.radius)
        return radius

    @property
    def total_variation(self) -> Number:
        """‖σ‖ = Σ|w| + |w_sphere|."""
        total: Number = sum((abs(atom.weight) for atom in self.atoms), 0)
        if self.sphere is not None:
            total += abs(self.sphere.weight)
        return total

    @property
    def is_exact(self) -> bool:
        """Все координаты и веса рациональны."""
        values: list[Any] = [atom.weight for atom in self.atoms]
        for atom in self.atoms:
            values.extend(atom.point)
        if self.sphere is not None:
            values.extend([self.sphere.radius, self.sphere.weight])
        return all(_is_exact(v) for v in values)

    @property
    def radius(self) -> float:
        """M в плавающей арифметике."""
        return float(self.support_radius)

    def points_array(self) -> np.ndarray:
        """Координаты атомов, форма (n_atoms, d)."""
        if not self.atoms:
            return np.zeros((0, self.dim))
        return np.array([[float(c) for c in atom.point] for atom in self.atoms], dtype=float)

    def weights_array(self) -> np.ndarray:
        """Веса атомов, форма (n_atoms,)."""
        return np.array([float(atom.weight) for atom in self.atoms], dtype=float)


@dataclass(frozen=True)
class FunctionSpec:
    """
    Описание вычислимой функции на R^d.

    Параметры, не относящиеся к kind, игнорируются. Одномерные семейства
    при d > 1 действуют на переменную ⟨direction, x⟩.
    """

    kind: FunctionKind
    dim: int = 1
    b: Optional[float] = None
    alpha: Optional[float] = None
    order: int = 0
    coeffs: tuple[float, ...] = ()
    center: tuple[float, ...] = ()
    width: Optional[float] = None
    grid: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    direction: tuple[float, ...] = ()
    scale: float = 1.0
    declared_m: Optional[int] = None
    declared_alpha: Optional[float] = None
    eval_tol: float = 1e-10

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError(f"Размерность функции должна быть положительной: {self.dim}")
        if not self.eval_tol > 0:
            raise ConfigurationError(f"eval_tol должен быть положительным: {self.eval_tol}")
        if self.kind in (
            FunctionKind.WEIERSTRASS,
            FunctionKind.ZYGMUND_WEIERSTRASS,
            FunctionKind.SMOOTHED_WEIERSTRASS,
        ):
            if self.b is None or not self.b >= 1.1:
                raise ConfigurationError(f"Лакунарный ряд требует b ≥ 1.1, получено b={self.b}")
        if self.kind in (
            FunctionKind.WEIERSTRASS,
            FunctionKind.SMOOTHED_WEIERSTRASS,
            FunctionKind.CUSP,
        ):
            if self.alpha is None or not 0 < self.alpha <= 1:
                raise ConfigurationError(f"Показатель α должен лежать в (0, 1]: {self.alpha}")
        if self.kind in (FunctionKind.BUMP, FunctionKind.HAT):
            if self.width is None or not self.width > 0:
                raise ConfigurationError(f"Ширина носителя должна быть положительной: {self.width}")
        if self.kind == FunctionKind.SAMPLED:
            if len(self.grid) < 4 or len(self.grid) != len(self.values):
                raise ConfigurationError("Сеточная функция требует ≥ 4 узлов и равные длины grid/values")
        if self.direction and len(self.direction) != self.dim:
            raise ConfigurationError(f"Направление {self.direction} не согласовано с d={self.dim}")

    @property
    def declared_class(self) -> tuple[int, float]:
        """Заявленный класс гладкости (m, α)."""
        if self.declared_m is not None and self.declared_alpha is not None:
            return self.declared_m, self.declared_alpha
        if self.kind == FunctionKind.WEIERSTRASS:
            default = (0, float(self.alpha))
        elif self.kind == FunctionKind.SMOOTHED_WEIERSTRASS:
            default = (self.order, float(self.alpha))
        elif self.kind == FunctionKind.CUSP:
            default = (0, float(self.alpha))
        else:
            default = (0, 1.0)
        m = self.declared_m if self.declared_m is not None else default[0]
        alpha = self.declared_alpha if self.declared_alpha is not None else default[1]
        return m, alpha


def moment_order(m: int, alpha: float) -> int:
    """[m+α]: целая часть снизу, m+1 при α = 1."""
    return m + 1 if alpha >= 1.0 else int(math.floor(m + alpha))


@dataclass(frozen=True)
class OscillationRequest:
    """Параметры вычисления Θ_ε^σ f(x)."""

    f: FunctionSpec
    sigma: SignedMeasure
    x: tuple[float, ...]
    eps: float
    m: int = 0
    alpha: float = 1.0
    quad_tol: float = 1e-8

    @property
    def exponent(self) -> float:
        return self.m + self.alpha


@dataclass
class OscillationResult:
    """Значение функционала с оценкой ошибки квадратуры."""

    value: float
    quad_error_estimate: float
    evaluations: int


@dataclass
class MomentReport:
    """Отчёт о занулении моментов."""

    order: int
    entries: list[tuple[tuple[int, ...], Number]]
    passed: bool
    tolerance: float = 0.0

    @property
    def offending(self) -> list[tuple[tuple[int, ...], Number]]:
        """Моменты, превысившие допуск."""
        return [(k, v) for k, v in self.entries if abs(v) > self.tolerance]


@dataclass
class SamplePlan:
    """Сетки x и h для эмпирических проверок."""

    x_points: np.ndarray
    h_values: np.ndarray

    def __post_init__(self):
        self.x_points = np.atleast_1d(np.asarray(self.x_points, dtype=float))
        self.h_values = np.atleast_1d(np.asarray(self.h_values, dtype=float))

    @classmethod
    def standard(cls, dim: int = 1, n_points: int = 256, j_min: int = 2, j_max: int = 16) -> "SamplePlan":
        """256 равномерных точек в [0,1)^d (при d = 1 включая 0) и h = 2^{−j}, j = 2..16."""
        grid = np.arange(n_points) / n_points
        if dim == 1:
            points = grid
        else:
            rng = np.random.default_rng(0)
            points = rng.random((n_points, dim))
        return cls(points, 2.0 ** -np.arange(j_min, j_max + 1))

    @property
    def is_empty(self) -> bool:
        return self.x_points.size == 0 or self.h_values.size == 0


@dataclass
class MembershipReport:
    """Результат эмпирической проверки класса гладкости."""

    ratio_sup: float
    exponent_fit: float
    passed: bool
    h_values: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class DyadicCube:
    """Диадический куб поколения n внутри Q₀ = [0,1)^d."""

    generation: int
    index: tuple[int, ...]

    def __post_init__(self):
        size = 2 ** self.generation
        if self.generation < 0 or any(not 0 <= i < size for i in self.index):
            raise ConfigurationError(f"Некорректный диадический куб: n={self.generation}, index={self.index}")

    @property
    def dim(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return 2.0 ** -self.generation

    @property
    def corner(self) -> np.ndarray:
        return np.array(self.index, dtype=float) * self.side

    @property
    def center(self) -> np.ndarray:
        return self.corner + 0.5 * self.side

    @property
    def flat_index(self) -> int:
        """Индекс в построчном порядке."""
        return int(np.ravel_multi_index(self.index, (2 ** self.generation,) * self.dim))

    def children(self) -> list["DyadicCube"]:
        offsets = np.indices((2,) * self.dim).reshape(self.dim, -1).T
        return [
            DyadicCube(self.generation + 1, tuple(2 * i + int(o) for i, o in zip(self.index, off)))
            for off in offsets
        ]

    def parent(self) -> Optional["DyadicCube"]:
        if self.generation == 0:
            return None
        return DyadicCube(self.generation - 1, tuple(i // 2 for i in self.index))

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.corner <= x) and np.all(x < self.corner + self.side))


@dataclass
class DyadicMartingale:
    """Таблицы S_Q по поколениям; значения поколения n хранятся плоским массивом в построчном порядке."""

    f: FunctionSpec
    sigma: SignedMeasure
    m: int
    alpha: float
    quad_tol: float
    tables: dict[int, np.ndarray] = field(default_factory=dict)
    errors: dict[int, np.ndarray] = field(default_factory=dict)
    defects: dict[int, float] = field(default_factory=dict)
    evaluations: int = 0

    @property
    def dim(self) -> int:
        return self.sigma.dim

    @property
    def n_max(self) -> int:
        return max(self.tables) if self.tables else -1

    @property
    def martingale_defect(self) -> float:
        """max по поколениям |S_Q − среднее детей|."""
        return max(self.defects.values(), default=0.0)

    @property
    def increment_norm(self) -> float:
        """‖S‖_B = sup_n ‖S_n − S_{n−1}‖_∞."""
        return max((float(np.max(np.abs(inc))) for inc in self.increments().values()), default=0.0)

    def generation(self, n: int) -> np.ndarray:
        """Значения поколения n формы (2^n,)*d."""
        return self.tables[n].reshape((2 ** n,) * self.dim)

    def value(self, cube: DyadicCube) -> float:
        return float(self.tables[cube.generation][cube.flat_index])

    def cube_indices(self, points: np.ndarray, n: int) -> np.ndarray:
        """Плоские индексы кубов поколения n, содержащих точки (N, d)."""
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        size = 2 ** n
        idx = np.clip(np.floor(points * size).astype(np.int64), 0, size - 1)
        return np.ravel_multi_index(tuple(idx.T), (size,) * self.dim)

    def values_at(self, points: np.ndarray, n: int) -> np.ndarray:
        """S_n(x): значение на кубе, содержащем x."""
        return self.tables[n][self.cube_indices(points, n)]

    def increments(self) -> dict[int, np.ndarray]:
        """S_n − S_{n−1} на кубах поколения n."""
        result: dict[int, np.ndarray] = {}
        for n in sorted(self.tables):
            if n == 0 or n - 1 not in self.tables:
                continue
            parent = np.asarray(self.generation(n - 1))
            for axis in range(self.dim):
                parent = np.repeat(parent, 2, axis=axis)
            result[n] = self.tables[n] - parent.ravel()
        return result


@dataclass
class KernelPropertyReport:
    """Супремумы для оценок ядра K₀ и величины A₁, A₂, A₃."""

    sup_tK0: float
    sup_t2dK0: float
    cancel_sup: float
    A1: float
    A2: float
    A3: float
    support_radius: float
    total_variation: float
    derivative_check_error: float = 0.0
    pass_size: Optional[bool] = None
    pass_smoothness: Optional[bool] = None
    pass_cancellation: Optional[bool] = None

    @property
    def passed(self) -> Optional[bool]:
        flags = (self.pass_size, self.pass_smoothness, self.pass_cancellation)
        if any(flag is None for flag in flags):
            return None
        return all(flags)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["passed"] = self.passed
        return data


@dataclass
class SharpnessConfig:
    """Параметры эксперимента с нижней оценкой для ряда Вейерштрасса–Зигмунда."""

    b: float
    eps_list: list[float]
    x_samples: list[float]
    quad_tol: float = 1e-8
    theta0: Optional[float] = None
    function: Optional[FunctionSpec] = None

    def __post_init__(self):
        if not self.b >= 1.1:
            raise ConfigurationError(f"Основание b должно быть ≥ 1.1, получено {self.b}")
        if not self.eps_list or not self.x_samples:
            raise ConfigurationError("Сетки ε и x не должны быть пустыми")
        if any(not 0 < eps < 1 for eps in self.eps_list):
            raise ConfigurationError("Все ε должны лежать в (0, 1)")
        # Сетка ε хранится по убыванию
        self.eps_list = sorted((float(e) for e in self.eps_list), reverse=True)
        self.x_samples = [float(x) for x in self.x_samples]


@dataclass
class CheckOutcome:
    """Результат одной проверки эксперимента."""

    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.detail}"


@dataclass
class ExperimentConfig:
    """Снимок параметров запуска эксперимента."""

    kind: ExperimentKind
    fn_path: Optional[str] = None
    measure_path: Optional[str] = None
    kernel_action: Optional[KernelAction] = None
    lil_mode: LilMode = LilMode.THETA
    m: int = 0
    alpha: float = 1.0
    ell: Optional[int] = None
    order: Optional[int] = None
    x: list[float] = field(default_factory=list)
    eps_list: list[float] = field(default_factory=list)
    n_max: int = 10
    n_min: int = 4
    samples: int = 256
    b: float = 2.0
    theta0: Optional[float] = None
    seed: int = 0
    threads: int = 1
    quad_tol: float = 1e-8
    eval_tol: float = 1e-10
    out: Optional[str] = None
    svg: Optional[str] = None

    def __post_init__(self):
        if not self.quad_tol > 0 or not self.eval_tol > 0:
            raise ConfigurationError("Все допуски должны быть положительными")
        if self.threads < 1:
            raise ConfigurationError(f"Число потоков должно быть ≥ 1: {self.threads}")
        if self.samples < 1:
            raise ConfigurationError(f"Число выборок должно быть ≥ 1: {self.samples}")
        if self.n_max < 0:
            raise ConfigurationError(f"n_max должен быть неотрицательным: {self.n_max}")

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, Enum):
                data[key] = value.value
        return data


@dataclass
class LogEntry:
    """Запись в логе."""

    id: str
    timestamp: datetime
    level: str  # "INFO" | "WARNING" | "ERROR"
    message: str

    def __post_init__(self):
        if self.timestamp is None:
            self.timestamp = datetime.now()
