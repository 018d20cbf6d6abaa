import pytest

from core.models import FunctionKind, FunctionSpec, MeasureName
from core.services.function_space_service import FunctionSpaceService
from core.services.kernel_service import KernelService
from core.services.martingale_service import MartingaleService
from core.services.measure_service import MeasureService
from core.services.oscillation_service import OscillationService
from core.services.sharpness_service import SharpnessService


def polynomial(*coeffs: float) -> FunctionSpec:
    """Многочлен с коэффициентами по возрастанию степени."""
    return FunctionSpec(kind=FunctionKind.POLYNOMIAL, coeffs=tuple(float(c) for c in coeffs))


@pytest.fixture
def measures():
    return MeasureService()


@pytest.fixture
def functions():
    return FunctionSpaceService()


@pytest.fixture
def oscillation(measures):
    return OscillationService(measures)


@pytest.fixture
def martingales(oscillation):
    return MartingaleService(oscillation)


@pytest.fixture
def kernels(oscillation):
    return KernelService(oscillation)


@pytest.fixture
def sharpness(oscillation):
    return SharpnessService(oscillation)


@pytest.fixture
def sym1(measures):
    return measures.make_named(MeasureName.SYM1)


@pytest.fixture
def sym2(measures):
    return measures.make_named(MeasureName.SYM2)


@pytest.fixture
def bump():
    return FunctionSpec(kind=FunctionKind.BUMP, width=0.5)
