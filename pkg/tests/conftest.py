import numpy as np
import pytest

from htype_lab.group import ProductGroup
from htype_lab.metrics import RiemannianSpec, WeightLaw

ACCEPTANCE_LINES = []


@pytest.fixture
def record_acceptance():
    def record(number, title, ok, detail=""):
        ACCEPTANCE_LINES.append((number, title, bool(ok), detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE_LINES):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title}" + (f" ({detail})" if detail else ""))


@pytest.fixture(params=["heisenberg", "quaternionic"])
def algebra_name(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def weak_riemannian():
    return lambda group: RiemannianSpec.for_group(group, WeightLaw.inverse_power(1))


@pytest.fixture
def small_group(algebra_name):
    return ProductGroup.from_name(algebra_name, 6)
