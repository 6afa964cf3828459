import numpy as np
import pytest

from qksd.bench import prepare
from qksd.models import chain


@pytest.fixture(scope="session")
def chain10():
    return prepare("heisenberg", chain(10))


@pytest.fixture(scope="session")
def chain4():
    return prepare("heisenberg", chain(4))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(n, ok, detail)``."""

    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
