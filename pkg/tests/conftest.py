import numpy as np
import pytest

from csslab.grid import build_grid

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def grid():
    return build_grid(400.0, 2048, 2048, 10.0)


@pytest.fixture(scope="session")
def fine_grid():
    return build_grid(400.0, 4096, 4096, 10.0)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(_ACCEPTANCE, key=lambda e: int(e[0][1:])):
        terminalreporter.write_line(f"{crit}: {'PASS' if ok else 'FAIL'}  {detail}")


def q_exact(r):
    return np.sqrt(8.0) / (1.0 + r**2)
