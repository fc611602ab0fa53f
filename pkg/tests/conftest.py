import math

import numpy as np
import pytest

from morrey_nls import GridField, default_state_space, ground_state

ALPHA = 1.5

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def spec():
    return default_state_space(1, ALPHA)


@pytest.fixture(scope="session")
def Q():
    return ground_state(1, ALPHA, n=1024, extent=16 * math.pi).field


@pytest.fixture
def gaussian():
    return GridField.from_function(lambda x: np.exp(-x**2 / 2) * (1 + 0.3j * x), 1, 512, 16 * math.pi)
