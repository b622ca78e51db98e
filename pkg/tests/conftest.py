import math

import numpy as np
import pytest

from mcpgate.harness import build_params, load_config

TWO_PI = 2 * math.pi
GHZ = TWO_PI * 1e9
MHZ = TWO_PI * 1e6


@pytest.fixture(scope="session")
def table1():
    """Table 1 SystemParams and schedule (3-level coupler, kappa_inv = 35 us, T = 20 us)."""
    cfg = load_config("table1")
    return build_params(cfg.system, cfg.k, cfg.s)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Record a one-line verdict for the acceptance summary and return it."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
