import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pfxapp.config import load_config, uniform_config  # noqa: E402
from pfxapp.xapp import BetaGrid, build_policy_table, run_sweep  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
ACCEPTANCE_LINES: list[str] = []
TIMINGS: dict[str, float] = {}

PRIORITY_PATTERNS = [
    (3.0, 0.2, 0.2, 0.2), (0.2, 3.0, 0.2, 0.2), (0.2, 0.2, 3.0, 0.2), (0.2, 0.2, 0.2, 3.0),
    (0.4, 0.4, 1.4, 1.4), (0.4, 1.4, 1.4, 0.4), (1.4, 0.4, 0.4, 1.4), (1.4, 0.4, 1.4, 0.4),
    (0.4, 1.4, 0.4, 1.4), (1.4, 1.4, 0.4, 0.4),
    (2.4, 1.2, 0.4, 0.4), (1.2, 2.4, 0.4, 0.4), (1.2, 0.4, 0.4, 2.4), (0.4, 2.4, 0.4, 1.2),
    (2.4, 0.4, 0.4, 1.2), (1.2, 0.4, 2.4, 0.4), (2.4, 0.4, 1.2, 0.4), (0.4, 2.4, 1.2, 0.4),
    (0.4, 1.2, 0.4, 2.4), (0.4, 0.4, 2.4, 1.2), (0.4, 1.2, 2.4, 0.4), (0.4, 0.4, 1.2, 2.4),
]
BETA_VALUES = (0.8, 0.85, 0.9, 0.95, 1.0)


@pytest.fixture(scope="session")
def cell4():
    """Shipped default cell: 4 saturated UEs, 25 RBs x ~200 bits, T_A = 50 ms."""
    return load_config(ROOT / "configs" / "sim.toml")


@pytest.fixture(scope="session")
def sweep4(cell4):
    t0 = time.perf_counter()
    ds = run_sweep(BetaGrid(BETA_VALUES), cell4, n_windows=200, warmup_windows=10)
    TIMINGS["sweep4"] = time.perf_counter() - t0
    return ds


@pytest.fixture(scope="session")
def table4(sweep4):
    return build_policy_table(sweep4, q=0.99, value_step=0.1)


@pytest.fixture(scope="session")
def cell2():
    return uniform_config(2, bits_per_rb=200, sigma=0.3, seed=3)


@pytest.fixture(scope="session")
def table2(cell2):
    ds = run_sweep(BetaGrid((0.8, 0.9, 1.0)), cell2, n_windows=100, warmup_windows=5)
    return build_policy_table(ds, q=0.95)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
