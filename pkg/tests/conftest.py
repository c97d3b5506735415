import datetime as dt

import numpy as np
import pytest

from abm_reverse.market_data import ReturnSeries, synthetic_dates


def make_series(returns) -> ReturnSeries:
    r = np.asarray(returns, dtype=float)
    return ReturnSeries.from_returns(synthetic_dates(len(r)), r)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def noisy_series():
    rng = np.random.default_rng(7)
    return make_series(rng.normal(0.0, 0.01, 80))


ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE, key=lambda x: int(x[0][1:])):
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")
