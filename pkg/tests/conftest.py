"""Shared fixtures and the acceptance-criterion report."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from laserflash.config import load_config
from laserflash.pipeline import build_operators, build_surrogate

ROOT = Path(__file__).resolve().parents[1]
COPPER_INI = ROOT / "configs" / "copper.ini"

# Coarse mesh and short time grid used by most unit tests.
SMALL = ("discretization.h_target=3.4e-4", "discretization.n_t=40", "discretization.n_d=41")
# Desk-scale mesh (n_h ~ 1000) used by the acceptance criteria.
DESK_H = 1.7e-4


def copper(*overrides):
    return load_config(COPPER_INI, list(overrides))


@pytest.fixture(scope="session")
def small_config():
    return copper(*SMALL)


@pytest.fixture(scope="session")
def small_ops(small_config):
    return build_operators(small_config)[1]


@pytest.fixture(scope="session")
def small_surrogate(small_config, small_ops):
    return build_surrogate(small_config, small_ops)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    item.config._criteria[marker.args[0]] = ("PASS" if report.passed else "FAIL", detail,
                                             report.duration)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        status, detail, dt = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  ({dt:.1f} s)  {detail}")
