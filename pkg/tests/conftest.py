"""Shared fixtures: one calibrated catalog and pre-run scheme reports."""
import sys

import pytest

from hetpipe.engine_model import calibrate, default_measurements, default_orin_catalog
from hetpipe.allocator import SCHEMES, default_pipeline_plan
from hetpipe.pipeline_sim import (
    PACING_SATURATED,
    Scenario,
    SourceSpec,
    simulate,
)


@pytest.fixture(scope="session")
def catalog():
    return default_orin_catalog(cost_params=calibrate(default_measurements()))


@pytest.fixture(scope="session")
def plans(catalog):
    return {scheme: default_pipeline_plan(scheme, catalog) for scheme in SCHEMES}


@pytest.fixture(scope="session")
def realtime_reports(catalog, plans):
    out = {}
    for scheme in SCHEMES:
        sc = Scenario(sources=(SourceSpec(),), plan=plans[scheme], catalog=catalog)
        out[scheme] = simulate(sc)
    return out


@pytest.fixture(scope="session")
def saturated_reports(catalog, plans):
    out = {}
    for scheme in SCHEMES:
        sc = Scenario(sources=(SourceSpec(),), plan=plans[scheme], catalog=catalog,
                      pacing=PACING_SATURATED)
        out[scheme] = simulate(sc)
    return out


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = (sys.modules.get("test_acceptance")
           or sys.modules.get("tests.test_acceptance"))
    verdicts = getattr(mod, "VERDICTS", None) if mod else None
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)
