"""Shared fixtures for the root-level test modules."""

import logging

import numpy as np
import pytest

from ConfigLoader import config
from GraphLibrary import build


@pytest.fixture(autouse=True)
def default_config(monkeypatch):
    """Every test starts from the bundled configuration file."""
    monkeypatch.delenv("RICCI_UNIFORM_CONFIG", raising=False)
    config.reload()
    yield
    monkeypatch.delenv("RICCI_UNIFORM_CONFIG", raising=False)
    config.reload()


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def d66():
    return build("d6_6")


@pytest.fixture
def gp83():
    return build("gp_8_3")


@pytest.fixture
def heawood_hex():
    return build("heawood_hex")


@pytest.fixture
def tadpole():
    return build("tadpole_6_1")


@pytest.fixture
def debug_logs(caplog):
    caplog.set_level(logging.DEBUG)
    return caplog
