#!/usr/bin/env python3
"""
Tests for the JSON configuration layer and its environment override.
"""

import json

import pytest

from ConfigLoader import CONFIG_ENV_VAR, ConfigLoader, config
from RicciFlow import IntegratorOptions
from Uniformization import SizeError, check_condition_brute


def test_singleton():
    assert ConfigLoader() is config


def test_bundled_defaults():
    flow = config.get_flow_defaults()
    assert flow["dt"] == 0.01
    assert flow["t_max"] == 30.0
    assert flow["sample_every"] == 10
    assert config.get_closed_form_min_girth() == 6
    assert config.get_random_init_range() == (0.5, 1.5)
    assert config.get_uniformization_defaults()["max_iter"] == 100


def test_dot_path_lookup():
    assert config.get("lp.max_iterations") == 10000
    assert config.get("lp.no_such_key", "fallback") == "fallback"
    assert config.get("flow.dt.deeper") is None


def test_environment_override(tmp_path, monkeypatch, gp83):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"flow": {"dt": 0.2}, "uniformization": {"brute_force_limit": 8}}))
    monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
    config.reload()

    assert IntegratorOptions.from_config().dt == 0.2
    # Keys missing from the file fall back to the built-in values
    assert IntegratorOptions.from_config().t_max == 30.0
    with pytest.raises(SizeError):
        check_condition_brute(gp83)


@pytest.mark.parametrize("contents", [None, "{ not json"])
def test_unreadable_file_falls_back_to_defaults(tmp_path, monkeypatch, caplog, contents):
    path = tmp_path / "config.json"
    if contents is not None:
        path.write_text(contents)
    monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
    config.reload()
    assert config.get("flow.tol") == 1e-8
    assert "using defaults" in caplog.text
