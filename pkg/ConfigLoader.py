"""
Configuration loader for the ricci-uniform toolkit.
Loads solver, integrator and uniformization defaults from a JSON file.
"""

import json
import logging
import os
from typing import Dict, Any

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "RICCI_UNIFORM_CONFIG"
DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "ricci_config", "system_config.json")


class ConfigLoader:
    """Loads and manages system configuration"""

    _instance = None
    _config = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(ConfigLoader, cls).__new__(cls)
        return cls._instance

    def __init__(self):
        if self._config is None:
            self._load_config()

    def _load_config(self):
        """Load configuration from JSON file"""
        config_path = os.environ.get(CONFIG_ENV_VAR, DEFAULT_CONFIG_PATH)
        try:
            with open(config_path, "r") as f:
                self._config = json.load(f)
        except FileNotFoundError:
            logger.warning("Config file %s not found, using defaults", config_path)
            self._config = self._get_default_config()
        except json.JSONDecodeError as e:
            logger.warning("Error loading config: %s, using defaults", e)
            self._config = self._get_default_config()

    def reload(self):
        """Re-read the configuration file (used after changing RICCI_UNIFORM_CONFIG)."""
        self._load_config()

    def _get_default_config(self) -> Dict[str, Any]:
        """Return default configuration if file loading fails"""
        return {
            "lp": {
                "tolerance": 1e-9,
                "max_iterations": 10000
            },
            "curvature": {
                "default_alpha": 0.99,
                "closed_form_min_girth": 6
            },
            "flow": {
                "dt": 1e-2,
                "t_max": 30.0,
                "tol": 1e-8,
                "sample_every": 10,
                "max_step_change": 0.5,
                "min_dt": 1e-12,
                "consistency_tolerance": 1e-9
            },
            "uniformization": {
                "tol": 1e-10,
                "max_iter": 100,
                "max_potential_spread": 20.0,
                "brute_force_limit": 24,
                "max_halvings": 60
            },
            "random_init": {
                "low": 0.5,
                "high": 1.5
            }
        }

    def get(self, key_path: str, default=None):
        """Get configuration value using dot notation (e.g., 'flow.dt')"""
        keys = key_path.split('.')
        value = self._config

        try:
            for key in keys:
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def get_lp_tolerance(self) -> float:
        """Get pivot/feasibility tolerance of the simplex solver"""
        return float(self.get("lp.tolerance", 1e-9))

    def get_lp_max_iterations(self) -> int:
        """Get the pivot budget per simplex phase"""
        return int(self.get("lp.max_iterations", 10000))

    def get_default_alpha(self) -> float:
        """Get idleness used by the alpha oracle when none is given"""
        return float(self.get("curvature.default_alpha", 0.99))

    def get_closed_form_min_girth(self) -> int:
        """Get the girth from which the closed-form curvature is valid"""
        return int(self.get("curvature.closed_form_min_girth", 6))

    def get_flow_defaults(self) -> Dict[str, float]:
        """Get integrator defaults (dt, t_max, tol, sample_every, guards)"""
        return {
            "dt": float(self.get("flow.dt", 1e-2)),
            "t_max": float(self.get("flow.t_max", 30.0)),
            "tol": float(self.get("flow.tol", 1e-8)),
            "sample_every": int(self.get("flow.sample_every", 10)),
            "max_step_change": float(self.get("flow.max_step_change", 0.5)),
            "min_dt": float(self.get("flow.min_dt", 1e-12)),
        }

    def get_consistency_tolerance(self) -> float:
        """Get tolerance for the total-curvature consistency of a target"""
        return float(self.get("flow.consistency_tolerance", 1e-9))

    def get_uniformization_defaults(self) -> Dict[str, float]:
        """Get Newton solver defaults"""
        return {
            "tol": float(self.get("uniformization.tol", 1e-10)),
            "max_iter": int(self.get("uniformization.max_iter", 100)),
            "max_potential_spread": float(self.get("uniformization.max_potential_spread", 20.0)),
            "max_halvings": int(self.get("uniformization.max_halvings", 60)),
        }

    def get_brute_force_limit(self) -> int:
        """Get the largest vertex count accepted by subset enumeration"""
        return int(self.get("uniformization.brute_force_limit", 24))

    def get_random_init_range(self) -> tuple:
        """Get the (low, high) range of random initial weights"""
        return (float(self.get("random_init.low", 0.5)), float(self.get("random_init.high", 1.5)))

# Global config instance
config = ConfigLoader()
