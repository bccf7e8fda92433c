import copy
import json
import logging
import threading
from pathlib import Path
from typing import Dict

import config

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS = {
    "analysis": {"k_max": config.DEFAULT_K_MAX, "doeblin_n0": None},
    "simulation": {"seed": 20240101, "samples": 100000, "horizon": 1024,
                   "n_grid": [1024, 2048, 4096], "workers": 0},
    "llt": {"horizon": 256, "samples": 1000000},
    "cf_scan": {"theta_grid": [0.02, 0.04, 0.06, 0.08, 0.1, 0.5, 1.0],
                "n_grid": [2, 3, 4, 5, 6, 7, 8, 9, 10], "mode": "exact", "samples": 10000},
}


class SettingsManager:
    """Read-only view of config.json; missing sections fall back to DEFAULT_SETTINGS."""

    def __init__(self, config_path: str = config.SETTINGS_PATH):
        self.config_path = Path(config_path)
        self._lock = threading.Lock()
        self.settings = self._load_settings()

    def _load_settings(self) -> Dict:
        settings = copy.deepcopy(DEFAULT_SETTINGS)
        if not self.config_path.exists():
            logger.error(f"Configuration file not found at {self.config_path}. Using built-in defaults.")
            return settings

        with self._lock:
            try:
                with open(self.config_path, 'r') as f:
                    loaded = json.load(f)
            except (json.JSONDecodeError, IOError) as e:
                logger.error(f"Error loading settings from {self.config_path}: {e}")
                return settings

        for key, value in loaded.items():
            if isinstance(settings.get(key), dict) and isinstance(value, dict):
                settings[key].update(value)
            else:
                settings[key] = value
        logger.debug("Successfully loaded settings.")
        return settings

    def get_all_settings(self) -> Dict:
        with self._lock:
            return copy.deepcopy(self.settings)

    def get_setting(self, key_path: str, default=None):
        """
        Retrieves a nested setting using a dot-separated key path.
        Example: get_setting('simulation.samples')
        """
        with self._lock:
            value = self.settings
            try:
                for key in key_path.split('.'):
                    value = value[key]
                return value
            except (KeyError, TypeError):
                return default
