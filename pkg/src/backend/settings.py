import json
import logging
from typing import Optional
from src.backend.chart import ChartStyle, style_from_options
from src.backend.configuration import resolve_config_cap
from src.backend.errors import ChartStyleError
from src.utils.paths import atomic_write_text, get_config_dir

logger = logging.getLogger(__name__)

class SettingsManager:
    def __init__(self):
        self.config_dir = get_config_dir()
        self.settings_file = self.config_dir / "settings.json"
        self.default_settings = {
            "config_cap": 1_000_000,
            "log_level": "INFO",
            "chart_size": 600,
            "offset_step": 4.0,
            "show_unselected": True,
            "exact_max_test_cases": 8,
            "exact_max_configurations": 32,
        }
        self.settings = self.load_settings()

    def load_settings(self) -> dict:
        if not self.settings_file.exists():
            return self.default_settings.copy()

        try:
            with open(self.settings_file, "r", encoding="utf-8") as f:
                stored = json.load(f)
        except (OSError, ValueError) as e:
            logger.warning(f"Ignoring unreadable settings file {self.settings_file}: {e}")
            return self.default_settings.copy()
        if not isinstance(stored, dict):
            logger.warning(f"Ignoring settings file {self.settings_file}: expected a JSON object")
            return self.default_settings.copy()
        return {**self.default_settings, **stored}

    def save_settings(self):
        try:
            atomic_write_text(self.settings_file, json.dumps(self.settings, indent=4, sort_keys=True) + "\n")
        except OSError as e:
            logger.error(f"Failed to save settings to {self.settings_file}: {e}")

    def get(self, key, default=None):
        return self.settings.get(key, default)

    def set(self, key, value):
        self.settings[key] = value
        self.save_settings()

    def config_cap(self, explicit: Optional[int] = None) -> int:
        """Command line beats BENCHLATTICE_CONFIG_CAP beats the stored value."""
        return resolve_config_cap(explicit, self.get("config_cap"))

    def chart_style(self) -> ChartStyle:
        try:
            return style_from_options(self.settings)
        except (ChartStyleError, TypeError, ValueError) as e:
            logger.warning(f"Ignoring chart settings: {e}")
            return ChartStyle()
