"""Configuration, scenario runs and the command-line interface."""

from .config import ConfigError, ExperimentConfig, parse_config, parse_config_text
from .runner import audit, run_experiment

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "parse_config_text",
           "audit", "run_experiment"]
