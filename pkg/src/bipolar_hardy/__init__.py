"""Numerical laboratory for sharp bipolar L^p Hardy inequalities."""

from .config import BipolarConfig, ConfigError, default_config, make_config

__version__ = "0.1.0"

__all__ = ["BipolarConfig", "ConfigError", "default_config", "make_config", "__version__"]
