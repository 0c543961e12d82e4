from .config import ConfigError, ExperimentConfig

__all__ = ["ConfigError", "ExperimentConfig"]
