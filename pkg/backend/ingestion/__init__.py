from .ingestion import ConfigError, ConfigIngestion, load_config

__all__ = ["ConfigError", "ConfigIngestion", "load_config"]
