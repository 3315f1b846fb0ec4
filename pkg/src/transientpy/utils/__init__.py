from .config import configure_logging, log_run_config

__all__ = ["configure_logging", "log_run_config"]
