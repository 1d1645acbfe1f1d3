from .settings import Settings, load_run_config, settings

__all__ = ["Settings", "load_run_config", "settings"]
