from .config import ConfigError, RunConfig, load_config, parse_config
from .presets import PRESETS, load_preset, preset_names
from .runner import EnsembleSummary, execute, run, summarize

__all__ = ["ConfigError", "EnsembleSummary", "PRESETS", "RunConfig", "execute",
           "load_config", "load_preset", "parse_config", "preset_names", "run",
           "summarize"]
