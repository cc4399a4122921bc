"""Study orchestration: error measures, EOC tables, stability study, CLI."""
from .config import ConfigError, StudyConfig, load_config, parse_config_text
from .errors import ErrorSet, compute_eoc, compute_errors
from .study import EocRow, run_eoc, run_level, run_stab, theory_rates

__all__ = [
    "ConfigError",
    "StudyConfig",
    "load_config",
    "parse_config_text",
    "ErrorSet",
    "compute_eoc",
    "compute_errors",
    "EocRow",
    "run_eoc",
    "run_level",
    "run_stab",
    "theory_rates",
]
