"""CLI and configuration surface: decode runs, trace tables, benchmarks, comparisons."""

from codedec.harness.config import ConfigError, build_config, load_config_file
from codedec.harness.report import CountingProvider, RunReport, canonical_json

__all__ = [
    "ConfigError",
    "build_config",
    "load_config_file",
    "CountingProvider",
    "RunReport",
    "canonical_json",
]
