"""Configuration, orchestration and CSV output for the experiments."""
from .config import (EXPERIMENTS, AlignmentConfigError, ConfigError, ExperimentConfig, ParseError, load_config,
                     parse_config)
from .runner import ExperimentError, RunResult, record_columns, run, schema_text
from .tables import CompareReport, ResultTable, SchemaError, compare_runs, parse_table, read_table

__all__ = [
    "EXPERIMENTS", "AlignmentConfigError", "ConfigError", "ExperimentConfig", "ParseError", "load_config",
    "parse_config", "ExperimentError", "RunResult", "record_columns", "run", "schema_text", "CompareReport",
    "ResultTable", "SchemaError", "compare_runs", "parse_table", "read_table",
]
