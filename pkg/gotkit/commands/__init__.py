from .config import ExperimentConfig, PolicySpec, REFERENCE_CONFIG, parse_config, validate_config
from .compare import ComparisonReport, Estimate, PolicyRow, compare, run_compare, write_report
from .timeseries import run_timeseries, timeseries
from .solve import run_solve, solve
from .tensor import tensor_dump, tensor_report
from .sweep import run_sweep, sweep
from .selfcheck import CheckResult, run_selfcheck, write_table
