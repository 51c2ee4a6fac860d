"""Benchmark harness and command-line interface."""
from .config import BenchConfig, InitialControls, emit_config, load_config, parse_config, parse_scheme
from .harness import (
    BenchSummary,
    RestartRecord,
    compare,
    emit_trace,
    initial_controls,
    load_records,
    read_trace,
    render_table,
    run_benchmark,
    run_restart,
    summarize,
)

__all__ = [
    "BenchConfig", "InitialControls", "emit_config", "load_config", "parse_config",
    "parse_scheme", "BenchSummary", "RestartRecord", "compare", "emit_trace",
    "initial_controls", "load_records", "read_trace", "render_table", "run_benchmark",
    "run_restart", "summarize",
]
