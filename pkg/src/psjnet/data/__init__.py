"""Dataset construction: simulation, preprocessing, synthetic benchmark, splits and file formats."""

from .formats import (
    RawEvent,
    format_sequence,
    parse_sequence_line,
    read_raw_events,
    read_sequences,
    write_raw_events,
    write_sequences,
)
from .preprocess import PreprocessRules, preprocess_logs
from .simulate import DatasetStats, SimConfig, SimResult, simulate_shared_accounts
from .split import split_dataset
from .synthetic import Benchmark, SynthConfig, generate_raw_users, make_synthetic_benchmark, split_stats, write_splits
