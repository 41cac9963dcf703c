"""Experiment sweeps, digit-image pipeline and file formats."""

from .container import read_container, write_container
from .digits import emit_pgm, run_digits, synthetic_digits_trial, two_drop_supports
from .idx import (IdxDimensionError, IdxError, IdxImages, IdxLabels, IdxMagicError,
                  IdxTruncatedError, parse_idx, write_idx)
from .sweep import SweepConfig, SweepRecord, format_csv, load_config, parse_config, run_sweep

__all__ = [
    "read_container", "write_container", "emit_pgm", "run_digits", "synthetic_digits_trial",
    "two_drop_supports", "IdxDimensionError", "IdxError", "IdxImages", "IdxLabels",
    "IdxMagicError", "IdxTruncatedError", "parse_idx", "write_idx", "SweepConfig",
    "SweepRecord", "format_csv", "load_config", "parse_config", "run_sweep",
]
