"""File formats, cross-molecule statistics, figures, and the CLI.

``plots`` and ``cli`` import matplotlib and are loaded on demand; importing
this package only pulls in the format and statistics layers.
"""

from . import io, stats
from .io import FormatError, read_records, read_scheme, read_spectrum, write_spectrum
from .stats import MoleculeRecord, RecordMode, match_modes, mode_statistics

__all__ = [
    "io", "stats",
    "FormatError", "read_records", "read_scheme", "read_spectrum", "write_spectrum",
    "MoleculeRecord", "RecordMode", "match_modes", "mode_statistics",
]
