# License: BSD 3 clause
"""Handles reading and writing result tables and trace dumps."""

from .readers import BinaryTraceReader, CSVTraceReader, TraceReader, read_table
from .writers import BinaryTraceWriter, CSVTraceWriter, TraceWriter, header_line, write_table

__all__ = [
    "TraceReader",
    "CSVTraceReader",
    "BinaryTraceReader",
    "read_table",
    "TraceWriter",
    "CSVTraceWriter",
    "BinaryTraceWriter",
    "header_line",
    "write_table",
]
