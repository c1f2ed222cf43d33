# License: BSD 3 clause
"""
Writes result tables and simulated traces to disk.

Every file starts with a provenance header: a ``#``-prefixed JSON line in
text files, and a JSON line after the magic in binary trace dumps.
"""

import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from dmcl.simulation import SimTrace
from dmcl.types import HeaderDict, PathOrStr
from dmcl.utils.constants import TRACE_MAGIC


def header_line(header: HeaderDict) -> str:
    """Serialize a provenance header with sorted keys."""
    return json.dumps(header, sort_keys=True, separators=(", ", ": "))


def write_table(df: pd.DataFrame, path: PathOrStr, header: HeaderDict) -> Path:
    """
    Write a result table as CSV below a ``# {header}`` line.

    Parameters
    ----------
    df : pandas.DataFrame
        The table; its columns become the CSV header.
    path : :class:`dmcl.types.PathOrStr`
        Output path; parent directories are created.
    header : :class:`dmcl.types.HeaderDict`
        Provenance written as JSON on the first line.

    Returns
    -------
    pathlib.Path
        The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as output_file:
        output_file.write(f"# {header_line(header)}\n")
        df.to_csv(output_file, index=False, lineterminator="\n")
    return path


class TraceWriter(object):
    """
    Write :class:`dmcl.simulation.SimTrace` objects to files on disk.

    This is the base class of the trace writers; use :meth:`for_path` to get
    the one that matches a file extension.

    Parameters
    ----------
    path : :class:`dmcl.types.PathOrStr`
        Output file. The suffix must be ``.csv`` or ``.dmct``.
    header : :class:`dmcl.types.HeaderDict`
        Provenance (seed, backend, config hash, ...).
    logger : Optional[logging.Logger], default=None
        A logger instance to use instead of the module logger.
    """

    def __init__(
        self, path: PathOrStr, header: HeaderDict, logger: Optional[logging.Logger] = None
    ):
        self.path = Path(path)
        self.header = dict(header)
        self.logger = logger if logger else logging.getLogger(__name__)

    @classmethod
    def for_path(cls, path: PathOrStr, header: HeaderDict, **kwargs) -> "TraceWriter":
        """
        Retrieve the ``TraceWriter`` sub-class appropriate for the given path.

        Raises
        ------
        ValueError
            If the extension is not a known trace format.
        """
        ext = Path(path).suffix.lower()
        if ext not in EXT_TO_WRITER:
            raise ValueError(
                f"Unknown trace file extension '{ext}'; expected one of {sorted(EXT_TO_WRITER)}."
            )
        return EXT_TO_WRITER[ext](path, header, **kwargs)

    def _full_header(self, trace: SimTrace) -> HeaderDict:
        header = dict(self.header)
        header.update(
            {
                "seed": trace.seed,
                "backend": trace.backend,
                "trial": trace.trial,
                "Q": trace.tx.Q,
                "T_b_eff": trace.T_b_eff,
                "n_symbols": len(trace),
            }
        )
        return header

    def write(self, trace: SimTrace) -> Path:
        """Write a single trace and return the written path."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.logger.debug(f"Writing trace of {len(trace)} symbols to {self.path}")
        self._write_trace(trace, self._full_header(trace))
        return self.path

    def _write_trace(self, trace: SimTrace, header: HeaderDict) -> None:
        raise NotImplementedError


class CSVTraceWriter(TraceWriter):
    """Write a trace as CSV with columns ``k,z_k``."""

    def _write_trace(self, trace: SimTrace, header: HeaderDict) -> None:
        df = pd.DataFrame({"k": np.arange(len(trace)), "z_k": trace.z})
        write_table(df, self.path, header)


class BinaryTraceWriter(TraceWriter):
    """
    Write a trace as a binary columnar dump.

    Layout: ``DMCT1\\n``, one JSON header line, then the counts as
    little-endian 64-bit integers.
    """

    def _write_trace(self, trace: SimTrace, header: HeaderDict) -> None:
        with open(self.path, "wb") as output_file:
            output_file.write(TRACE_MAGIC + b"\n")
            output_file.write(header_line(header).encode("utf-8") + b"\n")
            output_file.write(trace.z.astype("<i8").tobytes())


EXT_TO_WRITER = {
    ".csv": CSVTraceWriter,
    ".dmct": BinaryTraceWriter,
}
