# License: BSD 3 clause
"""Reads result tables and trace dumps written by :mod:`dmcl.data.writers`."""

import json
import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from dmcl.types import HeaderDict, PathOrStr
from dmcl.utils.constants import TRACE_MAGIC


def read_table(path: PathOrStr) -> Tuple[HeaderDict, pd.DataFrame]:
    """
    Read a result table.

    Returns
    -------
    header : :class:`dmcl.types.HeaderDict`
        The provenance header.
    df : pandas.DataFrame
        The table body.

    Raises
    ------
    ValueError
        If the first line is not a ``#`` JSON header.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as input_file:
        first = input_file.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path} has no provenance header.")
        header = json.loads(first[2:])
        df = pd.read_csv(input_file)
    return header, df


class TraceReader(object):
    """
    Read trace dumps back into count arrays.

    Parameters
    ----------
    path : :class:`dmcl.types.PathOrStr`
        A ``.csv`` or ``.dmct`` trace file.
    logger : Optional[logging.Logger], default=None
        A logger instance to use instead of the module logger.
    """

    def __init__(self, path: PathOrStr, logger: Optional[logging.Logger] = None):
        self.path = Path(path)
        self.logger = logger if logger else logging.getLogger(__name__)

    @classmethod
    def for_path(cls, path: PathOrStr, **kwargs) -> "TraceReader":
        """Instantiate the ``TraceReader`` sub-class matching the file extension."""
        ext = Path(path).suffix.lower()
        if ext not in EXT_TO_READER:
            raise ValueError(
                f"Unknown trace file extension '{ext}'; expected one of {sorted(EXT_TO_READER)}."
            )
        return EXT_TO_READER[ext](path, **kwargs)

    def read(self) -> Tuple[HeaderDict, np.ndarray]:
        """Return the header and the ``z_k`` counts as int64."""
        self.logger.debug(f"Reading trace from {self.path}")
        return self._read()

    def _read(self) -> Tuple[HeaderDict, np.ndarray]:
        raise NotImplementedError


class CSVTraceReader(TraceReader):
    """Read a ``k,z_k`` CSV trace."""

    def _read(self) -> Tuple[HeaderDict, np.ndarray]:
        header, df = read_table(self.path)
        if list(df.columns) != ["k", "z_k"]:
            raise ValueError(f"{self.path} does not have the columns k,z_k.")
        return header, df["z_k"].to_numpy(dtype=np.int64)


class BinaryTraceReader(TraceReader):
    """Read a ``DMCT1`` binary trace."""

    def _read(self) -> Tuple[HeaderDict, np.ndarray]:
        with open(self.path, "rb") as input_file:
            magic = input_file.readline().rstrip(b"\n")
            if magic != TRACE_MAGIC:
                raise ValueError(f"{self.path} is not a {TRACE_MAGIC.decode()} trace.")
            header = json.loads(input_file.readline().decode("utf-8"))
            z = np.frombuffer(input_file.read(), dtype="<i8").astype(np.int64)
        if "n_symbols" in header and header["n_symbols"] != z.shape[0]:
            raise ValueError(
                f"{self.path} holds {z.shape[0]} counts, header says {header['n_symbols']}."
            )
        return header, z


EXT_TO_READER = {
    ".csv": CSVTraceReader,
    ".dmct": BinaryTraceReader,
}
