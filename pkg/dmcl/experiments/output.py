# License: BSD 3 clause
"""Functions related to writing and printing experiment results."""

import logging
import sys
from pathlib import Path
from typing import IO, Optional

import pandas as pd
from tabulate import tabulate

from dmcl.data import write_table
from dmcl.types import HeaderDict


def write_result(
    df: pd.DataFrame,
    output_dir: Path,
    filename: str,
    header: HeaderDict,
    logger: Optional[logging.Logger] = None,
) -> Path:
    """
    Write one result table into the output directory.

    Parameters
    ----------
    df : pandas.DataFrame
        The table.
    output_dir : pathlib.Path
        Output directory; created if needed.
    filename : str
        File name inside ``output_dir``.
    header : :class:`dmcl.types.HeaderDict`
        Provenance header.
    logger : Optional[logging.Logger], default=None
        Logger for the progress message.

    Returns
    -------
    pathlib.Path
        The written path.
    """
    logger = logger if logger else logging.getLogger(__name__)
    path = write_table(df, Path(output_dir) / filename, header)
    logger.info(f"Wrote {len(df)} row(s) to {path}")
    return path


def print_summary(title: str, df: pd.DataFrame, output_file: IO[str] = sys.stdout) -> None:
    """
    Print a result table to the console.

    Parameters
    ----------
    title : str
        Heading printed above the table.
    df : pandas.DataFrame
        The table.
    output_file : IO[str], default=sys.stdout
        The file buffer to print to.
    """
    print(title, file=output_file)
    print(
        tabulate(df, headers="keys", tablefmt="simple", showindex=False, floatfmt=".6g"),
        file=output_file,
    )
    print("", file=output_file)
