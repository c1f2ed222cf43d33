# License: BSD 3 clause
"""Utility classes and functions for running DMCL experiments."""

import datetime
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from dmcl.config import ExperimentConfig
from dmcl.types import HeaderDict
from dmcl.version import __version__


class NumpyTypeEncoder(json.JSONEncoder):
    """
    Serialize results to JSON in a numpy-compatible way.

    Numpy scalars and arrays can't be serialized by the json module, so they
    are converted to Python numbers and lists; paths become strings.
    """

    def default(self, obj):
        """Encode given object."""
        if isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        elif isinstance(obj, Path):
            return str(obj)
        return json.JSONEncoder.default(self, obj)


def config_hash(cfg: ExperimentConfig) -> str:
    """Return the first 12 hex digits of the SHA-256 of the canonical settings."""
    return hashlib.sha256(cfg.canonical_json().encode("utf-8")).hexdigest()[:12]


def make_header(cfg: ExperimentConfig, **extra) -> HeaderDict:
    """
    Build the provenance header written on top of every output file.

    The timestamp is only included when ``output.timestamps`` is enabled, so
    that reruns with the same seed produce identical files.
    """
    header: HeaderDict = {
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "backend": cfg.backend,
        "dmcl_version": __version__,
    }
    header.update(extra)
    if cfg.timestamps:
        header["timestamp"] = datetime.datetime.now().isoformat(timespec="seconds")
    return json.loads(json.dumps(header, cls=NumpyTypeEncoder))


def format_number(value: float) -> str:
    """Format a parameter for use inside a file name (``1.0`` -> ``1``, ``1e-05`` -> ``1e-05``)."""
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:g}"
