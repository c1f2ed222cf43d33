# License: BSD 3 clause
"""Custom type aliases for readability."""
from __future__ import annotations

from pathlib import Path
from typing import Dict, Iterator, Sequence, Tuple, Union

import numpy as np
from typing_extensions import TypeAlias

# a string path or Path object
PathOrStr: TypeAlias = Union[Path, str]

# length-N occupancy probabilities; entries >= 0, summing to 1
StateDistribution: TypeAlias = np.ndarray

# per-state molecule counts (int64), length N
CountVector: TypeAlias = np.ndarray

# OOK bits a_k in {0, 1}
BitSequence: TypeAlias = Union[Sequence[int], np.ndarray]

# neighbor lists of a geometry, indexed by free state
NeighborLists: TypeAlias = Tuple[Tuple[int, ...], ...]

# (symbol index, count vector *before* the transition out of that boundary)
CountVectorIterator: TypeAlias = Iterator[Tuple[int, CountVector]]

# inclusive (first, last) symbol indices of an estimation window
Window: TypeAlias = Tuple[int, int]

# a JSON-style provenance header written on top of every output file
HeaderDict: TypeAlias = Dict[str, Union[str, int, float, None]]
