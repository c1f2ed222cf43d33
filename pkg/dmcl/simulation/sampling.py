# License: BSD 3 clause
"""
Random sampling primitives for the simulators.

All draws go through :class:`numpy.random.Generator`. Every trial owns an
independent substream derived from ``(seed, trial, stream)``, so trials can
run in any order or in parallel and still reproduce bit-for-bit.
"""

import numpy as np

from dmcl.types import CountVector

__all__ = ["trial_rng", "split_probabilities", "multinomial_split", "categorical_step"]

# substreams within one trial
SIMULATION_STREAM = 0
BITS_STREAM = 1


def trial_rng(seed: int, trial: int = 0, stream: int = SIMULATION_STREAM) -> np.random.Generator:
    """
    Return the generator for one trial.

    The substream is ``SeedSequence(seed, spawn_key=(trial, stream))``,
    which is what ``SeedSequence(seed).spawn()`` would hand out, made
    addressable by index.

    Parameters
    ----------
    seed : int
        Master seed, non-negative.
    trial : int, default=0
        Trial index.
    stream : int, default=0
        Substream within the trial (0 for the simulation, 1 for random bits).

    Returns
    -------
    numpy.random.Generator
    """
    if seed < 0 or trial < 0:
        raise ValueError(f"Seed and trial index must be non-negative, got {seed} and {trial}.")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, stream)))


def split_probabilities(M: np.ndarray) -> np.ndarray:
    """
    Return the rows ``pvals[j] = M[:, j]`` normalized to sum to one.

    Column sums of ``M`` are within the drift tolerance of one; the
    normalization only removes that rounding so that the multinomial
    sampler accepts the rows.
    """
    pvals = np.clip(np.asarray(M, dtype=float).T, 0.0, None)
    return pvals / pvals.sum(axis=1, keepdims=True)


def multinomial_split(
    rng: np.random.Generator, counts: CountVector, pvals: np.ndarray
) -> CountVector:
    """
    Move a population of independent molecules one symbol forward.

    The ``counts[j]`` molecules in state ``j`` are split over the next states
    with one multinomial draw per occupied state, and the splits are summed.

    Parameters
    ----------
    rng : numpy.random.Generator
    counts : :class:`dmcl.types.CountVector`
        Current molecule counts per state.
    pvals : numpy.ndarray
        Output of :func:`split_probabilities`.

    Returns
    -------
    :class:`dmcl.types.CountVector`
        Next counts; the total is conserved exactly.
    """
    occupied = np.nonzero(counts)[0]
    if occupied.size == 0:
        return np.zeros_like(counts)
    splits = rng.multinomial(counts[occupied], pvals[occupied])
    return splits.sum(axis=0, dtype=np.int64)


def categorical_step(
    rng: np.random.Generator, states: np.ndarray, cumulative: np.ndarray
) -> np.ndarray:
    """
    Move individual molecules one symbol forward by inverse-CDF draws.

    Parameters
    ----------
    rng : numpy.random.Generator
    states : numpy.ndarray
        Current state index of every molecule.
    cumulative : numpy.ndarray
        ``numpy.cumsum(M, axis=0)``; column ``j`` is the CDF of the next
        state from ``j``.

    Returns
    -------
    numpy.ndarray
        Next state index of every molecule.
    """
    uniforms = rng.random(states.shape[0])
    next_states = np.empty_like(states)
    last = cumulative.shape[0] - 1
    for state in np.unique(states):
        movers = states == state
        drawn = np.searchsorted(cumulative[:, state], uniforms[movers], side="right")
        next_states[movers] = np.minimum(drawn, last)
    return next_states
