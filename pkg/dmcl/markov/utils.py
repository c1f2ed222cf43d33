# License: BSD 3 clause
"""
Dense linear-algebra helpers for column-stochastic matrices.

Matrix powers are formed by binary exponentiation and are never
renormalized; column-sum drift is measured and asserted instead.
"""

import logging
from pathlib import Path
from typing import Tuple

import numpy as np

from dmcl.types import PathOrStr
from dmcl.utils.constants import MAX_DRIFT
from dmcl.utils.exceptions import DriftError

logger = logging.getLogger(__name__)


def column_drift(matrix: np.ndarray) -> float:
    """
    Return the largest deviation of a column sum from one.

    Parameters
    ----------
    matrix : numpy.ndarray
        A square matrix that is supposed to be column-stochastic.

    Returns
    -------
    float
        ``max_j |sum_i matrix[i, j] - 1|``.
    """
    return float(np.max(np.abs(matrix.sum(axis=0) - 1.0)))


def matrix_power(
    matrix: np.ndarray, power: int, max_drift: float = MAX_DRIFT
) -> Tuple[np.ndarray, int]:
    """
    Raise a column-stochastic matrix to an integer power by repeated squaring.

    Parameters
    ----------
    matrix : numpy.ndarray
        Square column-stochastic matrix.
    power : int
        Non-negative exponent.
    max_drift : float, default=1e-9
        Largest tolerated column-sum drift of the result.

    Returns
    -------
    result : numpy.ndarray
        ``matrix ** power``.
    n_products : int
        Number of matrix products used; at most ``2 * log2(power)``.

    Raises
    ------
    ValueError
        If ``power`` is negative or ``matrix`` is not square.
    DriftError
        If a column of the result sums to something further than
        ``max_drift`` from one.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {matrix.shape}.")
    if power < 0:
        raise ValueError(f"Matrix power must be non-negative, got {power}.")

    result = np.eye(matrix.shape[0])
    base = matrix.copy()
    n_products = 0
    first = True
    remaining = int(power)
    while remaining:
        if remaining & 1:
            if first:
                result = base.copy()
                first = False
            else:
                result = base @ result
                n_products += 1
        remaining >>= 1
        if remaining:
            base = base @ base
            n_products += 1

    drift = column_drift(result)
    logger.debug(f"P^{power}: {n_products} products, column drift {drift:.3e}")
    if drift > max_drift:
        raise DriftError(
            f"Column sums of P^{power} drifted by {drift:.3e}, "
            f"more than the allowed {max_drift:.1e}."
        )
    return result, n_products


def apply_power(matrix: np.ndarray, vector: np.ndarray, power: int) -> np.ndarray:
    """
    Compute ``matrix ** power @ vector`` without forming the full power for small powers.

    Small powers use repeated matrix-vector products; larger ones use binary
    exponentiation applied directly to the vector.

    Parameters
    ----------
    matrix : numpy.ndarray
        Square matrix.
    vector : numpy.ndarray
        Vector (or matrix of column vectors) to propagate.
    power : int
        Non-negative number of steps.

    Returns
    -------
    numpy.ndarray
        The propagated vector.
    """
    if power < 0:
        raise ValueError(f"Number of steps must be non-negative, got {power}.")
    result = np.array(vector, dtype=float, copy=True)
    if power <= matrix.shape[0]:
        for _ in range(power):
            result = matrix @ result
        return result

    base = np.asarray(matrix, dtype=float)
    remaining = int(power)
    while remaining:
        if remaining & 1:
            result = base @ result
        remaining >>= 1
        if remaining:
            base = base @ base
    return result


def gth_stationary(matrix: np.ndarray) -> np.ndarray:
    """
    Solve for the stationary vector by Grassmann-Taksar-Heyman state reduction.

    The reduction only adds and multiplies non-negative numbers, so every
    component comes out with small relative error even when the chain mixes
    slowly.

    Parameters
    ----------
    matrix : numpy.ndarray
        Irreducible column-stochastic matrix.

    Returns
    -------
    numpy.ndarray
        Stationary distribution, normalized to sum to one.

    Raises
    ------
    ValueError
        If a state cannot be reduced because it has no way out, which means
        the chain is reducible.
    """
    # work on the row-stochastic transpose: work[i, j] = Pr{i -> j}
    work = np.array(matrix, dtype=float).T.copy()
    n_states = work.shape[0]
    for k in range(n_states - 1, 0, -1):
        exit_mass = work[k, :k].sum()
        if exit_mass <= 0.0:
            raise ValueError(f"State {k} cannot reach lower-indexed states; chain is reducible.")
        work[:k, k] /= exit_mass
        work[:k, :k] += np.outer(work[:k, k], work[k, :k])

    stationary = np.zeros(n_states)
    stationary[0] = 1.0
    for k in range(1, n_states):
        stationary[k] = stationary[:k] @ work[:k, k]
    return stationary / stationary.sum()


def dump_matrix(matrix: np.ndarray, path: PathOrStr) -> None:
    """
    Write a matrix as plain text, row-major, with 17 significant digits.

    Parameters
    ----------
    matrix : numpy.ndarray
        The matrix to dump.
    path : :class:`dmcl.types.PathOrStr`
        Output file path.
    """
    np.savetxt(Path(path), np.asarray(matrix, dtype=float), fmt="%.16e", delimiter=" ")


def load_matrix(path: PathOrStr) -> np.ndarray:
    """
    Read a matrix written by :func:`dump_matrix`.

    Parameters
    ----------
    path : :class:`dmcl.types.PathOrStr`
        Path of the dump.

    Returns
    -------
    numpy.ndarray
        The matrix, always two-dimensional.
    """
    return np.atleast_2d(np.loadtxt(Path(path), dtype=float))
