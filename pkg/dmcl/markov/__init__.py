# License: BSD 3 clause
"""
Block-structured Markov channels.

The state space holds ``N_f`` free (diffusing) states followed by ``N_b``
bound states. One step of the chain is a left multiplication of the state
distribution by a column-stochastic matrix ``P = [[Q, U], [B, R]]``.

This module builds the geometries and step probabilities, assembles ``P``,
and provides the analyses every channel needs: evolution, observation,
stationary distribution, and spectral relaxation.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from dmcl.types import NeighborLists, StateDistribution
from dmcl.utils.constants import (
    DENSE_EIG_MAX_STATES,
    DISTRIBUTION_ATOL,
    MAX_POWER_STEPS,
    SETTLING_FACTOR,
    STATIONARY_RESIDUAL,
    STOCHASTIC_ATOL,
    VALID_RX_FACES,
)
from dmcl.utils.exceptions import (
    ConvergenceError,
    DegenerateError,
    NumericalAssertionError,
    StabilityError,
)

from .utils import apply_power, column_drift, dump_matrix, gth_stationary, load_matrix, matrix_power

__all__ = [
    "ChannelParams",
    "StepProbs",
    "Geometry",
    "TransitionMatrix",
    "SpectralSummary",
    "ConvergenceReport",
    "derive_step_probabilities",
    "build_geometry_1d",
    "build_geometry_grid2d",
    "build_geometry_grid3d",
    "build_geometry_lattice",
    "assemble_transition_matrix",
    "check_distribution",
    "evolve",
    "observe",
    "stationary_distribution",
    "spectral_summary",
    "verify_convergence_rate",
    "apply_power",
    "column_drift",
    "dump_matrix",
    "load_matrix",
    "matrix_power",
]

logger = logging.getLogger(__name__)


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def _as_matrix(P: Union["TransitionMatrix", np.ndarray]) -> np.ndarray:
    if isinstance(P, TransitionMatrix):
        return P.entries
    matrix = np.asarray(P, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {matrix.shape}.")
    return matrix


@dataclass(frozen=True)
class ChannelParams:
    """
    Physical parameters of a diffusion-binding channel.

    Parameters
    ----------
    D : float
        Diffusion coefficient in um^2/s.
    dx : float
        Voxel spacing in um.
    dt : float
        Time step in s.
    n_free : int
        Number of free (diffusing) states ``N_f``.
    k_on : float
        Binding rate in 1/(M s).
    k_off : float
        Unbinding rate in 1/s.
    c_p : float
        Probe concentration in M.

    Raises
    ------
    ValueError
        If ``dx`` or ``dt`` is not positive, a rate or concentration is
        negative, or ``n_free < 1``.
    """

    D: float
    dx: float
    dt: float
    n_free: int
    k_on: float
    k_off: float
    c_p: float

    def __post_init__(self):
        if int(self.n_free) != self.n_free or self.n_free < 1:
            raise ValueError(f"n_free must be a positive integer, got {self.n_free}.")
        object.__setattr__(self, "n_free", int(self.n_free))
        if self.dx <= 0 or self.dt <= 0:
            raise ValueError(f"dx and dt must be positive, got dx={self.dx}, dt={self.dt}.")
        for name in ["D", "k_on", "k_off", "c_p"]:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}.")

    @property
    def K_D(self) -> float:
        """Dissociation constant ``k_off / k_on`` in M."""
        return self.k_off / self.k_on if self.k_on > 0 else float("inf")

    @property
    def n_states(self) -> int:
        """Number of states of the single-bound-state specialization."""
        return self.n_free + 1


@dataclass(frozen=True)
class StepProbs:
    """
    Per-step diffusion, binding and unbinding probabilities.

    Raises
    ------
    StabilityError
        If a probability lies outside ``[0, 1]``.
    """

    p_diff: float
    p_bind: float
    p_unbind: float

    def __post_init__(self):
        for name in ["p_diff", "p_bind", "p_unbind"]:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise StabilityError(f"{name}={value:.6g} is not a probability; reduce dt.")


def derive_step_probabilities(params: ChannelParams) -> StepProbs:
    """
    Convert physical parameters into per-step probabilities.

    Parameters
    ----------
    params : :class:`ChannelParams`
        Physical parameters.

    Returns
    -------
    :class:`StepProbs`
        ``(D*dt/dx^2, k_on*c_p*dt, k_off*dt)``.

    Raises
    ------
    StabilityError
        If any of the three exceeds one or is negative.
    """
    return StepProbs(
        p_diff=params.D * params.dt / params.dx**2,
        p_bind=params.k_on * params.c_p * params.dt,
        p_unbind=params.k_off * params.dt,
    )


@dataclass(frozen=True, eq=False)
class Geometry:
    """
    Adjacency structure of the free states plus the bound-state coupling.

    Free states are indexed ``0..n_free-1`` and bound states follow them.

    Parameters
    ----------
    n_free : int
        Number of free states.
    neighbors : :class:`dmcl.types.NeighborLists`
        For each free state, the indices of its adjacent free states.
    rx_adjacent : Tuple[int, ...]
        Free states from which binding is possible (``V_RX``), ascending.
    n_bound : int
        Number of bound states.
    alpha : numpy.ndarray
        Binding split, shape ``(n_bound, len(rx_adjacent))``; columns sum to 1.
    beta : numpy.ndarray
        Unbinding split, shape ``(len(rx_adjacent), n_bound)``; columns sum to 1.
    shape : Optional[Tuple[int, ...]], default=None
        Lattice shape when the geometry came from a lattice builder.
    """

    n_free: int
    neighbors: NeighborLists
    rx_adjacent: Tuple[int, ...]
    n_bound: int
    alpha: np.ndarray
    beta: np.ndarray
    shape: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if len(self.neighbors) != self.n_free:
            raise ValueError(f"Expected {self.n_free} neighbor lists, got {len(self.neighbors)}.")
        for state, adjacent in enumerate(self.neighbors):
            for other in adjacent:
                if not 0 <= other < self.n_free or other == state:
                    raise ValueError(f"Free state {state} lists invalid neighbor {other}.")
                if state not in self.neighbors[other]:
                    raise ValueError(
                        f"Neighbor relation is not symmetric: {state} -> {other} only."
                    )
        if not self.rx_adjacent or any(not 0 <= j < self.n_free for j in self.rx_adjacent):
            raise ValueError(f"Invalid receiver-adjacent set {self.rx_adjacent}.")
        if self.n_bound < 1:
            raise ValueError(f"n_bound must be at least 1, got {self.n_bound}.")

        alpha = _frozen_array(self.alpha)
        beta = _frozen_array(self.beta)
        n_rx = len(self.rx_adjacent)
        if alpha.shape != (self.n_bound, n_rx) or beta.shape != (n_rx, self.n_bound):
            raise ValueError(
                f"Splitting shapes alpha {alpha.shape} / beta {beta.shape} do not "
                f"match n_bound={self.n_bound}, |V_RX|={n_rx}."
            )
        if (alpha < 0).any() or not np.allclose(alpha.sum(axis=0), 1.0, rtol=0, atol=1e-12):
            raise ValueError("Binding splits alpha must be non-negative with unit column sums.")
        if (beta < 0).any() or not np.allclose(beta.sum(axis=0), 1.0, rtol=0, atol=1e-12):
            raise ValueError("Unbinding splits beta must be non-negative with unit column sums.")
        object.__setattr__(self, "neighbors", tuple(tuple(adj) for adj in self.neighbors))
        object.__setattr__(self, "rx_adjacent", tuple(self.rx_adjacent))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n_states(self) -> int:
        """Total number of states ``N = N_f + N_b``."""
        return self.n_free + self.n_bound

    def degree(self, state: int) -> int:
        """Return ``|N(s_j)|`` for a free state."""
        return len(self.neighbors[state])


def build_geometry_lattice(
    shape: Sequence[int], rx_face: str = "right", n_bound: int = 1
) -> Geometry:
    """
    Build a nearest-neighbor lattice with reflecting boundaries.

    Voxels are numbered with the first axis varying fastest. The receiver
    face names one boundary of the lattice: ``left``/``right`` on the first
    axis, ``bottom``/``top`` on the second and ``front``/``back`` on the third.

    Parameters
    ----------
    shape : Sequence[int]
        Number of voxels along each axis.
    rx_face : str, default="right"
        Face whose voxels are receiver-adjacent.
    n_bound : int, default=1
        Number of bound states, coupled with uniform splitting.

    Returns
    -------
    :class:`Geometry`

    Raises
    ------
    ValueError
        If a dimension is smaller than one or the face does not exist for
        this dimensionality.
    """
    shape = tuple(int(size) for size in shape)
    if not shape or any(size < 1 for size in shape):
        raise ValueError(f"Lattice dimensions must be at least 1, got {shape}.")
    if rx_face not in VALID_RX_FACES:
        raise ValueError(f"Invalid edge id '{rx_face}'; expected one of {VALID_RX_FACES}.")
    face_axis, face_side = divmod(VALID_RX_FACES.index(rx_face), 2)
    if face_axis >= len(shape):
        raise ValueError(f"Invalid edge id '{rx_face}' for a {len(shape)}-D lattice.")

    n_free = int(np.prod(shape))
    neighbors = []
    rx_adjacent = []
    for index in range(n_free):
        coords = np.unravel_index(index, shape, order="F")
        adjacent = []
        for axis, size in enumerate(shape):
            for step in (-1, 1):
                moved = list(coords)
                moved[axis] += step
                if 0 <= moved[axis] < size:
                    adjacent.append(int(np.ravel_multi_index(moved, shape, order="F")))
        neighbors.append(tuple(sorted(adjacent)))
        boundary = 0 if face_side == 0 else shape[face_axis] - 1
        if coords[face_axis] == boundary:
            rx_adjacent.append(index)

    n_rx = len(rx_adjacent)
    return Geometry(
        n_free=n_free,
        neighbors=tuple(neighbors),
        rx_adjacent=tuple(rx_adjacent),
        n_bound=n_bound,
        alpha=np.full((n_bound, n_rx), 1.0 / n_bound),
        beta=np.full((n_rx, n_bound), 1.0 / n_rx),
        shape=shape,
    )


def build_geometry_1d(n_free: int) -> Geometry:
    """
    Build the chain geometry of the microarray channel.

    The last free state is the only receiver-adjacent state and there is a
    single bound state.

    Parameters
    ----------
    n_free : int
        Number of free states, at least one.

    Returns
    -------
    :class:`Geometry`
    """
    return build_geometry_lattice((n_free,), "right")


def build_geometry_grid2d(nx: int, ny: int, rx_edge: str = "right") -> Geometry:
    """Build an ``nx`` by ``ny`` 4-neighbor lattice with a receiver on ``rx_edge``."""
    return build_geometry_lattice((nx, ny), rx_edge)


def build_geometry_grid3d(nx: int, ny: int, nz: int, rx_face: str = "right") -> Geometry:
    """Build an ``nx`` by ``ny`` by ``nz`` 6-neighbor lattice with a receiver on ``rx_face``."""
    return build_geometry_lattice((nx, ny, nz), rx_face)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """
    Column-stochastic transition matrix with its block metadata.

    ``entries[i, j]`` is the probability of moving from state ``j`` to state
    ``i`` in one step. The arrays are read-only, so instances can be shared.

    Raises
    ------
    ValueError
        If the matrix is not square, has entries outside ``[0, 1]``, or a
        column does not sum to one within 1e-12.
    """

    n_free: int
    n_bound: int
    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen_array(self.entries)
        n_states = self.n_free + self.n_bound
        if entries.shape != (n_states, n_states):
            raise ValueError(f"Expected a {n_states}x{n_states} matrix, got {entries.shape}.")
        if (entries < 0).any() or (entries > 1).any():
            raise ValueError("Transition probabilities must lie in [0, 1].")
        drift = column_drift(entries)
        if drift > STOCHASTIC_ATOL:
            raise ValueError(f"Matrix is not column-stochastic (drift {drift:.3e}).")
        object.__setattr__(self, "entries", entries)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    @property
    def n_states(self) -> int:
        """Total number of states."""
        return self.n_free + self.n_bound

    @property
    def Q(self) -> np.ndarray:
        """Free-to-free block."""
        return self.entries[: self.n_free, : self.n_free]

    @property
    def B(self) -> np.ndarray:
        """Free-to-bound block."""
        return self.entries[self.n_free :, : self.n_free]

    @property
    def U(self) -> np.ndarray:
        """Bound-to-free block."""
        return self.entries[: self.n_free, self.n_free :]

    @property
    def R(self) -> np.ndarray:
        """Bound-to-bound block."""
        return self.entries[self.n_free :, self.n_free :]


def assemble_transition_matrix(geom: Geometry, sp: StepProbs) -> TransitionMatrix:
    """
    Assemble ``P`` from a geometry and step probabilities.

    Parameters
    ----------
    geom : :class:`Geometry`
        Free-state adjacency and bound-state coupling.
    sp : :class:`StepProbs`
        Step probabilities.

    Returns
    -------
    :class:`TransitionMatrix`

    Raises
    ------
    StabilityError
        If the stay-probability of a free state would be negative; the
        message names the offending column.
    """
    n_free = geom.n_free
    entries = np.zeros((geom.n_states, geom.n_states))
    rx_position = {state: pos for pos, state in enumerate(geom.rx_adjacent)}

    for j, adjacent in enumerate(geom.neighbors):
        for i in adjacent:
            entries[i, j] = sp.p_diff
        stay = 1.0 - len(adjacent) * sp.p_diff
        if j in rx_position:
            stay -= sp.p_bind
            entries[n_free:, j] = sp.p_bind * geom.alpha[:, rx_position[j]]
        if stay < 0:
            raise StabilityError(
                f"Column {j} has stay probability {stay:.6g} < 0 "
                f"(degree {len(adjacent)}, p_diff={sp.p_diff:.6g}, p_bind={sp.p_bind:.6g})."
            )
        entries[j, j] = stay

    for b in range(geom.n_bound):
        entries[n_free + b, n_free + b] = 1.0 - sp.p_unbind
        entries[list(geom.rx_adjacent), n_free + b] = sp.p_unbind * geom.beta[:, b]

    return TransitionMatrix(n_free=n_free, n_bound=geom.n_bound, entries=entries)


def check_distribution(x: StateDistribution, atol: float = DISTRIBUTION_ATOL) -> np.ndarray:
    """
    Validate a state distribution and return it as a float array.

    Raises
    ------
    ValueError
        If an entry is negative or the entries do not sum to one within ``atol``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"A state distribution must be one-dimensional, got shape {x.shape}.")
    if (x < 0).any():
        raise ValueError("State probabilities must be non-negative.")
    if abs(x.sum() - 1.0) > atol:
        raise ValueError(f"State probabilities sum to {x.sum():.15g}, not 1.")
    return x


def evolve(
    x0: StateDistribution, P: Union[TransitionMatrix, np.ndarray], steps: int
) -> StateDistribution:
    """
    Propagate a state distribution ``steps`` steps forward.

    Parameters
    ----------
    x0 : :class:`dmcl.types.StateDistribution`
        Initial distribution.
    P : Union[:class:`TransitionMatrix`, numpy.ndarray]
        Transition matrix.
    steps : int
        Number of steps, non-negative.

    Returns
    -------
    :class:`dmcl.types.StateDistribution`
        ``P^steps @ x0``.

    Raises
    ------
    ValueError
        If the dimensions do not match.
    NumericalAssertionError
        If probability mass drifts by more than 1e-10.
    """
    matrix = _as_matrix(P)
    x0 = check_distribution(x0)
    if x0.shape[0] != matrix.shape[0]:
        raise ValueError(f"Distribution has {x0.shape[0]} states but P has {matrix.shape[0]}.")
    x = apply_power(matrix, x0, steps)
    if abs(x.sum() - 1.0) > STATIONARY_RESIDUAL:
        raise NumericalAssertionError(f"Mass drifted to {x.sum():.15g} after {steps} steps.")
    return x


def observe(x: StateDistribution, obs_mask: Sequence[int]) -> float:
    """
    Return the probability that the chain is in an observable state.

    Parameters
    ----------
    x : :class:`dmcl.types.StateDistribution`
        State distribution.
    obs_mask : Sequence[int]
        Indicator vector of observable states.

    Returns
    -------
    float
        ``obs_mask @ x``.

    Raises
    ------
    ValueError
        If the mask has the wrong length or a non-binary entry.
    """
    x = np.asarray(x, dtype=float)
    mask = np.asarray(obs_mask)
    if mask.shape != x.shape:
        raise ValueError(f"Mask has shape {mask.shape} but distribution has {x.shape}.")
    if not np.isin(mask, [0, 1]).all():
        raise ValueError("Observation mask entries must be 0 or 1.")
    return float(mask.astype(float) @ x)


def stationary_distribution(
    P: Union[TransitionMatrix, np.ndarray],
    method: str = "power",
    tol: float = STATIONARY_RESIDUAL,
    max_steps: int = MAX_POWER_STEPS,
    damping: float = 0.5,
    x0: Optional[StateDistribution] = None,
) -> StateDistribution:
    """
    Compute the stationary distribution of an ergodic chain.

    With ``method="power"`` the damped chain ``(1 - d) I + d P`` is applied
    to ``x0`` in doubling blocks of steps (by squaring the damped matrix)
    until the residual ``max|P x - x|`` and the change between successive
    blocks both fall below ``tol``. ``method="gth"`` uses state reduction,
    which is subtraction-free and accurate componentwise.

    Parameters
    ----------
    P : Union[:class:`TransitionMatrix`, numpy.ndarray]
        Irreducible, aperiodic transition matrix.
    method : str, default="power"
        ``"power"`` or ``"gth"``.
    tol : float, default=1e-10
        Residual target in the infinity norm.
    max_steps : int, default=10**7
        Budget in steps-equivalent for the power method.
    damping : float, default=0.5
        Weight ``d`` of ``P`` in the damped chain.
    x0 : Optional[:class:`dmcl.types.StateDistribution`], default=None
        Starting distribution; uniform if ``None``.

    Returns
    -------
    :class:`dmcl.types.StateDistribution`

    Raises
    ------
    ConvergenceError
        If the residual target is not met within the budget.
    ValueError
        If ``method`` is unknown.
    """
    matrix = _as_matrix(P)
    n_states = matrix.shape[0]

    if method == "gth":
        x = gth_stationary(matrix)
    elif method == "power":
        if not 0 < damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {damping}.")
        block = (1.0 - damping) * np.eye(n_states) + damping * matrix
        x_prev = np.full(n_states, 1.0 / n_states) if x0 is None else check_distribution(x0)
        x = block @ x_prev
        steps_done = 1
        while True:
            residual = np.max(np.abs(matrix @ x - x))
            change = np.max(np.abs(x - x_prev))
            if residual <= tol and change <= tol:
                break
            if 2 * steps_done + 1 > max_steps:
                raise ConvergenceError(
                    f"Power iteration stalled at residual {residual:.3e} after "
                    f"{steps_done} steps (budget {max_steps})."
                )
            block = block @ block
            x_prev, x = x, block @ x
            steps_done = 2 * steps_done + 1
        logger.debug(f"power iteration converged after {steps_done} steps")
    else:
        raise ValueError(f"Unknown stationary method '{method}'.")

    x = np.clip(x, 0.0, None)
    x = x / x.sum()
    residual = np.max(np.abs(matrix @ x - x))
    if residual > tol:
        raise ConvergenceError(f"Stationary residual {residual:.3e} exceeds {tol:.1e}.")
    return x


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    """
    Relaxation characteristics of an ergodic chain.

    Attributes
    ----------
    slem : float
        Second-largest eigenvalue modulus ``|lambda_1|``.
    tau : float
        Time constant ``dt / (1 - slem)`` in s.
    t_eq : float
        Settling time ``5 * tau`` in s.
    x_eq : numpy.ndarray
        Stationary distribution.
    method : str
        ``"symmetric"``, ``"general"`` or ``"power"``.
    """

    slem: float
    tau: float
    t_eq: float
    x_eq: np.ndarray
    method: str


def _is_reversible(matrix: np.ndarray, x_eq: np.ndarray, rtol: float = 1e-8) -> bool:
    if (x_eq <= 0).any():
        return False
    flux = matrix * x_eq[np.newaxis, :]
    return bool(np.all(np.abs(flux - flux.T) <= rtol * (np.abs(flux) + np.abs(flux.T)) + 1e-300))


def _deflated_power_slem(
    matrix: np.ndarray, x_eq: np.ndarray, rtol: float = 1e-12, max_doublings: int = 64
) -> float:
    """Estimate the SLEM from norms of powers of the deflated matrix ``P - x_eq 1^T``."""
    n_states = matrix.shape[0]
    deflated = matrix - np.outer(x_eq, np.ones(n_states))
    vector = np.linspace(1.0, 2.0, n_states)
    vector /= np.linalg.norm(vector)

    block = deflated
    log_scale = 0.0
    exponent = 1
    estimate = None
    for _ in range(max_doublings):
        image = block @ vector
        norm_image = np.linalg.norm(image)
        if norm_image == 0.0:
            return 0.0
        image /= norm_image
        norm_next = np.linalg.norm(block @ image)
        if norm_next == 0.0:
            return 0.0
        new_estimate = float(np.exp((log_scale + np.log(norm_next)) / exponent))
        if estimate is not None and abs(new_estimate - estimate) <= rtol * new_estimate:
            return new_estimate
        estimate = new_estimate
        vector = image
        block = block @ block
        block_norm = np.linalg.norm(block)
        if block_norm == 0.0:
            return 0.0
        log_scale = 2 * log_scale + np.log(block_norm)
        block /= block_norm
        exponent *= 2
    raise ConvergenceError("Deflated power iteration did not settle on the SLEM.")


def spectral_summary(
    P: Union[TransitionMatrix, np.ndarray],
    dt: float,
    method: str = "auto",
    x_eq: Optional[StateDistribution] = None,
) -> SpectralSummary:
    """
    Compute the SLEM, time constant and settling time of an ergodic chain.

    Dense eigendecomposition is used up to 2000 states; when the chain is
    reversible with respect to ``x_eq`` the symmetrized matrix
    ``diag(x)^-1/2 P diag(x)^1/2`` is diagonalized instead, which keeps
    eigenvalues close to one accurate. Larger chains use a deflated power
    iteration.

    Parameters
    ----------
    P : Union[:class:`TransitionMatrix`, numpy.ndarray]
        Ergodic transition matrix.
    dt : float
        Time step in s.
    method : str, default="auto"
        ``"auto"``, ``"dense"`` or ``"power"``.
    x_eq : Optional[:class:`dmcl.types.StateDistribution`], default=None
        Pre-computed stationary distribution.

    Returns
    -------
    :class:`SpectralSummary`

    Raises
    ------
    ConvergenceError
        If the chain is not ergodic or an iterative step fails.
    """
    matrix = _as_matrix(P)
    if x_eq is None:
        x_eq = stationary_distribution(matrix)
    x_eq = np.asarray(x_eq, dtype=float)

    if method == "auto":
        method = "dense" if matrix.shape[0] <= DENSE_EIG_MAX_STATES else "power"

    if method == "dense":
        if _is_reversible(matrix, x_eq):
            root = np.sqrt(x_eq)
            symmetric = matrix * root[np.newaxis, :] / root[:, np.newaxis]
            eigenvalues = linalg.eigvalsh(0.5 * (symmetric + symmetric.T)).astype(complex)
            solver = "symmetric"
        else:
            eigenvalues = linalg.eigvals(matrix)
            solver = "general"
        perron = int(np.argmin(np.abs(eigenvalues - 1.0)))
        others = np.delete(eigenvalues, perron)
        slem = float(np.max(np.abs(others))) if others.size else 0.0
    elif method == "power":
        slem = _deflated_power_slem(matrix, x_eq)
        solver = "power"
    else:
        raise ValueError(f"Unknown spectral method '{method}'.")

    if slem >= 1.0 - 1e-14:
        raise ConvergenceError(f"SLEM {slem:.15g} is not below one; the chain is not ergodic.")
    tau = dt / (1.0 - slem)
    logger.debug(f"{solver} spectrum: slem={slem:.12g}, tau={tau:.6g} s")
    return SpectralSummary(
        slem=slem,
        tau=tau,
        t_eq=SETTLING_FACTOR * tau,
        x_eq=_frozen_array(x_eq),
        method=solver,
    )


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """
    Measured exponential convergence of ``P^n x0`` to ``x_eq``.

    Attributes
    ----------
    steps : numpy.ndarray
        Log-spaced step counts ``n``.
    errors : numpy.ndarray
        ``max|P^n x0 - x_eq|`` at each step count.
    rate : float
        Fitted asymptotic decay rate in 1/s over the tail window (NaN if degenerate).
    tau : float
        Spectral time constant in s.
    tail : numpy.ndarray
        Boolean mask of the points used for the fit.
    degenerate : bool
        ``True`` when ``x0`` already equals ``x_eq``.
    """

    steps: np.ndarray
    errors: np.ndarray
    rate: float
    tau: float
    tail: np.ndarray
    degenerate: bool

    @property
    def passed(self) -> bool:
        """Whether the fitted rate is at least 90% of ``1 / tau``."""
        return self.degenerate or self.rate >= 0.9 / self.tau


def verify_convergence_rate(
    P: Union[TransitionMatrix, np.ndarray],
    dt: float,
    x0: StateDistribution,
    horizon: int,
    n_points: int = 64,
    floor: float = 1e-12,
    tail_start: float = 0.25,
    summary: Optional[SpectralSummary] = None,
) -> ConvergenceReport:
    """
    Measure how fast ``P^n x0`` approaches the stationary distribution.

    The error ``e(n)`` is evaluated on a log-spaced grid up to ``horizon``
    steps. A line is fitted to ``log e(n)`` against ``n * dt`` over the tail
    window: grid points past ``tail_start`` times the last point whose error
    is still above ``floor``.

    Parameters
    ----------
    P : Union[:class:`TransitionMatrix`, numpy.ndarray]
        Ergodic transition matrix.
    dt : float
        Time step in s.
    x0 : :class:`dmcl.types.StateDistribution`
        Initial distribution.
    horizon : int
        Largest step count on the grid.
    n_points : int, default=64
        Number of log-spaced grid points before de-duplication.
    floor : float, default=1e-12
        Errors at or below this are treated as underflow.
    tail_start : float, default=0.25
        Start of the tail window as a fraction of the last usable step.
    summary : Optional[:class:`SpectralSummary`], default=None
        Pre-computed spectral summary.

    Returns
    -------
    :class:`ConvergenceReport`

    Raises
    ------
    DegenerateError
        If fewer than three grid points remain in the tail window.
    """
    matrix = _as_matrix(P)
    summary = summary or spectral_summary(matrix, dt)
    x_eq = summary.x_eq
    x = check_distribution(x0)

    steps = np.unique(np.round(np.geomspace(1, max(horizon, 1), n_points)).astype(np.int64))
    errors = np.empty(steps.shape[0])
    done = 0
    for position, n in enumerate(steps):
        x = apply_power(matrix, x, int(n) - done)
        done = int(n)
        errors[position] = np.max(np.abs(x - x_eq))

    no_tail = np.zeros(steps.shape[0], dtype=bool)
    if np.max(np.abs(np.asarray(x0, dtype=float) - x_eq)) <= floor:
        return ConvergenceReport(steps, errors, float("nan"), summary.tau, no_tail, True)

    usable = errors > floor
    if not usable.any():
        raise DegenerateError("The error underflowed before the first grid point.")
    last_usable = steps[usable][-1]
    tail = usable & (steps >= tail_start * last_usable)
    if tail.sum() < 3:
        raise DegenerateError(
            f"Only {int(tail.sum())} usable points in the tail window; increase horizon "
            "or lower the floor."
        )
    slope, _ = np.polyfit(steps[tail] * dt, np.log(errors[tail]), 1)
    return ConvergenceReport(steps, errors, float(-slope), summary.tau, tail, False)
