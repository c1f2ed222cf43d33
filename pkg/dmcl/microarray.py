# License: BSD 3 clause
"""
The one-dimensional microarray channel.

Molecules are released into the first of ``N_f`` free voxels, diffuse along
a reflecting chain, and bind reversibly to surface probes next to the last
voxel. The single bound state is the observable state, so the channel impulse
response is ``h[n] = e_N^T P^n e_1``.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from dmcl.markov import (
    ChannelParams,
    Geometry,
    SpectralSummary,
    StepProbs,
    TransitionMatrix,
    apply_power,
    assemble_transition_matrix,
    build_geometry_1d,
    derive_step_probabilities,
    matrix_power,
    spectral_summary,
    stationary_distribution,
)
from dmcl.utils.constants import CALIBRATION_BRACKET, CALIBRATION_TOL
from dmcl.utils.exceptions import NumericalAssertionError, RangeError, StabilityError

__all__ = [
    "MicroarrayChannel",
    "Cir",
    "Characterization",
    "build_microarray_channel",
    "cir_fine",
    "cir_at_times",
    "state_heatmap",
    "equilibrium_closed_form",
    "characterize",
    "calibrate_koff",
    "with_koff",
    "rescale_rates",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MicroarrayChannel:
    """
    A microarray channel: parameters plus the assembled chain.

    Attributes
    ----------
    params : :class:`dmcl.markov.ChannelParams`
    step_probs : :class:`dmcl.markov.StepProbs`
    geometry : :class:`dmcl.markov.Geometry`
    P : :class:`dmcl.markov.TransitionMatrix`
        ``N x N`` with ``N = N_f + 1``.
    tx_state : int
        Index of the release state (the first free voxel).
    obs_state : int
        Index of the observable bound state (the last state).
    """

    params: ChannelParams
    step_probs: StepProbs
    geometry: Geometry
    P: TransitionMatrix
    tx_state: int
    obs_state: int

    @property
    def n_states(self) -> int:
        """Number of states ``N_f + 1``."""
        return self.P.n_states

    @property
    def dt(self) -> float:
        """Time step in s."""
        return self.params.dt

    @property
    def K_D(self) -> float:
        """Dissociation constant in M."""
        return self.params.K_D

    @property
    def h_eq(self) -> float:
        """Closed-form equilibrium gain."""
        return equilibrium_closed_form(self.params)[1]

    def unit_release(self) -> np.ndarray:
        """Return the distribution of a freshly released molecule."""
        x0 = np.zeros(self.n_states)
        x0[self.tx_state] = 1.0
        return x0


@dataclass(frozen=True, eq=False)
class Cir:
    """
    Sampled channel impulse response.

    Attributes
    ----------
    times : numpy.ndarray
        Sample times in s.
    steps : numpy.ndarray
        Sample step indices ``n``.
    fine : numpy.ndarray
        ``h[n]`` at the sampled steps.
    h_eq : float
        Equilibrium gain.
    t_eq : float
        Settling time in s (NaN when not computed).
    """

    times: np.ndarray
    steps: np.ndarray
    fine: np.ndarray
    h_eq: float
    t_eq: float = float("nan")


def build_microarray_channel(params: ChannelParams) -> MicroarrayChannel:
    """
    Build the microarray channel for the given parameters.

    Parameters
    ----------
    params : :class:`dmcl.markov.ChannelParams`

    Returns
    -------
    :class:`MicroarrayChannel`

    Raises
    ------
    ValueError
        If a rate that ergodicity needs is zero.
    StabilityError
        If ``dt`` is too large for the chain.
    """
    if params.k_off <= 0:
        raise ValueError("Ergodicity requires k_off > 0 (0 < p_unbind).")
    if params.k_on <= 0 or params.c_p <= 0:
        raise ValueError("Ergodicity requires k_on > 0 and c_p > 0 (0 < p_bind).")
    if params.n_free > 1 and params.D <= 0:
        raise ValueError("Ergodicity requires D > 0 when there is more than one free voxel.")

    step_probs = derive_step_probabilities(params)
    geometry = build_geometry_1d(params.n_free)
    P = assemble_transition_matrix(geometry, step_probs)
    return MicroarrayChannel(
        params=params,
        step_probs=step_probs,
        geometry=geometry,
        P=P,
        tx_state=0,
        obs_state=P.n_states - 1,
    )


def _trajectory(ch: MicroarrayChannel, n_max: int, every: int) -> Tuple[np.ndarray, np.ndarray]:
    """Return the sampled steps and the state distributions at those steps."""
    if n_max < 0:
        raise ValueError(f"n_max must be non-negative, got {n_max}.")
    if every < 1:
        raise ValueError(f"The sampling stride must be at least 1, got {every}.")
    step_matrix = ch.P.entries if every == 1 else matrix_power(ch.P.entries, every)[0]
    n_samples = n_max // every + 1
    states = np.empty((n_samples, ch.n_states))
    x = ch.unit_release()
    states[0] = x
    for sample in range(1, n_samples):
        x = step_matrix @ x
        states[sample] = x
    return np.arange(n_samples, dtype=np.int64) * every, states


def cir_fine(
    ch: MicroarrayChannel, n_max: int, every: int = 1, t_eq: float = float("nan")
) -> Cir:
    """
    Compute ``h[n]`` on the time-step grid by iterated matrix-vector products.

    Parameters
    ----------
    ch : :class:`MicroarrayChannel`
    n_max : int
        Last step, non-negative.
    every : int, default=1
        Keep every ``every``-th sample to bound memory on long horizons.
    t_eq : float, default=NaN
        Settling time to attach to the result.

    Returns
    -------
    :class:`Cir`
    """
    steps, states = _trajectory(ch, n_max, every)
    return Cir(
        times=steps * ch.dt,
        steps=steps,
        fine=states[:, ch.obs_state].copy(),
        h_eq=ch.h_eq,
        t_eq=t_eq,
    )


def state_heatmap(
    ch: MicroarrayChannel, n_max: int, every: int = 1
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Return the occupancy of every state over time after a unit release.

    Returns
    -------
    times : numpy.ndarray
        Sample times in s.
    occupancy : numpy.ndarray
        Shape ``(n_samples, N)``; row ``i`` is the distribution at ``times[i]``.
    """
    steps, states = _trajectory(ch, n_max, every)
    return steps * ch.dt, states


def cir_at_times(ch: MicroarrayChannel, times: Sequence[float]) -> np.ndarray:
    """
    Evaluate the continuous-time surrogate ``h(t) = e_N^T P^round(t/dt) e_1``.

    Parameters
    ----------
    ch : :class:`MicroarrayChannel`
    times : Sequence[float]
        Non-negative times in s, in any order.

    Returns
    -------
    numpy.ndarray
        ``h(t)`` for each requested time.
    """
    times = np.asarray(times, dtype=float)
    if (times < 0).any():
        raise ValueError("Times must be non-negative.")
    steps = np.round(times / ch.dt).astype(np.int64)
    order = np.argsort(steps, kind="stable")
    values = np.empty(times.shape[0])
    x = ch.unit_release()
    done = 0
    for position in order:
        x = apply_power(ch.P.entries, x, int(steps[position]) - done)
        done = int(steps[position])
        values[position] = x[ch.obs_state]
    return values


def equilibrium_closed_form(params: ChannelParams) -> Tuple[float, float]:
    """
    Return the closed-form equilibrium occupancies.

    Parameters
    ----------
    params : :class:`dmcl.markov.ChannelParams`

    Returns
    -------
    x_eq_free : float
        ``K_D / (N_f K_D + c_p)``, the occupancy of each free voxel.
    x_eq_bound : float
        ``c_p / (N_f K_D + c_p)``, the equilibrium gain ``h_eq``.
    """
    K_D = params.K_D
    if math.isinf(K_D):
        return 1.0 / params.n_free, 0.0
    denominator = params.n_free * K_D + params.c_p
    return K_D / denominator, params.c_p / denominator


@dataclass(frozen=True, eq=False)
class Characterization:
    """
    Equilibrium and relaxation characterization of a microarray channel.

    Attributes
    ----------
    summary : :class:`dmcl.markov.SpectralSummary`
    cir : :class:`Cir`
    free_closed : float
        Closed-form per-voxel free occupancy.
    h_eq_closed : float
        Closed-form equilibrium gain.
    free_flux : float
        ``x_eq[N_f] * p_bind`` across the surface.
    bound_flux : float
        ``x_eq[N] * p_unbind`` back across the surface.
    max_closed_form_error : float
        Largest componentwise gap between numeric and closed-form ``x_eq``.
    """

    summary: SpectralSummary
    cir: Cir
    free_closed: float
    h_eq_closed: float
    free_flux: float
    bound_flux: float
    max_closed_form_error: float

    @property
    def h_eq_numeric(self) -> float:
        """Numeric stationary bound mass."""
        return float(self.summary.x_eq[-1])

    @property
    def balance_error(self) -> float:
        """Relative interface-balance gap."""
        return abs(self.free_flux - self.bound_flux) / max(self.free_flux, self.bound_flux)


def characterize(
    ch: MicroarrayChannel,
    n_max: Optional[int] = None,
    every: Optional[int] = None,
    check: bool = True,
    closed_form_atol: float = 1e-9,
    balance_rtol: float = 1e-12,
) -> Characterization:
    """
    Characterize equilibrium, memory and the CIR of a microarray channel.

    The stationary distribution is computed by state reduction so that the
    surface balance can be checked to near machine precision.

    Parameters
    ----------
    ch : :class:`MicroarrayChannel`
    n_max : Optional[int], default=None
        CIR horizon in steps; two settling times when ``None``.
    every : Optional[int], default=None
        CIR sampling stride; chosen to keep about 2000 samples when ``None``.
    check : bool, default=True
        Raise if the closed-form or balance cross-checks fail.
    closed_form_atol : float, default=1e-9
        Tolerance of the closed-form comparison.
    balance_rtol : float, default=1e-12
        Relative tolerance of the interface balance.

    Returns
    -------
    :class:`Characterization`

    Raises
    ------
    NumericalAssertionError
        If ``check`` is set and a cross-check fails.
    """
    x_eq = stationary_distribution(ch.P, method="gth")
    summary = spectral_summary(ch.P, ch.dt, x_eq=x_eq)

    free_closed, h_eq_closed = equilibrium_closed_form(ch.params)
    closed = np.full(ch.n_states, free_closed)
    closed[ch.obs_state] = h_eq_closed
    max_error = float(np.max(np.abs(x_eq - closed)))

    n_free = ch.params.n_free
    free_flux = float(x_eq[n_free - 1] * ch.step_probs.p_bind)
    bound_flux = float(x_eq[ch.obs_state] * ch.step_probs.p_unbind)

    if n_max is None:
        n_max = int(math.ceil(2 * summary.t_eq / ch.dt))
    if every is None:
        every = max(1, n_max // 2000)
    cir = cir_fine(ch, n_max, every=every, t_eq=summary.t_eq)

    result = Characterization(
        summary=summary,
        cir=cir,
        free_closed=free_closed,
        h_eq_closed=h_eq_closed,
        free_flux=free_flux,
        bound_flux=bound_flux,
        max_closed_form_error=max_error,
    )
    logger.info(
        f"h_eq={h_eq_closed:.6g} (numeric {result.h_eq_numeric:.6g}), "
        f"t_eq={summary.t_eq:.6g} s, tau={summary.tau:.6g} s"
    )
    if check:
        if max_error > closed_form_atol:
            raise NumericalAssertionError(
                f"Numeric x_eq deviates from the closed form by {max_error:.3e}."
            )
        if result.balance_error > balance_rtol:
            raise NumericalAssertionError(
                f"Interface balance off by {result.balance_error:.3e} (relative)."
            )
    return result


def with_koff(params: ChannelParams, k_off: float) -> ChannelParams:
    """Return parameters with ``k_off`` changed and ``k_on`` rescaled to keep ``K_D``."""
    return replace(params, k_off=k_off, k_on=k_off / params.K_D)


def rescale_rates(params: ChannelParams, factor: float) -> ChannelParams:
    """Scale ``k_on`` and ``k_off`` by the same factor; ``K_D`` and ``h_eq`` are unchanged."""
    if factor <= 0:
        raise ValueError(f"Rate scaling factor must be positive, got {factor}.")
    return replace(params, k_on=params.k_on * factor, k_off=params.k_off * factor)


def _settling_time(params: ChannelParams) -> float:
    channel = build_microarray_channel(params)
    return spectral_summary(channel.P, params.dt).t_eq


def _largest_stable_koff(params: ChannelParams) -> float:
    """Largest ``k_off`` at fixed ``K_D`` for which ``dt`` is still stable."""
    p_diff = params.D * params.dt / params.dx**2
    degree = 0 if params.n_free == 1 else 1
    k_on_max = (1.0 - degree * p_diff) / (params.c_p * params.dt)
    return min(params.K_D * k_on_max, 1.0 / params.dt)


def calibrate_koff(
    params: ChannelParams,
    target_teq: float,
    tol: float = CALIBRATION_TOL,
    bracket: float = CALIBRATION_BRACKET,
    max_iter: int = 60,
) -> float:
    """
    Find the ``k_off`` that gives a target settling time at fixed ``K_D``.

    ``k_on`` is scaled with ``k_off`` so the equilibrium gain does not move.
    The settling time decreases monotonically in ``k_off``, so the search is
    a bisection on ``log k_off`` over ``[k_off / bracket, k_off * bracket]``,
    with the upper end capped at the largest stable value.

    Parameters
    ----------
    params : :class:`dmcl.markov.ChannelParams`
        Starting parameters; their ``K_D`` is preserved.
    target_teq : float
        Target settling time in s.
    tol : float, default=0.01
        Relative tolerance on the settling time.
    bracket : float, default=100
        Multiplicative half-width of the search bracket.
    max_iter : int, default=60
        Maximum number of bisection steps.

    Returns
    -------
    float
        The calibrated ``k_off`` in 1/s.

    Raises
    ------
    RangeError
        If the target is not bracketed.
    """
    if target_teq <= 0:
        raise ValueError(f"Target settling time must be positive, got {target_teq}.")

    current = _settling_time(params)
    if abs(current - target_teq) <= tol * target_teq:
        return params.k_off

    low = params.k_off / bracket
    high = min(params.k_off * bracket, _largest_stable_koff(params))
    if high <= low:
        raise RangeError("No stable k_off range exists for this time step.")
    teq_low = _settling_time(with_koff(params, low))
    teq_high = _settling_time(with_koff(params, high))
    if not teq_high <= target_teq <= teq_low:
        raise RangeError(
            f"Target t_eq={target_teq} s is outside the bracketed range "
            f"[{teq_high:.4g}, {teq_low:.4g}] s for k_off in [{low:.4g}, {high:.4g}]."
        )

    for iteration in range(max_iter):
        middle = math.sqrt(low * high)
        try:
            teq_middle = _settling_time(with_koff(params, middle))
        except StabilityError:
            high = middle
            continue
        logger.debug(f"calibration step {iteration}: k_off={middle:.6g}, t_eq={teq_middle:.6g}")
        if abs(teq_middle - target_teq) <= tol * target_teq:
            logger.info(f"calibrated k_off={middle:.6g} 1/s for t_eq={target_teq} s")
            return middle
        if teq_middle > target_teq:
            low = middle
        else:
            high = middle
    raise RangeError(f"Bisection did not reach t_eq={target_teq} s within {max_iter} steps.")
