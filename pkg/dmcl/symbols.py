# License: BSD 3 clause
"""
Symbol-rate model of an OOK microarray link.

The fine chain is coarse-grained to one transition per symbol,
``M = P^(N_s)``. From ``M`` follow the ISI taps ``h_l``, their increments
``dh_l`` and the return probabilities ``pi^(l)``. Those give the mean,
variance and covariance of the bound count ``z_k`` for any bit sequence.

Lags at or beyond the truncation length ``L_trunc`` use the equilibrium
gain ``h_eq`` for both the taps and the return probabilities.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from dmcl.markov import matrix_power
from dmcl.microarray import MicroarrayChannel
from dmcl.types import BitSequence, Window
from dmcl.utils.constants import ENVELOPE_SLACK, EPS_TAP, RHO_FLOOR
from dmcl.utils.exceptions import TruncationWarning, WindowError

__all__ = [
    "SymbolAlignment",
    "SymbolChannel",
    "TxSequence",
    "NoiseStats",
    "EnvelopeReport",
    "symbol_alignment",
    "coarse_matrix",
    "symbol_taps",
    "return_probabilities",
    "build_symbol_channel",
    "mean_sequence",
    "variance_sequence",
    "covariance",
    "correlation",
    "noise_statistics",
    "differential_mean_sequence",
    "differential_noise_variance",
    "time_averaged_rho",
    "decay_envelope_check",
]

logger = logging.getLogger(__name__)


class SymbolAlignment(NamedTuple):
    """Symbol interval snapped to the time-step grid."""

    n_steps: int
    T_b_eff: float
    mismatch: float


def symbol_alignment(T_b: float, dt: float) -> SymbolAlignment:
    """
    Align a nominal symbol interval with the time-step grid.

    Parameters
    ----------
    T_b : float
        Nominal symbol interval in s, at least ``dt``.
    dt : float
        Time step in s.

    Returns
    -------
    :class:`SymbolAlignment`
        ``N_s = round(T_b / dt)``, ``T_b_eff = N_s * dt`` and the relative
        mismatch ``|T_b_eff - T_b| / T_b``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}.")
    if T_b < dt:
        raise ValueError(f"The symbol interval {T_b} s is shorter than the time step {dt} s.")
    n_steps = max(1, int(round(T_b / dt)))
    T_b_eff = n_steps * dt
    mismatch = abs(T_b_eff - T_b) / T_b
    if mismatch > 0:
        logger.debug(f"T_b={T_b} s snapped to {n_steps} steps, T_b_eff={T_b_eff!r} s")
    return SymbolAlignment(n_steps, T_b_eff, mismatch)


def coarse_matrix(P, n_steps: int) -> np.ndarray:
    """
    Return the symbol-rate transition matrix ``M = P^(N_s)``.

    Raises
    ------
    ValueError
        If ``n_steps < 1``.
    DriftError
        If the column sums of ``M`` drift by more than 1e-9.
    """
    if n_steps < 1:
        raise ValueError(f"N_s must be at least 1, got {n_steps}.")
    return matrix_power(np.asarray(P, dtype=float), n_steps)[0]


def _iterate_component(
    M: np.ndarray, start: int, component: int, n_terms: int
) -> np.ndarray:
    """Return ``(M^l)[component, start]`` for ``l = 0..n_terms-1``."""
    values = np.empty(n_terms)
    x = np.zeros(M.shape[0])
    x[start] = 1.0
    values[0] = x[component]
    for ell in range(1, n_terms):
        x = M @ x
        values[ell] = x[component]
    return values


def _truncation_length(values: np.ndarray, h_eq: float, eps_tap: float) -> Optional[int]:
    """Smallest ``L`` with ``|values[l] - h_eq| < eps_tap`` for every computed ``l >= L``."""
    far = np.abs(values - h_eq) >= eps_tap
    if far[-1]:
        return None
    if not far.any():
        return 0
    return int(np.nonzero(far)[0][-1]) + 1


class TapSet(NamedTuple):
    """Truncated taps of a symbol channel."""

    taps: np.ndarray
    delta_taps: np.ndarray
    L_trunc: int


def _truncated_taps(raw: np.ndarray, h_eq: float, L_trunc: int) -> TapSet:
    taps = raw[: L_trunc + 1].copy()
    extended = np.append(taps[:L_trunc], h_eq)
    return TapSet(taps, np.diff(extended), L_trunc)


def symbol_taps(
    ch: MicroarrayChannel, M: np.ndarray, L_max: int = 2000, eps_tap: float = EPS_TAP
) -> TapSet:
    """
    Compute the ISI taps ``h_l = e_N^T M^l e_1`` and their truncation length.

    Parameters
    ----------
    ch : :class:`dmcl.microarray.MicroarrayChannel`
    M : numpy.ndarray
        Symbol-rate transition matrix.
    L_max : int, default=2000
        Largest lag computed.
    eps_tap : float, default=1e-6
        Tail tolerance around ``h_eq``.

    Returns
    -------
    :class:`TapSet`
        ``taps`` for ``l = 0..L_trunc``, ``delta_taps`` for ``l < L_trunc``
        (the last increment runs into ``h_eq``) and ``L_trunc``.

    Warns
    -----
    TruncationWarning
        If the taps are still further than ``eps_tap`` from ``h_eq`` at ``L_max``.
    """
    if L_max < 1:
        raise ValueError(f"L_max must be at least 1, got {L_max}.")
    raw = _iterate_component(M, ch.tx_state, ch.obs_state, max(L_max, 2) + 1)
    L_trunc = _truncation_length(raw, ch.h_eq, eps_tap)
    if L_trunc is None:
        warnings.warn(
            f"Taps did not settle within eps_tap={eps_tap:g} of h_eq by L_max={L_max}.",
            TruncationWarning,
        )
        L_trunc = L_max
    return _truncated_taps(raw, ch.h_eq, min(max(L_trunc, 2), L_max))


def return_probabilities(M: np.ndarray, L: int, obs_state: int = -1) -> np.ndarray:
    """
    Return ``pi^(l) = (M^l)[N, N]`` for ``l = 1..L``.

    Parameters
    ----------
    M : numpy.ndarray
        Symbol-rate transition matrix.
    L : int
        Number of lags, at least one.
    obs_state : int, default=-1
        Index of the observable state.

    Returns
    -------
    numpy.ndarray
        Array of length ``L``; entry ``l - 1`` holds ``pi^(l)``.
    """
    if L < 1:
        raise ValueError(f"L must be at least 1, got {L}.")
    M = np.asarray(M, dtype=float)
    obs_state = obs_state % M.shape[0]
    return _iterate_component(M, obs_state, obs_state, L + 1)[1:]


@dataclass(frozen=True, eq=False)
class SymbolChannel:
    """
    Coarse-grained symbol-rate channel.

    Attributes
    ----------
    M : numpy.ndarray
        ``P^(N_s)``.
    n_steps : int
        Time steps per symbol ``N_s``.
    T_b_eff : float
        Effective symbol interval ``N_s * dt`` in s.
    taps : numpy.ndarray
        ``h_l`` for ``l = 0..L_trunc``.
    delta_taps : numpy.ndarray
        ``dh_l`` for ``l = 0..L_trunc-1``.
    pi : numpy.ndarray
        ``pi^(l)`` for ``l = 0..L_trunc`` with the convention ``pi^(0) = 1``.
    h_eq : float
        Equilibrium gain.
    L_trunc : int
        Truncation length.
    eps_tap : float
        Truncation tolerance.
    tau : float
        Spectral time constant of the fine chain in s (NaN if unknown).
    """

    M: np.ndarray
    n_steps: int
    T_b_eff: float
    taps: np.ndarray
    delta_taps: np.ndarray
    pi: np.ndarray
    h_eq: float
    L_trunc: int
    eps_tap: float
    tau: float = float("nan")

    def tap(self, lags) -> np.ndarray:
        """Return ``h_l`` with the ``h_eq`` tail for an array of non-negative lags."""
        lags = np.asarray(lags, dtype=np.int64)
        inside = np.minimum(lags, self.L_trunc - 1)
        return np.where(lags < self.L_trunc, self.taps[inside], self.h_eq)

    def return_probability(self, ell: int) -> float:
        """Return ``pi^(l)`` with ``pi^(0) = 1`` and the ``h_eq`` tail."""
        if ell < 0:
            raise IndexError(f"Lag must be non-negative, got {ell}.")
        return float(self.pi[ell]) if ell < self.L_trunc else self.h_eq

    def delta_tap(self, ell: int) -> float:
        """Return ``dh_l``, zero at and beyond ``L_trunc``."""
        return float(self.delta_taps[ell]) if 0 <= ell < self.L_trunc else 0.0


def build_symbol_channel(
    ch: MicroarrayChannel,
    T_b: float,
    L_max: int = 2000,
    eps_tap: float = EPS_TAP,
    tau: float = float("nan"),
) -> SymbolChannel:
    """
    Coarse-grain a microarray channel to the symbol rate.

    ``L_trunc`` is chosen so that both the taps and the return probabilities
    stay within ``eps_tap`` of ``h_eq`` from ``L_trunc`` on.

    Parameters
    ----------
    ch : :class:`dmcl.microarray.MicroarrayChannel`
    T_b : float
        Nominal symbol interval in s.
    L_max : int, default=2000
        Largest lag computed.
    eps_tap : float, default=1e-6
        Truncation tolerance.
    tau : float, default=NaN
        Time constant to record on the result.

    Returns
    -------
    :class:`SymbolChannel`
    """
    if L_max < 1:
        raise ValueError(f"L_max must be at least 1, got {L_max}.")
    alignment = symbol_alignment(T_b, ch.dt)
    M = coarse_matrix(ch.P, alignment.n_steps)
    n_terms = max(L_max, 2) + 1
    raw_taps = _iterate_component(M, ch.tx_state, ch.obs_state, n_terms)
    raw_pi = _iterate_component(M, ch.obs_state, ch.obs_state, n_terms)

    h_eq = ch.h_eq
    lengths = [_truncation_length(raw, h_eq, eps_tap) for raw in (raw_taps, raw_pi[1:])]
    if None in lengths:
        warnings.warn(
            f"Symbol channel did not settle within eps_tap={eps_tap:g} of h_eq "
            f"by L_max={L_max} (T_b_eff={alignment.T_b_eff:.6g} s).",
            TruncationWarning,
        )
        L_trunc = L_max
    else:
        # raw_pi[1:] is indexed from lag 1
        L_trunc = max(lengths[0], lengths[1] + 1)
    L_trunc = min(max(L_trunc, 2), L_max)

    tap_set = _truncated_taps(raw_taps, h_eq, L_trunc)
    pi = raw_pi[: L_trunc + 1].copy()
    logger.debug(
        f"N_s={alignment.n_steps}, T_b_eff={alignment.T_b_eff:.6g} s, L_trunc={L_trunc}"
    )
    for array in (M, tap_set.taps, tap_set.delta_taps, pi):
        array.setflags(write=False)
    return SymbolChannel(
        M=M,
        n_steps=alignment.n_steps,
        T_b_eff=alignment.T_b_eff,
        taps=tap_set.taps,
        delta_taps=tap_set.delta_taps,
        pi=pi,
        h_eq=h_eq,
        L_trunc=L_trunc,
        eps_tap=eps_tap,
        tau=tau,
    )


@dataclass(frozen=True, eq=False)
class TxSequence:
    """
    OOK transmission: ``Q`` molecules released for every 1-bit.

    Raises
    ------
    ValueError
        If a bit is not 0/1 or ``Q`` is negative.
    """

    bits: np.ndarray
    Q: int

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1:
            raise ValueError(f"Bits must be one-dimensional, got shape {bits.shape}.")
        if not np.isin(bits, [0, 1]).all():
            raise ValueError("Bits must be 0 or 1.")
        if int(self.Q) != self.Q or self.Q < 0:
            raise ValueError(f"Q must be a non-negative integer, got {self.Q}.")
        bits = bits.astype(np.int8)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "Q", int(self.Q))

    @classmethod
    def from_bits(cls, bits: BitSequence, Q: int) -> "TxSequence":
        """Build a sequence from any 0/1 iterable."""
        return cls(np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits), Q)

    def __len__(self) -> int:
        return int(self.bits.shape[0])

    def released(self) -> np.ndarray:
        """Cumulative number of released molecules after each symbol's release."""
        return self.Q * np.cumsum(self.bits, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class NoiseStats:
    """
    Analytic (or empirical) symbol-rate statistics of ``z_k``.

    Attributes
    ----------
    mean : numpy.ndarray
        ``z_bar_k``.
    var : numpy.ndarray
        ``sigma_k^2``.
    cov : numpy.ndarray
        Shape ``(B, ell_max + 1)``; ``cov[k, l] = Cov(w_k, w_{k-l})``, NaN for ``l > k``.
    rho : numpy.ndarray
        Same shape; ``rho_k[l]``, NaN where undefined.
    """

    mean: np.ndarray
    var: np.ndarray
    cov: np.ndarray
    rho: np.ndarray


def _causal_filter(a: np.ndarray, head: np.ndarray, tail: float) -> np.ndarray:
    """Return ``y_j = sum_{r <= j} a_r f(j - r)`` with ``f = head`` then the constant ``tail``."""
    n = a.shape[0]
    length = head.shape[0]
    y = np.convolve(a, head)[:n] if n and length else np.zeros(n)
    if tail != 0.0 and n > length:
        y[length:] += tail * np.cumsum(a)[: n - length]
    return y


def _head_taps(sym: SymbolChannel) -> np.ndarray:
    return np.asarray(sym.taps[: sym.L_trunc], dtype=float)


def _mean(a: np.ndarray, Q: float, sym: SymbolChannel) -> np.ndarray:
    return Q * _causal_filter(a, _head_taps(sym), sym.h_eq)


def _variance(a: np.ndarray, Q: float, sym: SymbolChannel) -> np.ndarray:
    head = _head_taps(sym)
    return Q * _causal_filter(a, head * (1.0 - head), sym.h_eq * (1.0 - sym.h_eq))


def _lag_covariance(a: np.ndarray, Q: float, sym: SymbolChannel, ell: int) -> np.ndarray:
    """Return ``Cov(w_k, w_{k-l})`` for every ``k`` (NaN for ``k < l``)."""
    n = a.shape[0]
    result = np.full(n, np.nan)
    if ell >= n:
        return result
    m = np.arange(sym.L_trunc)
    pi_ell = sym.return_probability(ell)
    head = sym.tap(m) * (pi_ell - sym.tap(m + ell))
    tail = sym.h_eq * (pi_ell - sym.h_eq)
    result[ell:] = Q * _causal_filter(a, head, tail)[: n - ell]
    return result


def _moments(a: np.ndarray, Q: float, sym: SymbolChannel, ell_max: int) -> NoiseStats:
    mean = _mean(a, Q, sym)
    var = _variance(a, Q, sym)
    n = a.shape[0]
    cov = np.full((n, ell_max + 1), np.nan)
    cov[:, 0] = var
    for ell in range(1, ell_max + 1):
        cov[:, ell] = _lag_covariance(a, Q, sym, ell)
    rho = np.full_like(cov, np.nan)
    sigma = np.sqrt(var)
    for ell in range(ell_max + 1):
        if ell >= n:
            break
        scale = sigma[ell:] * sigma[: n - ell]
        with np.errstate(divide="ignore", invalid="ignore"):
            rho[ell:, ell] = np.where(scale > 0, cov[ell:, ell] / scale, np.nan)
    return NoiseStats(mean=mean, var=var, cov=cov, rho=rho)


def mean_sequence(tx: TxSequence, sym: SymbolChannel) -> np.ndarray:
    """
    Return the conditional mean ``z_bar_k = Q sum_l a_{k-l} h_l``.

    Parameters
    ----------
    tx : :class:`TxSequence`
    sym : :class:`SymbolChannel`

    Returns
    -------
    numpy.ndarray
        One value per symbol boundary ``k = 0..B-1``.
    """
    return _mean(tx.bits.astype(float), tx.Q, sym)


def variance_sequence(tx: TxSequence, sym: SymbolChannel) -> np.ndarray:
    """Return ``sigma_k^2 = Q sum_l a_{k-l} h_l (1 - h_l)``."""
    return _variance(tx.bits.astype(float), tx.Q, sym)


def covariance(tx: TxSequence, k: int, ell: int, sym: SymbolChannel) -> float:
    """
    Return ``Cov(w_k, w_{k-l})`` from the single-batch covariance sum.

    Each batch released at ``r`` contributes ``h_{k-l-r} (pi^(l) - h_{k-r})``.
    The sum is accumulated with exactly rounded summation, and ``l = 0``
    reproduces ``sigma_k^2``.

    Parameters
    ----------
    tx : :class:`TxSequence`
    k : int
        Later symbol index.
    ell : int
        Lag, ``0 <= ell <= k``.
    sym : :class:`SymbolChannel`

    Returns
    -------
    float

    Raises
    ------
    IndexError
        If ``k`` or ``ell`` is out of range.
    """
    if not 0 <= ell <= k < len(tx):
        raise IndexError(f"Need 0 <= ell <= k < {len(tx)}, got k={k}, ell={ell}.")
    releases = np.nonzero(tx.bits[: k - ell + 1])[0]
    if releases.size == 0:
        return 0.0
    terms = sym.tap(k - ell - releases) * (
        sym.return_probability(ell) - sym.tap(k - releases)
    )
    return tx.Q * math.fsum(terms.tolist())


def correlation(tx: TxSequence, k: int, ell: int, sym: SymbolChannel) -> float:
    """Return ``rho_k[l]``; NaN when either variance is zero."""
    scale = math.sqrt(covariance(tx, k, 0, sym) * covariance(tx, k - ell, 0, sym))
    return covariance(tx, k, ell, sym) / scale if scale > 0 else float("nan")


def noise_statistics(tx: TxSequence, sym: SymbolChannel, ell_max: int = 10) -> NoiseStats:
    """
    Return mean, variance, lag covariances and correlations for every symbol.

    This is the vectorized counterpart of :func:`covariance`: the covariance
    sum is a causal convolution of the bits with a lag-dependent kernel.

    Parameters
    ----------
    tx : :class:`TxSequence`
    sym : :class:`SymbolChannel`
    ell_max : int, default=10
        Largest lag.

    Returns
    -------
    :class:`NoiseStats`
    """
    if ell_max < 0:
        raise ValueError(f"ell_max must be non-negative, got {ell_max}.")
    return _moments(tx.bits.astype(float), tx.Q, sym, ell_max)


def differential_mean_sequence(tx: TxSequence, sym: SymbolChannel) -> np.ndarray:
    """Return the mean of ``dz_k = z_{k+1} - z_k`` for ``k = 0..B-2``."""
    return np.diff(mean_sequence(tx, sym))


def differential_noise_variance(tx: TxSequence, sym: SymbolChannel) -> np.ndarray:
    """Return ``Var(dw_k) = sigma_{k+1}^2 + sigma_k^2 - 2 Cov(w_{k+1}, w_k)``."""
    stats = noise_statistics(tx, sym, ell_max=1)
    return stats.var[1:] + stats.var[:-1] - 2.0 * stats.cov[1:, 1]


def time_averaged_rho(
    sym: SymbolChannel,
    ell_max: int,
    window: Optional[Window] = None,
    window_length: int = 200,
) -> np.ndarray:
    """
    Return the time-averaged correlation profile under equiprobable OOK.

    Every bit is replaced by its mean 1/2 in the variance and covariance
    sums; ``rho_k[l]`` is then averaged over ``k`` in the window. ``Q``
    cancels.

    Parameters
    ----------
    sym : :class:`SymbolChannel`
    ell_max : int
        Largest lag.
    window : Optional[:class:`dmcl.types.Window`], default=None
        Inclusive ``(K_burn, K_max)``; ``(L_trunc, L_trunc + window_length - 1)``
        when ``None``.
    window_length : int, default=200
        Window length used when ``window`` is ``None``.

    Returns
    -------
    numpy.ndarray
        ``rho_bar[l]`` for ``l = 0..ell_max`` (``rho_bar[0] = 1``).

    Raises
    ------
    WindowError
        If the window starts before ``L_trunc`` or before ``ell_max``.
    """
    first, last = window if window is not None else (sym.L_trunc, sym.L_trunc + window_length - 1)
    if first < sym.L_trunc:
        raise WindowError(
            f"Window starts at {first}, inside the ISI transient (L_trunc={sym.L_trunc})."
        )
    if first < ell_max:
        raise WindowError(f"Window starts at {first}, before the largest lag {ell_max}.")
    if last < first:
        raise WindowError(f"Empty window ({first}, {last}).")
    stats = _moments(np.full(last + 1, 0.5), 1.0, sym, ell_max)
    return np.nanmean(stats.rho[first : last + 1], axis=0)


@dataclass(frozen=True, eq=False)
class EnvelopeReport:
    """
    Result of the lag-decay envelope check.

    Attributes
    ----------
    ratios : numpy.ndarray
        ``|Cov(l+1)| / |Cov(l)|`` for consecutive usable lags (NaN elsewhere).
    bound : float
        ``exp(-T_b / tau) * (1 + slack)``.
    tail : numpy.ndarray
        Boolean mask of the ratios the check applies to.
    asymptotic_ratio : float
        Last usable ratio (NaN if none).
    passed : bool
    """

    ratios: np.ndarray
    bound: float
    tail: np.ndarray
    asymptotic_ratio: float
    passed: bool


def decay_envelope_check(
    cov_values,
    tau: float,
    T_b: float,
    rho_values=None,
    floor: float = RHO_FLOOR,
    slack: float = ENVELOPE_SLACK,
) -> EnvelopeReport:
    """
    Check that lag covariances decay at least as fast as ``exp(-T_b / tau)``.

    Parameters
    ----------
    cov_values : array-like
        ``Cov(k, l)`` for ``l = 1..ell_max`` at a fixed ``k``.
    tau : float
        Spectral time constant in s.
    T_b : float
        (Effective) symbol interval in s.
    rho_values : Optional[array-like], default=None
        Matching correlations; used for the floor test when given, otherwise
        covariances are normalized by their largest magnitude.
    floor : float, default=1e-10
        Lags whose magnitude is at or below this are ignored.
    slack : float, default=0.1
        Relative slack on the bound.

    Returns
    -------
    :class:`EnvelopeReport`
        The check covers the later half of the usable ratios; it passes
        vacuously when there are none.
    """
    cov_values = np.abs(np.asarray(cov_values, dtype=float))
    if rho_values is not None:
        magnitude = np.abs(np.asarray(rho_values, dtype=float))
    else:
        peak = np.max(cov_values) if cov_values.size else 0.0
        magnitude = cov_values / peak if peak > 0 else np.zeros_like(cov_values)
    usable = magnitude > floor
    pairs = usable[:-1] & usable[1:]
    ratios = np.full(max(cov_values.shape[0] - 1, 0), np.nan)
    ratios[pairs] = cov_values[1:][pairs] / cov_values[:-1][pairs]

    bound = math.exp(-T_b / tau) * (1.0 + slack)
    tail = np.zeros_like(pairs)
    usable_pairs = np.nonzero(pairs)[0]
    if usable_pairs.size == 0:
        return EnvelopeReport(ratios, bound, tail, float("nan"), True)
    tail[usable_pairs[usable_pairs.size // 2 :]] = True
    passed = bool(np.all(ratios[tail] <= bound))
    return EnvelopeReport(ratios, bound, tail, float(ratios[usable_pairs[-1]]), passed)
