# License: BSD 3 clause
"""
Monte Carlo simulation of the bound count ``z_k`` under OOK.

Two backends produce traces with the same law:

- ``per_molecule`` follows every released molecule through categorical
  draws from the columns of ``M``. It is the reference at small sizes.
- ``aggregate`` keeps one count per state and splits it with multinomial
  draws, so its cost does not grow with ``Q``.

In both, the release for symbol ``k`` enters the transmitter state at the
boundary ``k * N_s``, ``z_k`` is read at that boundary, and the population
then moves one symbol forward. A molecule therefore shows up bound no
earlier than the next boundary.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import ks_2samp

from dmcl.microarray import MicroarrayChannel
from dmcl.simulation.sampling import (
    BITS_STREAM,
    SIMULATION_STREAM,
    categorical_step,
    multinomial_split,
    split_probabilities,
    trial_rng,
)
from dmcl.symbols import SymbolChannel, TxSequence, mean_sequence
from dmcl.types import CountVectorIterator, Window
from dmcl.utils.constants import VALID_BACKENDS
from dmcl.utils.exceptions import (
    BudgetError,
    InsufficientDataError,
    NumericalAssertionError,
    WindowError,
)

__all__ = [
    "SimTrace",
    "EmpiricalNoiseStats",
    "iter_count_vectors",
    "simulate_aggregate",
    "simulate_per_molecule",
    "simulate",
    "run_trials",
    "estimate_noise_stats",
    "ks_equivalence",
    "trial_rng",
]

logger = logging.getLogger(__name__)

# molecule-symbol updates allowed for one per-molecule run
DEFAULT_MOLECULE_BUDGET = 10**8

_INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True, eq=False)
class SimTrace:
    """
    Bound counts observed at the symbol boundaries of one trial.

    Attributes
    ----------
    z : numpy.ndarray
        ``z_k`` for ``k = 0..B-1`` (int64, read-only).
    seed : int
        Master seed of the run.
    backend : str
        ``"aggregate"`` or ``"per_molecule"``.
    tx : :class:`dmcl.symbols.TxSequence`
        Transmitted sequence.
    T_b_eff : float
        Effective symbol interval in s.
    trial : int
        Trial index inside the run.
    """

    z: np.ndarray
    seed: int
    backend: str
    tx: TxSequence
    T_b_eff: float
    trial: int = 0

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.int64)
        if z.shape != self.tx.bits.shape:
            raise ValueError(f"Trace has {z.shape[0]} counts for {len(self.tx)} symbols.")
        if np.any(z < 0) or np.any(z > self.tx.released()):
            raise NumericalAssertionError("Bound counts exceed the released molecules.")
        if self.backend not in VALID_BACKENDS:
            raise ValueError(f"Unknown backend '{self.backend}'; expected one of {VALID_BACKENDS}.")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    def __len__(self) -> int:
        return int(self.z.shape[0])


def iter_count_vectors(
    ch: MicroarrayChannel, sym: SymbolChannel, tx: TxSequence, rng: np.random.Generator
) -> CountVectorIterator:
    """
    Yield the aggregate population at every symbol boundary.

    Parameters
    ----------
    ch : :class:`dmcl.microarray.MicroarrayChannel`
    sym : :class:`dmcl.symbols.SymbolChannel`
    tx : :class:`dmcl.symbols.TxSequence`
    rng : numpy.random.Generator

    Yields
    ------
    (int, :class:`dmcl.types.CountVector`)
        The symbol index and the counts right after that symbol's release,
        before the transition to the next boundary. The vector is reused, so
        copy it to keep it.

    Raises
    ------
    OverflowError
        If the total count no longer fits into a 64-bit integer.
    NumericalAssertionError
        If a split does not conserve the molecule count.
    """
    pvals = split_probabilities(sym.M)
    counts = np.zeros(ch.n_states, dtype=np.int64)
    total = 0
    for k, bit in enumerate(tx.bits):
        if bit:
            if total > _INT64_MAX - tx.Q:
                raise OverflowError(f"Molecule count overflows int64 at symbol {k}.")
            counts[ch.tx_state] += tx.Q
            total += tx.Q
        yield k, counts
        counts = multinomial_split(rng, counts, pvals)
        if int(counts.sum()) != total:
            raise NumericalAssertionError(
                f"Multinomial split lost molecules at symbol {k}: {int(counts.sum())} != {total}."
            )


def _aggregate_counts(
    ch: MicroarrayChannel, sym: SymbolChannel, tx: TxSequence, rng: np.random.Generator
) -> np.ndarray:
    z = np.zeros(len(tx), dtype=np.int64)
    for k, counts in iter_count_vectors(ch, sym, tx, rng):
        z[k] = counts[ch.obs_state]
    return z


def _per_molecule_counts(
    ch: MicroarrayChannel,
    sym: SymbolChannel,
    tx: TxSequence,
    rng: np.random.Generator,
    max_work: int,
) -> np.ndarray:
    n_symbols = len(tx)
    # each molecule released at r is updated at every later boundary
    work = tx.Q * int(np.sum(tx.bits * (n_symbols - np.arange(n_symbols))))
    if work > max_work:
        raise BudgetError(
            f"Per-molecule simulation needs {work} molecule updates, "
            f"more than the cap of {max_work}."
        )
    cumulative = np.cumsum(split_probabilities(sym.M).T, axis=0)
    states = np.empty(0, dtype=np.int64)
    z = np.zeros(n_symbols, dtype=np.int64)
    for k, bit in enumerate(tx.bits):
        if bit:
            states = np.concatenate([states, np.full(tx.Q, ch.tx_state, dtype=np.int64)])
        z[k] = np.count_nonzero(states == ch.obs_state)
        if states.size:
            states = categorical_step(rng, states, cumulative)
    return z


def simulate_aggregate(
    ch: MicroarrayChannel, sym: SymbolChannel, tx: TxSequence, seed: int, trial: int = 0
) -> SimTrace:
    """
    Simulate one trial with the aggregate count backend.

    Parameters
    ----------
    ch : :class:`dmcl.microarray.MicroarrayChannel`
    sym : :class:`dmcl.symbols.SymbolChannel`
    tx : :class:`dmcl.symbols.TxSequence`
    seed : int
        Master seed.
    trial : int, default=0
        Trial index selecting the substream.

    Returns
    -------
    :class:`SimTrace`
    """
    z = _aggregate_counts(ch, sym, tx, trial_rng(seed, trial, SIMULATION_STREAM))
    return SimTrace(z, seed, "aggregate", tx, sym.T_b_eff, trial)


def simulate_per_molecule(
    ch: MicroarrayChannel,
    sym: SymbolChannel,
    tx: TxSequence,
    seed: int,
    trial: int = 0,
    max_work: int = DEFAULT_MOLECULE_BUDGET,
) -> SimTrace:
    """
    Simulate one trial molecule by molecule.

    Parameters
    ----------
    ch : :class:`dmcl.microarray.MicroarrayChannel`
    sym : :class:`dmcl.symbols.SymbolChannel`
    tx : :class:`dmcl.symbols.TxSequence`
    seed : int
        Master seed.
    trial : int, default=0
        Trial index selecting the substream.
    max_work : int, default=10**8
        Cap on molecule-symbol updates.

    Returns
    -------
    :class:`SimTrace`

    Raises
    ------
    BudgetError
        If the run would need more than ``max_work`` updates.
    """
    z = _per_molecule_counts(ch, sym, tx, trial_rng(seed, trial, SIMULATION_STREAM), max_work)
    return SimTrace(z, seed, "per_molecule", tx, sym.T_b_eff, trial)


def simulate(
    ch: MicroarrayChannel,
    sym: SymbolChannel,
    tx: TxSequence,
    seed: int,
    trial: int = 0,
    backend: str = "aggregate",
    max_work: int = DEFAULT_MOLECULE_BUDGET,
) -> SimTrace:
    """Dispatch to :func:`simulate_aggregate` or :func:`simulate_per_molecule`."""
    if backend == "aggregate":
        return simulate_aggregate(ch, sym, tx, seed, trial)
    if backend == "per_molecule":
        return simulate_per_molecule(ch, sym, tx, seed, trial, max_work)
    raise ValueError(f"Unknown backend '{backend}'; expected one of {VALID_BACKENDS}.")


def _run_trial(
    ch: MicroarrayChannel,
    sym: SymbolChannel,
    seed: int,
    trial: int,
    backend: str,
    tx: Optional[TxSequence],
    n_symbols: Optional[int],
    Q: Optional[int],
    max_work: int,
) -> SimTrace:
    if tx is None:
        bits = trial_rng(seed, trial, BITS_STREAM).integers(0, 2, size=n_symbols, dtype=np.int8)
        tx = TxSequence(bits, Q)
    return simulate(ch, sym, tx, seed, trial, backend, max_work)


def run_trials(
    ch: MicroarrayChannel,
    sym: SymbolChannel,
    seed: int,
    trials: int,
    backend: str = "aggregate",
    tx: Optional[TxSequence] = None,
    n_symbols: Optional[int] = None,
    Q: Optional[int] = None,
    n_jobs: int = 1,
    max_work: int = DEFAULT_MOLECULE_BUDGET,
) -> List[SimTrace]:
    """
    Run independent trials, optionally in parallel.

    Either a fixed ``tx`` is sent in every trial, or each trial draws its own
    i.i.d. equiprobable bits of length ``n_symbols`` from a dedicated
    substream and sends them with ``Q`` molecules per 1-bit.

    Parameters
    ----------
    ch : :class:`dmcl.microarray.MicroarrayChannel`
    sym : :class:`dmcl.symbols.SymbolChannel`
    seed : int
        Master seed.
    trials : int
        Number of trials.
    backend : str, default="aggregate"
        Simulation backend.
    tx : Optional[:class:`dmcl.symbols.TxSequence`], default=None
        Fixed transmission.
    n_symbols : Optional[int], default=None
        Length of the random bit sequences when ``tx`` is ``None``.
    Q : Optional[int], default=None
        Molecules per 1-bit when ``tx`` is ``None``.
    n_jobs : int, default=1
        Number of joblib workers.
    max_work : int, default=10**8
        Per-trial cap for the per-molecule backend.

    Returns
    -------
    List[:class:`SimTrace`]
        Traces in trial order; identical for any ``n_jobs``.
    """
    if trials < 1:
        raise ValueError(f"Number of trials must be at least 1, got {trials}.")
    if tx is None and (n_symbols is None or Q is None):
        raise ValueError("Either tx or both n_symbols and Q must be given.")
    if backend not in VALID_BACKENDS:
        raise ValueError(f"Unknown backend '{backend}'; expected one of {VALID_BACKENDS}.")

    logger.info(f"Running {trials} trial(s) with the {backend} backend (n_jobs={n_jobs})")
    if n_jobs == 1:
        return [
            _run_trial(ch, sym, seed, trial, backend, tx, n_symbols, Q, max_work)
            for trial in range(trials)
        ]
    parallel = Parallel(n_jobs=n_jobs, pre_dispatch=n_jobs)
    return list(
        parallel(
            delayed(_run_trial)(ch, sym, seed, trial, backend, tx, n_symbols, Q, max_work)
            for trial in range(trials)
        )
    )


@dataclass(frozen=True, eq=False)
class EmpiricalNoiseStats:
    """
    Monte Carlo counterpart of :class:`dmcl.symbols.NoiseStats`.

    Per-symbol quantities are across-trial sample moments of the noise
    ``w_k = z_k - z_bar_k``. The pooled profile averages ``rho_k[l]`` over
    the window, which is how :func:`dmcl.symbols.time_averaged_rho` is
    defined. Standard errors are leave-one-trial-out jackknife estimates.

    Attributes
    ----------
    mean : numpy.ndarray
        Across-trial mean of ``z_k``.
    var : numpy.ndarray
        Sample variance of ``w_k``.
    cov : numpy.ndarray
        Shape ``(B, ell_max + 1)``; sample ``Cov(w_k, w_{k-l})`` (NaN for ``l > k``).
    rho : numpy.ndarray
        Same shape; sample correlations (NaN where undefined).
    rho_se : numpy.ndarray
        Same shape; standard errors of ``rho`` inside the window (NaN elsewhere).
    rho_pooled : numpy.ndarray
        ``rho_bar[l]`` for ``l = 0..ell_max``.
    rho_pooled_se : numpy.ndarray
        Standard errors of ``rho_pooled``.
    window : :class:`dmcl.types.Window`
        Inclusive window used for pooling.
    n_traces : int
    degenerate : bool
        ``True`` if any variance inside the window is zero, so that some
        correlations are undefined.
    """

    mean: np.ndarray
    var: np.ndarray
    cov: np.ndarray
    rho: np.ndarray
    rho_se: np.ndarray
    rho_pooled: np.ndarray
    rho_pooled_se: np.ndarray
    window: Window
    n_traces: int
    degenerate: bool


def _sample_rho(sxy, sx, sy, sxx, syy, n):
    """Sample covariance and correlation from running sums over ``n`` trials."""
    cov = (sxy - sx * sy / n) / (n - 1)
    var_x = (sxx - sx * sx / n) / (n - 1)
    var_y = (syy - sy * sy / n) / (n - 1)
    scale = np.sqrt(np.clip(var_x, 0.0, None) * np.clip(var_y, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(scale > 0, cov / scale, np.nan)
    return cov, rho


def _jackknife_se(replicates: np.ndarray) -> np.ndarray:
    """Jackknife standard error over the leading (trial) axis."""
    n = replicates.shape[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        spread = replicates - np.nanmean(replicates, axis=0)
        return np.sqrt((n - 1) / n * np.nansum(spread**2, axis=0))


def estimate_noise_stats(
    traces: Sequence[SimTrace],
    sym: SymbolChannel,
    window: Optional[Window] = None,
    ell_max: int = 10,
) -> EmpiricalNoiseStats:
    """
    Estimate noise moments and correlations from simulated traces.

    Parameters
    ----------
    traces : Sequence[:class:`SimTrace`]
        At least two traces of equal length.
    sym : :class:`dmcl.symbols.SymbolChannel`
        Symbol channel supplying the conditional means.
    window : Optional[:class:`dmcl.types.Window`], default=None
        Inclusive ``(K_burn, K_max)``; ``(ell_max, B - 1)`` when ``None``.
    ell_max : int, default=10
        Largest lag.

    Returns
    -------
    :class:`EmpiricalNoiseStats`

    Raises
    ------
    InsufficientDataError
        With fewer than two traces or traces of unequal length.
    WindowError
        If the window does not fit into the traces or starts before ``ell_max``.
    """
    if len(traces) < 2:
        raise InsufficientDataError(f"Need at least 2 traces, got {len(traces)}.")
    lengths = {len(trace) for trace in traces}
    if len(lengths) != 1:
        raise InsufficientDataError(f"Traces have different lengths: {sorted(lengths)}.")
    n_symbols = lengths.pop()
    first, last = window if window is not None else (ell_max, n_symbols - 1)
    if not ell_max <= first <= last < n_symbols:
        raise WindowError(
            f"Window ({first}, {last}) must satisfy {ell_max} <= K_burn <= K_max < {n_symbols}."
        )

    n = len(traces)
    z = np.vstack([trace.z for trace in traces]).astype(float)
    w = z - np.vstack([mean_sequence(trace.tx, sym) for trace in traces])

    cov = np.full((n_symbols, ell_max + 1), np.nan)
    rho = np.full_like(cov, np.nan)
    rho_se = np.full_like(cov, np.nan)
    rho_pooled = np.full(ell_max + 1, np.nan)
    rho_pooled_se = np.full(ell_max + 1, np.nan)
    ks = np.arange(first, last + 1)

    for ell in range(min(ell_max, n_symbols - 1) + 1):
        x, y = w[:, ell:], w[:, : n_symbols - ell]
        sums = ((x * y).sum(0), x.sum(0), y.sum(0), (x * x).sum(0), (y * y).sum(0))
        cov[ell:, ell], rho[ell:, ell] = _sample_rho(*sums, n)

        with np.errstate(invalid="ignore"):
            finite = np.isfinite(rho[ks, ell]).any()
            rho_pooled[ell] = np.nanmean(rho[ks, ell]) if finite else np.nan
        if n < 3:
            continue
        # leave-one-trial-out sums restricted to the window
        xw, yw = w[:, ks], w[:, ks - ell]
        loo = (
            (xw * yw).sum(0) - xw * yw,
            xw.sum(0) - xw,
            yw.sum(0) - yw,
            (xw * xw).sum(0) - xw * xw,
            (yw * yw).sum(0) - yw * yw,
        )
        replicates = _sample_rho(*loo, n - 1)[1]
        rho_se[ks, ell] = _jackknife_se(replicates)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            usable = np.isfinite(replicates).any(axis=1)
            if usable.all():
                rho_pooled_se[ell] = _jackknife_se(np.nanmean(replicates, axis=1))

    var = cov[:, 0].copy()
    degenerate = bool(np.any(var[first : last + 1] <= 0))
    if degenerate:
        logger.warning("Zero noise variance inside the estimation window; correlations undefined.")
    return EmpiricalNoiseStats(
        mean=z.mean(axis=0),
        var=var,
        cov=cov,
        rho=rho,
        rho_se=rho_se,
        rho_pooled=rho_pooled,
        rho_pooled_se=rho_pooled_se,
        window=(first, last),
        n_traces=n,
        degenerate=degenerate,
    )


def ks_equivalence(
    traces_a: Sequence[SimTrace], traces_b: Sequence[SimTrace], indices: Sequence[int]
) -> Dict[int, float]:
    """
    Compare the marginals of ``z_k`` from two sets of traces.

    Parameters
    ----------
    traces_a, traces_b : Sequence[:class:`SimTrace`]
        Traces from the two backends.
    indices : Sequence[int]
        Symbol indices to compare.

    Returns
    -------
    Dict[int, float]
        Two-sample Kolmogorov-Smirnov p-value per symbol index.
    """
    z_a = np.vstack([trace.z for trace in traces_a])
    z_b = np.vstack([trace.z for trace in traces_b])
    return {int(k): float(ks_2samp(z_a[:, k], z_b[:, k]).pvalue) for k in indices}
