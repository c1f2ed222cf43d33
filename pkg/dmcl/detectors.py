# License: BSD 3 clause
"""
Differential readout, symbol decisions and bit error rates.

The receiver works on ``dz_k = z_{k+1} - z_k``, whose desired term is
``Q a_k dh_0``. The threshold detector compares ``dz_k`` with the midpoint
``eta = Q dh_0 / 2``. The decision-feedback detector first subtracts the
post-cursor ISI rebuilt from its own earlier decisions.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np
from scipy.stats import binomtest

from dmcl.simulation import SimTrace
from dmcl.symbols import SymbolChannel
from dmcl.utils.constants import VALID_DETECTORS

__all__ = [
    "DetectorConfig",
    "BerResult",
    "midpoint_threshold",
    "differential",
    "threshold_detect",
    "dfe_detect",
    "detect",
    "evaluate_ber",
    "merge_ber",
    "compare_ber",
]

logger = logging.getLogger(__name__)


def midpoint_threshold(Q: float, delta_h0: float) -> float:
    """Return ``eta = Q dh_0 / 2``."""
    return Q * delta_h0 / 2.0


@dataclass(frozen=True)
class DetectorConfig:
    """
    Settings of one detector.

    Attributes
    ----------
    kind : str
        ``"threshold"`` or ``"dfe"``.
    eta : float
        Decision threshold in molecules.
    L : int, default=0
        Number of feedback taps; zero for the threshold detector.
    Q : Optional[int], default=None
        Molecules per 1-bit the threshold was derived for.
    """

    kind: str
    eta: float
    L: int = 0
    Q: Optional[int] = None

    def __post_init__(self):
        if self.kind not in VALID_DETECTORS:
            raise ValueError(f"Unknown detector '{self.kind}'; expected one of {VALID_DETECTORS}.")
        if self.L < 0:
            raise ValueError(f"Number of feedback taps must be non-negative, got {self.L}.")
        if self.kind == "threshold" and self.L != 0:
            raise ValueError("The threshold detector takes no feedback taps.")

    @classmethod
    def for_channel(cls, kind: str, sym: SymbolChannel, Q: int, L: int = 0) -> "DetectorConfig":
        """Build a detector whose threshold is the midpoint for ``Q`` on ``sym``."""
        return cls(kind=kind, eta=midpoint_threshold(Q, sym.delta_tap(0)), L=L, Q=Q)

    @property
    def label(self) -> str:
        return self.kind if self.kind == "threshold" else f"dfe_L{self.L}"


def differential(z: Union[SimTrace, np.ndarray]) -> np.ndarray:
    """
    Return ``dz_k = z_{k+1} - z_k`` for ``k = 0..B-2``.

    Entry ``k`` is the observation used to decide ``a_k``.

    Raises
    ------
    ValueError
        For traces shorter than two symbols.
    """
    values = np.asarray(z.z if isinstance(z, SimTrace) else z)
    if values.shape[0] < 2:
        raise ValueError(f"Need at least 2 observations, got {values.shape[0]}.")
    return np.diff(values.astype(np.int64) if values.dtype.kind in "iu" else values)


def threshold_detect(dz, cfg: DetectorConfig) -> np.ndarray:
    """Decide ``a_k = 1`` exactly when ``dz_k > eta``."""
    return (np.asarray(dz) > cfg.eta).astype(np.int8)


def dfe_detect(dz, delta_taps, cfg: DetectorConfig) -> np.ndarray:
    """
    Decide bits sequentially with finite-memory decision feedback.

    ``r_k = dz_k - Q sum_{l=1..L} a_hat_{k-l} dh_l`` and ``a_hat_k = 1{r_k > eta}``;
    decisions before ``k = 0`` count as zeros.

    Parameters
    ----------
    dz : array-like
        Differential observations.
    delta_taps : array-like
        ``dh_l`` for ``l = 0..L_trunc-1``.
    cfg : :class:`DetectorConfig`
        Needs ``Q`` set when ``L > 0``.

    Returns
    -------
    numpy.ndarray
        Decisions, one per entry of ``dz``.

    Raises
    ------
    ValueError
        If ``L`` exceeds ``L_trunc`` or ``Q`` is missing.
    """
    dz = np.asarray(dz, dtype=float)
    delta_taps = np.asarray(delta_taps, dtype=float)
    L = cfg.L
    if L > delta_taps.shape[0]:
        raise ValueError(f"DFE memory L={L} exceeds L_trunc={delta_taps.shape[0]}.")
    if L == 0:
        return threshold_detect(dz, cfg)
    if cfg.Q is None:
        raise ValueError("The DFE needs Q to rebuild the ISI.")

    # weights[j] multiplies a_hat_{k-L+j}
    weights = (cfg.Q * np.append(delta_taps, 0.0)[1 : L + 1])[::-1].tolist()
    history = [0] * L
    decisions = np.zeros(dz.shape[0], dtype=np.int8)
    for k, value in enumerate(dz.tolist()):
        isi = sum(w for w, bit in zip(weights, history) if bit)
        decision = 1 if value - isi > cfg.eta else 0
        decisions[k] = decision
        history.append(decision)
        del history[0]
    return decisions


def detect(dz, cfg: DetectorConfig, delta_taps=None) -> np.ndarray:
    """Run the detector selected by ``cfg.kind``."""
    if cfg.kind == "threshold":
        return threshold_detect(dz, cfg)
    if delta_taps is None:
        raise ValueError("The DFE needs the differential taps.")
    return dfe_detect(dz, delta_taps, cfg)


@dataclass(frozen=True)
class BerResult:
    """
    Bit error rate with a Wilson 95% confidence interval.

    Attributes
    ----------
    n_symbols : int
    n_errors : int
    ber : float
        ``n_errors / n_symbols``.
    ci95 : float
        Half-width of the Wilson interval.
    ci_low, ci_high : float
        Wilson interval bounds.
    detector : str
    L : int
    Q : Optional[int]
    T_b_eff : float
    """

    n_symbols: int
    n_errors: int
    ber: float
    ci95: float
    ci_low: float
    ci_high: float
    detector: str = ""
    L: int = 0
    Q: Optional[int] = None
    T_b_eff: float = float("nan")

    def __post_init__(self):
        if not 0 <= self.n_errors <= self.n_symbols or self.n_symbols < 1:
            raise ValueError(f"Invalid error count {self.n_errors} of {self.n_symbols} symbols.")

    @classmethod
    def from_counts(cls, n_errors: int, n_symbols: int, **identity) -> "BerResult":
        """Compute the point estimate and the Wilson interval from raw counts."""
        low, high = binomtest(int(n_errors), int(n_symbols)).proportion_ci(
            confidence_level=0.95, method="wilson"
        )
        return cls(
            n_symbols=int(n_symbols),
            n_errors=int(n_errors),
            ber=n_errors / n_symbols,
            ci95=(high - low) / 2.0,
            ci_low=float(low),
            ci_high=float(high),
            **identity,
        )


def evaluate_ber(
    truth,
    decisions,
    skip: int = 0,
    detector: str = "",
    L: int = 0,
    Q: Optional[int] = None,
    T_b_eff: float = float("nan"),
) -> BerResult:
    """
    Count decision errors after a burn-in.

    Parameters
    ----------
    truth : array-like
        Transmitted bits aligned with ``decisions``.
    decisions : array-like
        Detected bits.
    skip : int, default=0
        Leading symbols left out of the count.
    detector, L, Q, T_b_eff
        Identity recorded on the result.

    Returns
    -------
    :class:`BerResult`

    Raises
    ------
    ValueError
        If the lengths differ, ``skip`` is negative, or nothing is left to count.
    """
    truth = np.asarray(truth)
    decisions = np.asarray(decisions)
    if truth.shape != decisions.shape:
        raise ValueError(
            f"Length mismatch: {truth.shape[0]} bits vs {decisions.shape[0]} decisions."
        )
    if skip < 0:
        raise ValueError(f"Burn-in must be non-negative, got {skip}.")
    if skip >= truth.shape[0]:
        raise ValueError(f"Burn-in of {skip} leaves none of the {truth.shape[0]} symbols.")
    n_errors = int(np.count_nonzero(truth[skip:] != decisions[skip:]))
    return BerResult.from_counts(
        n_errors, truth.shape[0] - skip, detector=detector, L=L, Q=Q, T_b_eff=T_b_eff
    )


def merge_ber(results: Iterable[BerResult]) -> BerResult:
    """Pool the error counts of several runs of the same detector."""
    results = list(results)
    if not results:
        raise ValueError("Nothing to merge.")
    first = results[0]
    return BerResult.from_counts(
        sum(result.n_errors for result in results),
        sum(result.n_symbols for result in results),
        detector=first.detector,
        L=first.L,
        Q=first.Q,
        T_b_eff=first.T_b_eff,
    )


def compare_ber(a: BerResult, b: BerResult) -> int:
    """
    Order two BER estimates.

    Returns
    -------
    int
        -1 if ``a`` is significantly lower, 1 if significantly higher and 0
        if their Wilson intervals overlap.
    """
    if a.ci_high < b.ci_low:
        return -1
    if a.ci_low > b.ci_high:
        return 1
    return 0
