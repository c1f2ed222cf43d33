# License: BSD 3 clause
"""
Functions for running experiments from a configuration file.

Each task named in ``experiment.tasks`` (or on the command line) maps to a
runner below that writes its CSV tables into the output directory.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from dmcl.config import ExperimentConfig, parse_config_file
from dmcl.data import TraceWriter
from dmcl.detectors import (
    BerResult,
    DetectorConfig,
    detect,
    differential,
    evaluate_ber,
    merge_ber,
)
from dmcl.markov import spectral_summary
from dmcl.microarray import (
    MicroarrayChannel,
    build_microarray_channel,
    calibrate_koff,
    characterize,
    cir_fine,
    rescale_rates,
    state_heatmap,
    with_koff,
)
from dmcl.simulation import estimate_noise_stats, run_trials
from dmcl.symbols import (
    SymbolChannel,
    TxSequence,
    build_symbol_channel,
    decay_envelope_check,
    noise_statistics,
    time_averaged_rho,
)
from dmcl.types import HeaderDict, PathOrStr
from dmcl.utils.constants import VALID_TASKS
from dmcl.utils.exceptions import ConfigError
from dmcl.utils.logging import close_and_remove_logger_handlers, get_dmcl_logger

from .output import print_summary, write_result
from .utils import config_hash, format_number, make_header

__all__ = ["run_configuration", "run_task", "LabeledChannel", "TASK_RUNNERS"]


@dataclass(frozen=True, eq=False)
class LabeledChannel:
    """A channel together with the label used in output files."""

    label: str
    channel: MicroarrayChannel
    t_eq_target: float = float("nan")


@dataclass
class _Context:
    cfg: ExperimentConfig
    header: HeaderDict
    logger: logging.Logger
    written: List[Path]

    def write(self, df: pd.DataFrame, filename: str) -> Path:
        path = write_result(df, self.cfg.output_dir, filename, self.header, self.logger)
        self.written.append(path)
        return path


def _channels(ctx: _Context) -> List[LabeledChannel]:
    """Return the base channel, or one calibrated channel per settling-time target."""
    cfg = ctx.cfg
    if not cfg.teq_targets_s:
        return [LabeledChannel("base", build_microarray_channel(cfg.channel))]
    channels = []
    for target in cfg.teq_targets_s:
        k_off = calibrate_koff(cfg.channel, target, tol=cfg.calibration_tol)
        ctx.logger.info(f"t_eq target {target:g} s: k_off = {k_off:.6g} 1/s")
        channel = build_microarray_channel(with_koff(cfg.channel, k_off))
        channels.append(LabeledChannel(f"teq{format_number(target)}", channel, target))
    return channels


def _symbol_channels(
    ctx: _Context, labeled: LabeledChannel
) -> List[Tuple[float, SymbolChannel]]:
    tau = spectral_summary(labeled.channel.P, labeled.channel.dt).tau
    return [
        (
            T_b,
            build_symbol_channel(
                labeled.channel, T_b, L_max=ctx.cfg.L_max, eps_tap=ctx.cfg.eps_tap, tau=tau
            ),
        )
        for T_b in ctx.cfg.Tb_s
    ]


def run_characterize(ctx: _Context) -> None:
    """Report equilibrium gain, memory and interface balance of every channel."""
    rows = []
    for labeled in _channels(ctx):
        ch = labeled.channel
        result = characterize(ch)
        rows.append(
            {
                "label": labeled.label,
                "t_eq_target": labeled.t_eq_target,
                "k_on": ch.params.k_on,
                "k_off": ch.params.k_off,
                "K_D": ch.K_D,
                "h_eq_closed": result.h_eq_closed,
                "h_eq_numeric": result.h_eq_numeric,
                "slem": result.summary.slem,
                "tau": result.summary.tau,
                "t_eq": result.summary.t_eq,
                "balance_free": result.free_flux,
                "balance_bound": result.bound_flux,
                "method": result.summary.method,
            }
        )
    df = pd.DataFrame(rows)
    ctx.write(df, "characterize.csv")
    print_summary("Channel characterization", df[["label", "h_eq_numeric", "tau", "t_eq"]])


def run_cir(ctx: _Context) -> None:
    """Write the CIR of every channel and rate scaling, and optionally the state heatmap."""
    cfg = ctx.cfg
    for labeled in _channels(ctx):
        for factor in cfg.rate_factors:
            ch = labeled.channel
            label = labeled.label
            if factor != 1.0:
                ch = build_microarray_channel(rescale_rates(ch.params, factor))
                label = f"{label}_rate{format_number(factor)}"
            summary = spectral_summary(ch.P, ch.dt)
            t_max = cfg.cir_t_max_s if cfg.cir_t_max_s is not None else 2.0 * summary.t_eq
            n_max = max(1, int(round(t_max / ch.dt)))
            every = max(1, n_max // cfg.cir_samples)
            cir = cir_fine(ch, n_max, every, t_eq=summary.t_eq)
            ctx.logger.info(f"CIR {label}: t_eq = {summary.t_eq:.4g} s, h_eq = {ch.h_eq:.4g}")
            ctx.write(pd.DataFrame({"t_seconds": cir.times, "h": cir.fine}), f"cir_{label}.csv")

    if cfg.heatmap:
        ch = build_microarray_channel(cfg.channel)
        summary = spectral_summary(ch.P, ch.dt)
        t_max = cfg.cir_t_max_s if cfg.cir_t_max_s is not None else 2.0 * summary.t_eq
        n_max = max(1, int(round(t_max / ch.dt)))
        times, occupancy = state_heatmap(ch, n_max, max(1, n_max // cfg.cir_samples))
        n_times, n_states = occupancy.shape
        df = pd.DataFrame(
            {
                "t_seconds": np.repeat(times, n_states),
                "state_index": np.tile(np.arange(n_states), n_times),
                "probability": occupancy.ravel(),
            }
        )
        ctx.write(df, "heatmap.csv")


def run_taps(ctx: _Context) -> None:
    """Write ``h_l``, ``dh_l`` and ``pi^(l)`` for every channel and symbol interval."""
    frames = []
    for labeled in _channels(ctx):
        for _, sym in _symbol_channels(ctx, labeled):
            ells = np.arange(sym.L_trunc + 1)
            frames.append(
                pd.DataFrame(
                    {
                        "label": labeled.label,
                        "T_b_eff": sym.T_b_eff,
                        "ell": ells,
                        "h": sym.taps,
                        "delta_h": [sym.delta_tap(int(ell)) for ell in ells],
                        "pi": sym.pi,
                    }
                )
            )
            ctx.logger.info(
                f"{labeled.label}, T_b_eff={sym.T_b_eff:.6g} s: L_trunc={sym.L_trunc}, "
                f"dh_0={sym.delta_tap(0):.6g}"
            )
    ctx.write(pd.concat(frames, ignore_index=True), "taps.csv")


def run_noise_stats(ctx: _Context) -> None:
    """Compare the time-averaged correlation profile with Monte Carlo estimates."""
    cfg = ctx.cfg
    frames = []
    for labeled in _channels(ctx):
        for _, sym in _symbol_channels(ctx, labeled):
            burn = cfg.window_burn
            if burn is None:
                burn = max(sym.L_trunc, cfg.ell_max)
            window = (burn, burn + cfg.window_length - 1)
            rho_theory = time_averaged_rho(sym, cfg.ell_max, window)

            rho_mc = np.full(cfg.ell_max + 1, np.nan)
            rho_mc_se = np.full(cfg.ell_max + 1, np.nan)
            if cfg.trials >= 2:
                traces = run_trials(
                    labeled.channel,
                    sym,
                    cfg.seed,
                    cfg.trials,
                    backend=cfg.backend,
                    n_symbols=window[1] + 1,
                    Q=cfg.Q[0],
                    n_jobs=cfg.n_jobs,
                )
                empirical = estimate_noise_stats(traces, sym, window, cfg.ell_max)
                rho_mc, rho_mc_se = empirical.rho_pooled, empirical.rho_pooled_se
            else:
                ctx.logger.warning("noise-stats needs at least 2 trials for Monte Carlo estimates.")

            # lag decay of the covariance for a long all-ones transmission
            all_ones = TxSequence(np.ones(window[1] + 1, dtype=np.int8), cfg.Q[0])
            stats = noise_statistics(all_ones, sym, cfg.ell_max)
            envelope = decay_envelope_check(
                stats.cov[-1, 1:], sym.tau, sym.T_b_eff, stats.rho[-1, 1:]
            )
            if not envelope.passed:
                ctx.logger.warning(
                    f"{labeled.label}, T_b_eff={sym.T_b_eff:.6g} s: covariance decays slower "
                    f"than exp(-T_b/tau) (ratio {envelope.asymptotic_ratio:.4g})."
                )

            ells = np.arange(1, cfg.ell_max + 1)
            frames.append(
                pd.DataFrame(
                    {
                        "label": labeled.label,
                        "T_b_eff": sym.T_b_eff,
                        "ell": ells,
                        "rho_theory": rho_theory[1:],
                        "rho_mc": rho_mc[1:],
                        "rho_mc_se": rho_mc_se[1:],
                    }
                )
            )
    ctx.write(pd.concat(frames, ignore_index=True), "rho.csv")


def _combinations(cfg: ExperimentConfig, labeled: Sequence[LabeledChannel]) -> int:
    return len(labeled) * len(cfg.Tb_s) * len(cfg.Q)


def run_simulate(ctx: _Context) -> None:
    """Simulate traces with random bits and dump them."""
    cfg = ctx.cfg
    cfg.check_budget()
    labeled_channels = _channels(ctx)
    single = _combinations(cfg, labeled_channels) == 1
    suffix = ".csv" if cfg.trace_format == "csv" else ".dmct"
    for labeled in labeled_channels:
        for T_b, sym in _symbol_channels(ctx, labeled):
            for Q in cfg.Q:
                traces = run_trials(
                    labeled.channel,
                    sym,
                    cfg.seed,
                    cfg.trials,
                    backend=cfg.backend,
                    n_symbols=cfg.B,
                    Q=Q,
                    n_jobs=cfg.n_jobs,
                )
                directory = cfg.output_dir
                if not single:
                    directory = directory / f"traces_{labeled.label}_Tb{format_number(T_b)}_Q{Q}"
                for trace in traces:
                    path = directory / f"trace_{trace.trial}{suffix}"
                    TraceWriter.for_path(path, ctx.header, logger=ctx.logger).write(trace)
                    ctx.written.append(path)
                ctx.logger.info(f"Wrote {len(traces)} trace(s) to {directory}")


def _detector_configs(
    cfg: ExperimentConfig, sym: SymbolChannel, Q: int, logger: logging.Logger
) -> List[DetectorConfig]:
    detectors = []
    for kind in cfg.detector_kinds:
        if kind == "threshold":
            detectors.append(DetectorConfig.for_channel("threshold", sym, Q))
            continue
        for L in cfg.dfe_L:
            if L > sym.L_trunc:
                logger.warning(f"Skipping DFE with L={L} > L_trunc={sym.L_trunc}.")
                continue
            detectors.append(DetectorConfig.for_channel("dfe", sym, Q, L=L))
    return detectors


def run_ber_sweep(ctx: _Context) -> None:
    """Estimate the BER of every detector over the Q grid and symbol intervals."""
    cfg = ctx.cfg
    cfg.check_budget()
    labeled_channels = _channels(ctx)
    for labeled in labeled_channels:
        results: List[BerResult] = []
        for T_b, sym in _symbol_channels(ctx, labeled):
            skip = cfg.skip if cfg.skip is not None else sym.L_trunc
            for Q in cfg.Q:
                traces = run_trials(
                    labeled.channel,
                    sym,
                    cfg.seed,
                    cfg.trials,
                    backend=cfg.backend,
                    n_symbols=cfg.B,
                    Q=Q,
                    n_jobs=cfg.n_jobs,
                )
                for detector in _detector_configs(cfg, sym, Q, ctx.logger):
                    per_trial = []
                    for trace in traces:
                        decisions = detect(differential(trace), detector, sym.delta_taps)
                        truth = trace.tx.bits[:-1]
                        per_trial.append(
                            evaluate_ber(
                                truth,
                                decisions,
                                skip=skip,
                                detector=detector.kind,
                                L=detector.L,
                                Q=Q,
                                T_b_eff=sym.T_b_eff,
                            )
                        )
                        if cfg.decisions and trace.trial == 0:
                            name = f"{detector.kind}_{detector.L}_{Q}_{format_number(T_b)}"
                            if len(labeled_channels) > 1:
                                name = f"{labeled.label}_{name}"
                            decisions_df = pd.DataFrame(
                                {"k": np.arange(truth.shape[0]), "a_k": truth, "a_hat_k": decisions}
                            )
                            ctx.write(decisions_df, f"decisions_{name}.csv")
                    results.append(merge_ber(per_trial))

        df = pd.DataFrame(
            [
                {
                    "detector": result.detector,
                    "L": result.L,
                    "Q": result.Q,
                    "T_b_eff": result.T_b_eff,
                    "ber": result.ber,
                    "ci95": result.ci95,
                    "n_symbols": result.n_symbols,
                }
                for result in results
            ],
            columns=["detector", "L", "Q", "T_b_eff", "ber", "ci95", "n_symbols"],
        )
        filename = (
            "ber_summary.csv" if len(labeled_channels) == 1 else f"ber_summary_{labeled.label}.csv"
        )
        ctx.write(df, filename)
        print_summary(f"BER ({labeled.label})", df)


def run_calibrate_koff(ctx: _Context) -> None:
    """Calibrate ``k_off`` at fixed ``K_D`` for every settling-time target."""
    cfg = ctx.cfg
    if not cfg.teq_targets_s:
        raise ConfigError("calibration.teq_targets_s: no settling-time targets to calibrate.")
    rows = []
    for target in cfg.teq_targets_s:
        k_off = calibrate_koff(cfg.channel, target, tol=cfg.calibration_tol)
        params = with_koff(cfg.channel, k_off)
        ch = build_microarray_channel(params)
        summary = spectral_summary(ch.P, ch.dt)
        rows.append(
            {
                "t_eq_target": target,
                "k_off": k_off,
                "k_on": params.k_on,
                "t_eq": summary.t_eq,
                "h_eq": ch.h_eq,
            }
        )
    df = pd.DataFrame(rows)
    ctx.write(df, "calibration.csv")
    print_summary("k_off calibration", df)


TASK_RUNNERS: Dict[str, Callable[[_Context], None]] = {
    "characterize": run_characterize,
    "cir": run_cir,
    "taps": run_taps,
    "noise-stats": run_noise_stats,
    "simulate": run_simulate,
    "ber-sweep": run_ber_sweep,
    "calibrate-koff": run_calibrate_koff,
}
assert set(TASK_RUNNERS) == set(VALID_TASKS)


def run_task(
    task: str, cfg: ExperimentConfig, logger: Optional[logging.Logger] = None
) -> List[Path]:
    """
    Run a single task and return the paths it wrote.

    Raises
    ------
    ConfigError
        If ``task`` is not a known task.
    """
    if task not in TASK_RUNNERS:
        raise ConfigError(f"Unknown task '{task}'; expected one of {VALID_TASKS}.")
    logger = logger if logger else logging.getLogger(__name__)
    ctx = _Context(cfg, make_header(cfg, task=task), logger, [])
    logger.info(f"Running task {task} (config hash {config_hash(cfg)}, seed {cfg.seed})")
    TASK_RUNNERS[task](ctx)
    return ctx.written


def run_configuration(
    config: Union[PathOrStr, ExperimentConfig],
    tasks: Optional[Sequence[str]] = None,
    seed: Optional[int] = None,
    trials: Optional[int] = None,
    backend: Optional[str] = None,
    output_dir: Optional[PathOrStr] = None,
    log_level: int = logging.INFO,
) -> List[Path]:
    """
    Run the tasks of an experiment configuration.

    Parameters
    ----------
    config : Union[:class:`dmcl.types.PathOrStr`, :class:`dmcl.config.ExperimentConfig`]
        Path to the configuration file, or an already parsed configuration.
    tasks : Optional[Sequence[str]], default=None
        Tasks to run instead of ``experiment.tasks``.
    seed, trials, backend, output_dir : optional
        Command-line overrides.
    log_level : int, default=logging.INFO
        Level of the experiment log file.

    Returns
    -------
    List[pathlib.Path]
        Every file written, in order. Nothing is written (not even the log
        file) when there are no tasks.
    """
    cfg = config if isinstance(config, ExperimentConfig) else parse_config_file(config)
    cfg = cfg.with_overrides(seed=seed, trials=trials, backend=backend, output_dir=output_dir)
    tasks = list(cfg.tasks if tasks is None else tasks)
    if not tasks:
        logging.getLogger(__name__).info("No tasks to run.")
        return []

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    log_path = cfg.output_dir / f"{cfg.name}.log"
    logger = get_dmcl_logger("dmcl", filepath=str(log_path), log_level=log_level)
    written: List[Path] = []
    try:
        for task in tasks:
            written.extend(run_task(task, cfg, logger))
    finally:
        close_and_remove_logger_handlers(logger)
    return written
