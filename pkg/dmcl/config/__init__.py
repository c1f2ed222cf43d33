# License: BSD 3 clause
"""
The main class and functions used to parse DMCL configuration files.

A configuration file is an INI file whose sections may be dotted
(``[detector.dfe]``). A key is addressed as ``section.option``, for example
``channel.D_um2_per_s`` or ``detector.dfe.L``. Values are parsed as YAML,
so lists (``[0.1, 0.3]``), numbers (``6e8``) and booleans work.
"""

import configparser
import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from dmcl.markov import ChannelParams
from dmcl.types import PathOrStr
from dmcl.utils.constants import (
    CALIBRATION_TOL,
    EPS_TAP,
    REFERENCE_CHANNEL,
    VALID_BACKENDS,
    VALID_DETECTORS,
    VALID_TASKS,
    VALID_TRACE_FORMATS,
)
from dmcl.utils.exceptions import BudgetError, ConfigError

from .utils import (
    as_bool,
    as_choice,
    as_float,
    as_int,
    as_list,
    fix_json,
    load_value,
    resolve_path,
)

__all__ = [
    "DMCLConfigParser",
    "ExperimentConfig",
    "parse_config_file",
    "default_config",
    "fix_json",
    "resolve_path",
]

logger = logging.getLogger(__name__)

# every valid section and option with its default value
DEFAULTS: Dict[str, Dict[str, str]] = {
    "experiment": {
        "name": "dmcl_experiment",
        "tasks": "[]",
        "seed": "12345",
        "trials": "1",
        "backend": "aggregate",
        "n_jobs": "1",
        "budget": "1e9",
    },
    "channel": {
        "D_um2_per_s": repr(REFERENCE_CHANNEL["D"]),
        "dx_um": repr(REFERENCE_CHANNEL["dx"]),
        "dt_s": repr(REFERENCE_CHANNEL["dt"]),
        "N_f": repr(REFERENCE_CHANNEL["n_free"]),
        "k_on_per_M_s": repr(REFERENCE_CHANNEL["k_on"]),
        "k_off_per_s": repr(REFERENCE_CHANNEL["k_off"]),
        "c_p_M": repr(REFERENCE_CHANNEL["c_p"]),
    },
    "symbol": {
        "Tb_s": "[0.1, 0.3]",
        "L_max": "2000",
        "eps_tap": repr(EPS_TAP),
    },
    "calibration": {
        "teq_targets_s": "[]",
        "tol": repr(CALIBRATION_TOL),
    },
    "transmitter": {
        "Q": "[500, 1000, 2000, 5000]",
        "B": "100000",
    },
    "detector": {
        "kinds": "[threshold, dfe]",
        "skip": "auto",
    },
    "detector.dfe": {
        "L": "[1, 3, 5]",
    },
    "noise": {
        "ell_max": "10",
        "window_length": "200",
        "window_burn": "auto",
    },
    "cir": {
        "t_max_s": "auto",
        "samples": "2000",
        "heatmap": "false",
        "rate_factors": "[1.0]",
    },
    "output": {
        "directory": "output",
        "trace_format": "csv",
        "decisions": "false",
        "timestamps": "false",
    },
}


class DMCLConfigParser(configparser.ConfigParser):
    """A custom configuration file parser for DMCL."""

    def __init__(self) -> None:
        """Initialize configuration parser."""
        super(DMCLConfigParser, self).__init__(interpolation=None)
        self._section_defaults = DEFAULTS

    def optionxform(self, optionstr: str) -> str:
        # option names are case-sensitive (N_f, L, Tb_s)
        return optionstr

    def _find_invalid_sections(self) -> List[str]:
        return [section for section in self.sections() if section not in self._section_defaults]

    def _find_invalid_options(self) -> List[str]:
        """Return the dotted names of options that no section knows."""
        invalid = []
        for section in self.sections():
            valid = self._section_defaults.get(section, {})
            invalid.extend(
                f"{section}.{option}" for option in self.options(section) if option not in valid
            )
        return invalid

    def validate(self) -> None:
        """
        Validate specified sections and options.

        Raises
        ------
        ConfigError
            If the file contains unrecognized sections or options.
        """
        invalid_sections = self._find_invalid_sections()
        if invalid_sections:
            raise ConfigError(
                "Configuration file contains the following unrecognized sections: "
                f"{invalid_sections}"
            )
        invalid_options = self._find_invalid_options()
        if invalid_options:
            raise ConfigError(
                f"Configuration file contains the following unrecognized options: {invalid_options}"
            )

    def value(self, section: str, option: str) -> Any:
        """Return the YAML-parsed value of ``section.option`` or its default."""
        if self.has_option(section, option):
            text = self.get(section, option)
        else:
            text = self._section_defaults[section][option]
        return load_value(text, f"{section}.{option}")


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Validated settings of one experiment.

    Attributes mirror the configuration keys; ``channel`` bundles the
    ``[channel]`` section. ``None`` stands for ``auto`` where a key allows it.
    """

    name: str = "dmcl_experiment"
    tasks: Tuple[str, ...] = ()
    seed: int = 12345
    trials: int = 1
    backend: str = "aggregate"
    n_jobs: int = 1
    budget: float = 1e9
    channel: ChannelParams = dataclasses.field(
        default_factory=lambda: ChannelParams(**REFERENCE_CHANNEL)
    )
    Tb_s: Tuple[float, ...] = (0.1, 0.3)
    L_max: int = 2000
    eps_tap: float = EPS_TAP
    teq_targets_s: Tuple[float, ...] = ()
    calibration_tol: float = CALIBRATION_TOL
    Q: Tuple[int, ...] = (500, 1000, 2000, 5000)
    B: int = 100000
    detector_kinds: Tuple[str, ...] = ("threshold", "dfe")
    skip: Optional[int] = None
    dfe_L: Tuple[int, ...] = (1, 3, 5)
    ell_max: int = 10
    window_length: int = 200
    window_burn: Optional[int] = None
    cir_t_max_s: Optional[float] = None
    cir_samples: int = 2000
    heatmap: bool = False
    rate_factors: Tuple[float, ...] = (1.0,)
    output_dir: Path = Path("output")
    trace_format: str = "csv"
    decisions: bool = False
    timestamps: bool = False

    def as_dict(self) -> Dict[str, Any]:
        """Return a JSON-serializable view of the settings."""
        values = dataclasses.asdict(self)
        values["output_dir"] = str(self.output_dir)
        return values

    def canonical_json(self) -> str:
        """Settings that determine the results, as canonical JSON."""
        values = self.as_dict()
        # presentation settings do not change any result
        for key in ("output_dir", "n_jobs", "timestamps", "tasks", "name", "seed"):
            values.pop(key)
        return json.dumps(values, sort_keys=True, separators=(",", ":"))

    def with_overrides(
        self,
        seed: Optional[int] = None,
        trials: Optional[int] = None,
        backend: Optional[str] = None,
        output_dir: Optional[PathOrStr] = None,
    ) -> "ExperimentConfig":
        """Apply command-line overrides."""
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = as_int(seed, "experiment.seed")
        if trials is not None:
            changes["trials"] = as_int(trials, "experiment.trials", minimum=1)
        if backend is not None:
            changes["backend"] = as_choice(backend, "experiment.backend", VALID_BACKENDS)
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir).resolve()
        return dataclasses.replace(self, **changes)

    def check_budget(self) -> None:
        """
        Check the simulated symbol count against the budget.

        Raises
        ------
        BudgetError
            If ``B * trials`` exceeds ``experiment.budget``.
        """
        if self.B * self.trials > self.budget:
            raise BudgetError(
                f"B * trials = {self.B * self.trials} symbols exceeds "
                f"the budget of {self.budget:g}."
            )


def default_config(**changes) -> ExperimentConfig:
    """Return the default configuration with some fields changed."""
    return dataclasses.replace(ExperimentConfig(), **changes)


def _auto(value: Any) -> bool:
    return value is None or value == "auto"


def _setup_config_parser(config_path: PathOrStr, validate: bool = True) -> DMCLConfigParser:
    """
    Return a config parser at a given path.

    Only implemented as a separate function to simplify testing.

    Raises
    ------
    FileNotFoundError
        If the configuration file does not exist.
    ConfigError
        If the file is not a valid INI file or contains unknown keys.
    """
    config = DMCLConfigParser()
    config_path = Path(config_path)
    if not config_path.exists():
        raise FileNotFoundError(f"The configuration file {config_path} does not exist.")
    try:
        config.read(config_path, encoding="utf-8")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(
            f"{config_path}, line {exc.lineno}: option outside of any section."
        ) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(f"{config_path}, line {exc.lineno}: {exc.message}") from None
    except configparser.ParsingError as exc:
        lines = ", ".join(str(lineno) for lineno, _ in exc.errors)
        raise ConfigError(f"{config_path}, line(s) {lines}: cannot parse.") from None
    if validate:
        config.validate()
    return config


def parse_config_file(config_path: PathOrStr) -> ExperimentConfig:
    """
    Parse a DMCL experiment configuration file.

    Parameters
    ----------
    config_path : :class:`dmcl.types.PathOrStr`
        The path to the configuration file.

    Returns
    -------
    :class:`ExperimentConfig`

    Raises
    ------
    FileNotFoundError
        If the configuration file does not exist.
    ConfigError
        For syntax errors, unknown keys and invalid values; the message
        names the offending line or dotted key.
    """
    if not config_path:
        raise FileNotFoundError("The name of the configuration file is empty.")
    config_path = Path(config_path)
    config = _setup_config_parser(config_path)
    get = config.value

    tasks = [
        as_choice(task, "experiment.tasks", VALID_TASKS)
        for task in as_list(get("experiment", "tasks"), "experiment.tasks")
    ]
    try:
        channel = ChannelParams(
            D=as_float(get("channel", "D_um2_per_s"), "channel.D_um2_per_s", non_negative=True),
            dx=as_float(get("channel", "dx_um"), "channel.dx_um", positive=True),
            dt=as_float(get("channel", "dt_s"), "channel.dt_s", positive=True),
            n_free=as_int(get("channel", "N_f"), "channel.N_f", minimum=1),
            k_on=as_float(
                get("channel", "k_on_per_M_s"), "channel.k_on_per_M_s", non_negative=True
            ),
            k_off=as_float(get("channel", "k_off_per_s"), "channel.k_off_per_s", non_negative=True),
            c_p=as_float(get("channel", "c_p_M"), "channel.c_p_M", non_negative=True),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"channel: {exc}") from None

    skip = get("detector", "skip")
    window_burn = get("noise", "window_burn")
    t_max = get("cir", "t_max_s")
    name = str(get("experiment", "name"))

    settings = ExperimentConfig(
        name=name,
        tasks=tuple(tasks),
        seed=as_int(get("experiment", "seed"), "experiment.seed"),
        trials=as_int(get("experiment", "trials"), "experiment.trials", minimum=1),
        backend=as_choice(get("experiment", "backend"), "experiment.backend", VALID_BACKENDS),
        n_jobs=as_int(get("experiment", "n_jobs"), "experiment.n_jobs", minimum=-1),
        budget=as_float(get("experiment", "budget"), "experiment.budget", positive=True),
        channel=channel,
        Tb_s=tuple(
            as_float(value, "symbol.Tb_s", positive=True)
            for value in as_list(get("symbol", "Tb_s"), "symbol.Tb_s")
        ),
        L_max=as_int(get("symbol", "L_max"), "symbol.L_max", minimum=1),
        eps_tap=as_float(get("symbol", "eps_tap"), "symbol.eps_tap", positive=True),
        teq_targets_s=tuple(
            as_float(value, "calibration.teq_targets_s", positive=True)
            for value in as_list(get("calibration", "teq_targets_s"), "calibration.teq_targets_s")
        ),
        calibration_tol=as_float(get("calibration", "tol"), "calibration.tol", positive=True),
        Q=tuple(
            as_int(value, "transmitter.Q", minimum=1)
            for value in as_list(get("transmitter", "Q"), "transmitter.Q")
        ),
        B=as_int(get("transmitter", "B"), "transmitter.B", minimum=2),
        detector_kinds=tuple(
            as_choice(kind, "detector.kinds", VALID_DETECTORS)
            for kind in as_list(get("detector", "kinds"), "detector.kinds")
        ),
        skip=None if _auto(skip) else as_int(skip, "detector.skip"),
        dfe_L=tuple(
            as_int(value, "detector.dfe.L")
            for value in as_list(get("detector.dfe", "L"), "detector.dfe.L")
        ),
        ell_max=as_int(get("noise", "ell_max"), "noise.ell_max", minimum=1),
        window_length=as_int(get("noise", "window_length"), "noise.window_length", minimum=1),
        window_burn=None if _auto(window_burn) else as_int(window_burn, "noise.window_burn"),
        cir_t_max_s=None if _auto(t_max) else as_float(t_max, "cir.t_max_s", positive=True),
        cir_samples=as_int(get("cir", "samples"), "cir.samples", minimum=2),
        heatmap=as_bool(get("cir", "heatmap"), "cir.heatmap"),
        rate_factors=tuple(
            as_float(value, "cir.rate_factors", positive=True)
            for value in as_list(get("cir", "rate_factors"), "cir.rate_factors")
        ),
        output_dir=resolve_path(str(get("output", "directory")), config_path.parent),
        trace_format=as_choice(
            get("output", "trace_format"), "output.trace_format", VALID_TRACE_FORMATS
        ),
        decisions=as_bool(get("output", "decisions"), "output.decisions"),
        timestamps=as_bool(get("output", "timestamps"), "output.timestamps"),
    )
    if not settings.Tb_s:
        raise ConfigError("symbol.Tb_s: at least one symbol interval is needed.")
    if not settings.Q:
        raise ConfigError("transmitter.Q: at least one release size is needed.")
    logger.debug(f"Parsed {config_path}: tasks={list(settings.tasks)}")
    return settings
