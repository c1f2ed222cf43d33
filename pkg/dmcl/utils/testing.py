"""Utility functions to make DMCL testing simpler."""

import os
from pathlib import Path
from typing import Any, Dict

from dmcl.config import _setup_config_parser
from dmcl.markov import ChannelParams
from dmcl.types import PathOrStr
from dmcl.utils.constants import REFERENCE_CHANNEL

if env_test_dir := os.getenv("TESTDIR"):
    tests_dir = Path(env_test_dir) / "tests"
else:
    tests_dir = Path(__file__).resolve().parent.parent.parent / "tests"
config_dir = tests_dir / "configs"
output_dir = tests_dir / "output"


def unlink(file_path: PathOrStr):
    """
    Remove a file path if it exists.

    Parameters
    ----------
    file_path : :class:`dmcl.types.PathOrStr`
        File path to remove.
    """
    file_path = Path(file_path)
    if file_path.exists():
        file_path.unlink()


def two_state_params() -> ChannelParams:
    """
    Return parameters of the smallest chain: one free and one bound state.

    With ``dt = c_p = 1`` the step probabilities are ``p_bind = 0.3`` and
    ``p_unbind = 0.2``, so ``x_eq = (0.4, 0.6)`` and the second eigenvalue
    is ``0.5``.
    """
    return ChannelParams(D=0.1, dx=1.0, dt=1.0, n_free=1, k_on=0.3, k_off=0.2, c_p=1.0)


def reference_params(**changes) -> ChannelParams:
    """Return the default physical parameter set with optional changes."""
    values = dict(REFERENCE_CHANNEL)
    values.update(changes)
    return ChannelParams(**values)


def fill_in_config_options(
    config_template_path: PathOrStr,
    values_to_fill_dict: Dict[str, Dict[str, Any]],
    sub_prefix: str,
) -> Path:
    """
    Fill in values in the given configuration template file.

    Parameters
    ----------
    config_template_path : :class:`dmcl.types.PathOrStr`
        A ``<prefix>.template.cfg`` file.
    values_to_fill_dict : Dict[str, Dict[str, Any]]
        Section -> option -> value; values are written with ``str()``.
    sub_prefix : str
        Suffix of the new configuration file name.

    Returns
    -------
    Path
        The path to ``<prefix>_<sub_prefix>.cfg`` next to the template.
    """
    config_template_path = Path(config_template_path)
    config = _setup_config_parser(config_template_path, validate=False)
    for section, options in values_to_fill_dict.items():
        if not config.has_section(section):
            config.add_section(section)
        for option, value in options.items():
            config.set(section, option, str(value))

    config_prefix = config_template_path.name.replace(".template.cfg", "")
    new_config_path = config_template_path.parent / f"{config_prefix}_{sub_prefix}.cfg"
    with open(new_config_path, "w") as new_config_file:
        config.write(new_config_file)
    return new_config_path
