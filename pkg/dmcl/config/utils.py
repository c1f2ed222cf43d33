# License: BSD 3 clause
"""Utility functions to make DMCL configuration parsing code cleaner."""

from pathlib import Path
from typing import Any, List

from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

from dmcl.types import PathOrStr
from dmcl.utils.exceptions import ConfigError

_YAML = YAML(typ="safe", pure=True)


def fix_json(json_string: str) -> str:
    """
    Fix incorrectly formatted quotes and capitalized booleans in JSON string.

    Parameters
    ----------
    json_string : str
        A JSON-style string.

    Returns
    -------
    str
        The normalized JSON string.
    """
    json_string = json_string.replace("True", "true")
    json_string = json_string.replace("False", "false")
    json_string = json_string.replace("'", '"')
    return json_string


def load_value(text: str, key: str) -> Any:
    """
    Parse an option value with the YAML safe loader.

    Parameters
    ----------
    text : str
        Raw option text.
    key : str
        Dotted key used in error messages.

    Raises
    ------
    ConfigError
        If the text is not valid YAML.
    """
    try:
        return _YAML.load(fix_json(text))
    except YAMLError as exc:
        raise ConfigError(f"{key}: cannot parse '{text}' ({exc.__class__.__name__}).") from None


def as_float(value: Any, key: str, positive: bool = False, non_negative: bool = False) -> float:
    """Convert ``value`` to a float, naming ``key`` on failure."""
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}.")
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}.") from None
    if positive and not number > 0:
        raise ConfigError(f"{key}: must be positive, got {number}.")
    if non_negative and not number >= 0:
        raise ConfigError(f"{key}: must be non-negative, got {number}.")
    return number


def as_int(value: Any, key: str, minimum: int = 0) -> int:
    """Convert ``value`` to an integer of at least ``minimum``, naming ``key`` on failure."""
    number = as_float(value, key)
    if number != int(number):
        raise ConfigError(f"{key}: expected an integer, got {value!r}.")
    if number < minimum:
        raise ConfigError(f"{key}: must be at least {minimum}, got {int(number)}.")
    return int(number)


def as_list(value: Any, key: str) -> List[Any]:
    """Wrap scalars into a one-element list; ``None`` becomes an empty list."""
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, dict):
        raise ConfigError(f"{key}: expected a list, got a mapping.")
    return [value]


def as_choice(value: Any, key: str, choices: List[str]) -> str:
    """Check that ``value`` is one of ``choices``."""
    if value not in choices:
        raise ConfigError(f"{key}: invalid value {value!r}; expected one of {choices}.")
    return value


def as_bool(value: Any, key: str) -> bool:
    """Check that ``value`` is a boolean."""
    if not isinstance(value, bool):
        raise ConfigError(f"{key}: expected true or false, got {value!r}.")
    return value


def resolve_path(path: PathOrStr, config_dir: PathOrStr) -> Path:
    """
    Resolve a path given in a configuration file.

    Relative paths are taken relative to the directory of the configuration
    file.

    Parameters
    ----------
    path : :class:`dmcl.types.PathOrStr`
        Absolute or relative path.
    config_dir : :class:`dmcl.types.PathOrStr`
        Directory of the configuration file.

    Returns
    -------
    pathlib.Path
        Absolute path; it need not exist.
    """
    path = Path(path)
    return path if path.is_absolute() else (Path(config_dir) / path).resolve()
